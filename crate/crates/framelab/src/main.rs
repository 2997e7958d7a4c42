//! Command-line front end. Reports are JSON on stdout, tabular data is CSV,
//! and the exit code is nonzero iff a run produced a failing verdict (or the
//! arguments were unusable). Rational arguments accept `a/b` or plain
//! numbers.

use std::error::Error;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use framelab::coding::{
    noma_capacity, operational_rdf, stc_bound, CapacityConfig, CapacityMode, RdfConfig,
};
use framelab::frames::{build, read_json, write_json, FamilyParams};
use framelab::harness::{
    run_convergence, run_verification_suite, ConvergenceConfig, ExperimentReport, Metric, Scope,
    Verdict,
};
use framelab::limits::LimitLaw;
use framelab::moments::{
    asymptotic_moment, etf_expected_moment, etf_moment_variance, eval_poly,
    manova_identity_check, MomentContext,
};
use framelab::numerics::{parse_rational, rational_to_f64, RngStream};
use framelab::spectra::{esd_of, AverageMode, Side};
use framelab::subsets::SelectionModel;

#[derive(Parser)]
#[command(
    name = "framelab",
    version,
    about = "Unit-norm frames, random sub-frame spectra, limit laws, and coding figures of merit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build frame files and inspect their diagnostics.
    Frame {
        #[command(subcommand)]
        cmd: FrameCmd,
    },
    /// Sample sub-frame spectra into a CSV of eigenvalues.
    Spectrum(SpectrumArgs),
    /// Query a limiting law: density, CDF, or moment.
    Law(LawArgs),
    /// Exact and asymptotic sub-frame moment formulas.
    Moments {
        #[command(subcommand)]
        cmd: MomentsCmd,
    },
    /// Operational rate-distortion averaged over random subsets.
    Rdf(RdfArgs),
    /// Multiple-access capacity averaged over k-subsets.
    Capacity(CapacityArgs),
    /// Space-time determinant bound averaged over k-subsets.
    Stc(StcArgs),
    /// Convergence ladder against the MANOVA law, with fits and verdicts.
    Converge(ConvergeArgs),
    /// Desk-scale verification suite.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum FrameCmd {
    /// Construct a frame and write it as JSON.
    Build(FrameBuildArgs),
    /// Validate a frame file and print its diagnostics as JSON.
    Check { path: PathBuf },
}

#[derive(Args)]
struct FrameBuildArgs {
    /// lpf, dss, paley_real, paley_complex, steiner_pairs, spikes_fourier,
    /// spikes_hadamard, union_bases, iid_gaussian, haar, rand_dft, rand_dct
    #[arg(long)]
    family: String,
    /// Prime parameter (dss, paley_real, paley_complex).
    #[arg(long)]
    q: Option<usize>,
    /// Point count (steiner_pairs).
    #[arg(long)]
    v: Option<usize>,
    /// Row count.
    #[arg(long)]
    m: Option<usize>,
    /// Column count.
    #[arg(long)]
    n: Option<usize>,
    /// Basis copies (union_bases).
    #[arg(long, default_value_t = 2)]
    copies: usize,
    /// Construction seed for the random families.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination frame file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Frame file written by `frame build`.
    #[arg(long)]
    frame: PathBuf,
    /// Selection model: comb:<k> or bern:<p>.
    #[arg(long)]
    select: String,
    /// Number of random subsets to draw.
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination CSV (columns trial,index,eigenvalue).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LawArgs {
    /// mp or manova
    #[arg(long)]
    family: String,
    /// Aspect ratio m/n (manova only).
    #[arg(long)]
    gamma: Option<String>,
    /// Subset ratio k/m.
    #[arg(long)]
    beta: String,
    /// Evaluate the continuous density at this point.
    #[arg(long, conflicts_with_all = ["cdf", "moment"])]
    density: Option<String>,
    /// Evaluate the CDF (atoms included) at this point.
    #[arg(long, conflicts_with = "moment")]
    cdf: Option<String>,
    /// Per-eigenvalue moment order.
    #[arg(long)]
    moment: Option<usize>,
}

#[derive(Args)]
struct RationalCtxArgs {
    /// Aspect ratio m/n as a/b.
    #[arg(long)]
    gamma: String,
    /// Column-keep probability as a/b.
    #[arg(long)]
    p: String,
}

#[derive(Subcommand)]
enum MomentsCmd {
    /// Exact expected sub-frame moment at finite n (r = 1..4).
    Exact {
        #[command(flatten)]
        ctx: RationalCtxArgs,
        /// Frame length (γn must be an integer).
        #[arg(long)]
        n: u64,
        /// Moment order.
        #[arg(long)]
        r: usize,
    },
    /// Exact sub-frame moment variance at finite n (r = 1..2).
    Var {
        #[command(flatten)]
        ctx: RationalCtxArgs,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: usize,
    },
    /// Asymptotic moment polynomials in p with rational coefficients.
    Asymptotic {
        #[command(flatten)]
        ctx: RationalCtxArgs,
        #[arg(long)]
        rmax: usize,
    },
    /// Recursive-engine moments against the Narayana closed form.
    Identity {
        #[command(flatten)]
        ctx: RationalCtxArgs,
        #[arg(long)]
        rmax: usize,
    },
}

#[derive(Args)]
struct RdfArgs {
    #[arg(long)]
    frame: PathBuf,
    /// Selection model: comb:<k> or bern:<p>.
    #[arg(long)]
    select: String,
    /// Signal-to-distortion ratio σx²/D (linear).
    #[arg(long)]
    sdr: String,
    /// Monte-Carlo subset draws (omit with --exact).
    #[arg(long)]
    trials: Option<usize>,
    /// Enumerate every subset instead of sampling.
    #[arg(long, conflicts_with = "trials")]
    exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Histogram CSV of the per-subset rates.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long)]
    frame: PathBuf,
    /// Active users per draw.
    #[arg(long)]
    k: usize,
    /// Linear signal-to-noise ratio.
    #[arg(long)]
    snr: String,
    /// Matched-filter (log det of the subset Gram) instead of regular.
    #[arg(long)]
    practical: bool,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, conflicts_with = "trials")]
    exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StcArgs {
    #[arg(long)]
    frame: PathBuf,
    /// Codeword support size, m ≤ k ≤ n.
    #[arg(long)]
    k: usize,
    /// Linear signal-to-noise ratio.
    #[arg(long)]
    snr: String,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, conflicts_with = "trials")]
    exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConvergeArgs {
    /// dss, lpf, iid_gaussian, haar, rand_dft, rand_dct, manova_ensemble
    #[arg(long)]
    family: String,
    /// Comma-separated size ladder (primes for dss, lengths otherwise).
    #[arg(long)]
    sizes: String,
    #[arg(long)]
    gamma: String,
    #[arg(long)]
    beta: String,
    /// ks, mse, shannon, or moment_<r>.
    #[arg(long)]
    metric: String,
    /// Trials per ladder size (at least 30).
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bernoulli column selection at the matched rate instead of fixed k.
    #[arg(long)]
    bern: bool,
    /// Destination report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// "all" or a comma-separated subset of: moments, variances, ewb,
    /// esv_esk, monotonicity_shannon, monotonicity_mse, lemma_avg,
    /// identity_check.
    #[arg(long, default_value = "all")]
    scope: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination report JSON (stdout always gets the verdict lines).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Ok(false) means the run completed but a verdict failed.
fn run(cli: Cli) -> Result<bool, Box<dyn Error>> {
    match cli.cmd {
        Cmd::Frame { cmd } => frame_cmd(cmd),
        Cmd::Spectrum(a) => spectrum_cmd(a),
        Cmd::Law(a) => law_cmd(a),
        Cmd::Moments { cmd } => moments_cmd(cmd),
        Cmd::Rdf(a) => rdf_cmd(a),
        Cmd::Capacity(a) => capacity_cmd(a),
        Cmd::Stc(a) => stc_cmd(a),
        Cmd::Converge(a) => converge_cmd(a),
        Cmd::Verify(a) => verify_cmd(a),
    }
}

/// `a/b`, integer, or decimal.
fn number(s: &str) -> Result<f64, Box<dyn Error>> {
    if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    Ok(rational_to_f64(&parse_rational(s)?))
}

fn params_for(a: &FrameBuildArgs) -> Result<FamilyParams, Box<dyn Error>> {
    fn need<T: Copy>(v: Option<T>, flag: &str, family: &str) -> Result<T, Box<dyn Error>> {
        v.ok_or_else(|| format!("family {family} needs --{flag}").into())
    }
    let f = a.family.as_str();
    Ok(match f {
        "lpf" => FamilyParams::Lpf {
            m: need(a.m, "m", f)?,
            n: need(a.n, "n", f)?,
        },
        "dss" => FamilyParams::DssQr { q: need(a.q, "q", f)? },
        "paley_real" => FamilyParams::PaleyReal { q: need(a.q, "q", f)? },
        "paley_complex" => FamilyParams::PaleyComplex { q: need(a.q, "q", f)? },
        "steiner_pairs" => FamilyParams::SteinerPairs { v: need(a.v, "v", f)? },
        "spikes_fourier" => FamilyParams::SpikesFourier { m: need(a.m, "m", f)? },
        "spikes_hadamard" => FamilyParams::SpikesHadamard { m: need(a.m, "m", f)? },
        "union_bases" => FamilyParams::UnionBases {
            m: need(a.m, "m", f)?,
            copies: a.copies,
        },
        "iid_gaussian" => FamilyParams::IidGaussian {
            m: need(a.m, "m", f)?,
            n: need(a.n, "n", f)?,
            seed: a.seed,
        },
        "haar" => FamilyParams::Haar {
            m: need(a.m, "m", f)?,
            n: need(a.n, "n", f)?,
            seed: a.seed,
        },
        "rand_dft" => FamilyParams::RandDft {
            m: need(a.m, "m", f)?,
            n: need(a.n, "n", f)?,
            seed: a.seed,
        },
        "rand_dct" => FamilyParams::RandDct {
            m: need(a.m, "m", f)?,
            n: need(a.n, "n", f)?,
            seed: a.seed,
        },
        other => return Err(format!("unknown frame family {other:?}").into()),
    })
}

fn frame_cmd(cmd: FrameCmd) -> Result<bool, Box<dyn Error>> {
    match cmd {
        FrameCmd::Build(a) => {
            let frame = build(&params_for(&a)?)?;
            write_json(&frame, &a.out)?;
            println!(
                "{}",
                json!({
                    "family": frame.family(),
                    "m": frame.m(),
                    "n": frame.n(),
                    "out": a.out,
                })
            );
            Ok(true)
        }
        FrameCmd::Check { path } => {
            let frame = read_json(&path)?;
            println!("{}", serde_json::to_string_pretty(&frame.diagnostics())?);
            Ok(true)
        }
    }
}

fn spectrum_cmd(a: SpectrumArgs) -> Result<bool, Box<dyn Error>> {
    let frame = read_json(&a.frame)?;
    let model = SelectionModel::parse(&a.select)?;
    model.validate(frame.n())?;
    let mut csv = String::from("trial,index,eigenvalue\n");
    let mut drawn = 0usize;
    for t in 0..a.trials {
        let mut rng = RngStream::for_trial(a.seed, t as u64);
        let cols = model.draw(frame.n(), &mut rng);
        if cols.is_empty() {
            continue;
        }
        let esd = esd_of(&frame, &cols, Side::Gram)?;
        for (i, v) in esd.eigenvalues().iter().enumerate() {
            writeln!(csv, "{t},{i},{v}")?;
        }
        drawn += 1;
    }
    std::fs::write(&a.out, csv)?;
    println!(
        "{}",
        json!({
            "frame": a.frame,
            "model": model.label(),
            "trials": a.trials,
            "nonempty_draws": drawn,
            "out": a.out,
        })
    );
    Ok(true)
}

fn law_cmd(a: LawArgs) -> Result<bool, Box<dyn Error>> {
    let beta = number(&a.beta)?;
    let gamma = a.gamma.as_deref().map(number).transpose()?;
    let law = match a.family.as_str() {
        "mp" => LimitLaw::mp(beta)?,
        "manova" => {
            let g = gamma.ok_or("the manova law needs --gamma")?;
            LimitLaw::manova(g, beta)?
        }
        other => return Err(format!("unknown law family {other:?} (mp or manova)").into()),
    };
    let (query, at, value) = if let Some(x) = &a.density {
        let x = number(x)?;
        ("density", json!(x), law.density(x))
    } else if let Some(x) = &a.cdf {
        let x = number(x)?;
        ("cdf", json!(x), law.cdf(x))
    } else if let Some(r) = a.moment {
        ("moment", json!(r), law.moment(r))
    } else {
        return Err("pass one of --density, --cdf, --moment".into())
    };
    println!(
        "{}",
        json!({
            "family": a.family,
            "gamma": gamma,
            "beta": beta,
            "query": query,
            "at": at,
            "value": value,
        })
    );
    Ok(true)
}

fn moments_cmd(cmd: MomentsCmd) -> Result<bool, Box<dyn Error>> {
    let parse_ctx = |c: &RationalCtxArgs, n: Option<u64>| -> Result<MomentContext, Box<dyn Error>> {
        Ok(MomentContext::new(
            parse_rational(&c.gamma)?,
            parse_rational(&c.p)?,
            n,
        )?)
    };
    match cmd {
        MomentsCmd::Exact { ctx, n, r } => {
            let c = parse_ctx(&ctx, Some(n))?;
            let v = etf_expected_moment(&c, r)?;
            println!(
                "{}",
                json!({
                    "r": r,
                    "n": n,
                    "value": v.to_string(),
                    "value_f64": rational_to_f64(&v),
                })
            );
            Ok(true)
        }
        MomentsCmd::Var { ctx, n, r } => {
            let c = parse_ctx(&ctx, Some(n))?;
            let v = etf_moment_variance(&c, r)?;
            println!(
                "{}",
                json!({
                    "r": r,
                    "n": n,
                    "value": v.to_string(),
                    "value_f64": rational_to_f64(&v),
                })
            );
            Ok(true)
        }
        MomentsCmd::Asymptotic { ctx, rmax } => {
            let c = parse_ctx(&ctx, None)?;
            let mut rows = Vec::new();
            for r in 1..=rmax {
                let coeffs = asymptotic_moment(&c, r)?;
                let value = eval_poly(&coeffs, c.p());
                rows.push(json!({
                    "r": r,
                    "coefficients": coeffs.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
                    "value_at_p": value.to_string(),
                    "value_f64": rational_to_f64(&value),
                }));
            }
            println!("{}", serde_json::to_string_pretty(&rows)?);
            Ok(true)
        }
        MomentsCmd::Identity { ctx, rmax } => {
            let c = parse_ctx(&ctx, None)?;
            let verdicts = manova_identity_check(&c, rmax)?;
            let rows: Vec<_> = verdicts
                .iter()
                .map(|v| {
                    json!({
                        "r": v.r,
                        "recursive": v.recursive.to_string(),
                        "manova": v.manova.to_string(),
                        "equal": v.equal,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows)?);
            Ok(verdicts.iter().all(|v| v.equal))
        }
    }
}

fn average_mode(
    trials: Option<usize>,
    exact: bool,
    seed: u64,
) -> Result<AverageMode, Box<dyn Error>> {
    match (trials, exact) {
        (_, true) => Ok(AverageMode::Exact),
        (Some(t), false) => Ok(AverageMode::MonteCarlo {
            trials: t,
            master_seed: seed,
        }),
        (None, false) => Err("pass --trials <N> or --exact".into()),
    }
}

/// Equal-width histogram of the finite samples, ~√N bins.
fn write_histogram(path: &Path, samples: &[f64]) -> Result<(), Box<dyn Error>> {
    let mut csv = String::from("bin_lo,bin_hi,count\n");
    if !samples.is_empty() {
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            let bins = ((samples.len() as f64).sqrt().ceil() as usize).clamp(8, 64);
            let width = (hi - lo) / bins as f64;
            let mut counts = vec![0usize; bins];
            for &s in samples {
                let b = (((s - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            for (b, c) in counts.iter().enumerate() {
                let l = lo + b as f64 * width;
                writeln!(csv, "{l},{},{c}", l + width)?;
            }
        } else {
            writeln!(csv, "{lo},{hi},{}", samples.len())?;
        }
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn rdf_cmd(a: RdfArgs) -> Result<bool, Box<dyn Error>> {
    let frame = read_json(&a.frame)?;
    let model = SelectionModel::parse(&a.select)?;
    model.validate(frame.n())?;
    let sdr = number(&a.sdr)?;
    if !(sdr > 0.0) || !sdr.is_finite() {
        return Err(format!("--sdr must be positive and finite, got {sdr}").into());
    }
    let (m, n) = (frame.m() as f64, frame.n() as f64);
    let (beta, p) = match model {
        SelectionModel::Comb { k } => (k as f64 / m, k as f64 / n),
        SelectionModel::Bern { p } => (p * n / m, p),
    };
    let cfg = RdfConfig::new(1.0, 1.0 / sdr, beta, p)?;
    let mode = average_mode(a.trials, a.exact, a.seed)?;
    let outcome = operational_rdf(&frame, model, &cfg, mode)?;
    if let Some(out) = &a.out {
        write_histogram(out, &outcome.rates)?;
    }
    println!(
        "{}",
        json!({
            "frame": a.frame,
            "model": outcome.model,
            "sdr": sdr,
            "mean_bits": outcome.mean,
            "half_width": outcome.half_width,
            "infinite_fraction": outcome.infinite_fraction,
            "samples": outcome.samples,
            "histogram": a.out,
        })
    );
    Ok(true)
}

fn capacity_cmd(a: CapacityArgs) -> Result<bool, Box<dyn Error>> {
    let frame = read_json(&a.frame)?;
    let snr = number(&a.snr)?;
    let mode = if a.practical {
        CapacityMode::Practical
    } else {
        CapacityMode::Regular
    };
    let cfg = CapacityConfig::new(snr, a.k, mode)?;
    let avg = average_mode(a.trials.or(Some(200)), a.exact, a.seed)?;
    let outcome = noma_capacity(&frame, SelectionModel::Comb { k: a.k }, &cfg, avg)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(true)
}

fn stc_cmd(a: StcArgs) -> Result<bool, Box<dyn Error>> {
    let frame = read_json(&a.frame)?;
    let snr = number(&a.snr)?;
    let avg = average_mode(a.trials.or(Some(200)), a.exact, a.seed)?;
    let outcome = stc_bound(&frame, a.k, snr, avg)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(true)
}

fn print_verdicts(verdicts: &[Verdict]) {
    for v in verdicts {
        println!(
            "{} {} measured={:e} tolerance={:e}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.measured,
            v.tolerance
        );
    }
}

fn finish_report(report: &ExperimentReport, out: Option<&Path>) -> Result<bool, Box<dyn Error>> {
    if let Some(path) = out {
        std::fs::write(path, report.to_json())?;
    }
    print_verdicts(&report.verdicts);
    for s in &report.skipped {
        println!("SKIP size={} ({})", s.size, s.reason);
    }
    Ok(report.all_pass())
}

fn converge_cmd(a: ConvergeArgs) -> Result<bool, Box<dyn Error>> {
    let sizes = a
        .sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("bad --sizes list: {e}"))?;
    let cfg = ConvergenceConfig {
        family: a.family,
        sizes,
        gamma: number(&a.gamma)?,
        beta: number(&a.beta)?,
        metric: Metric::parse(&a.metric)?,
        trials: a.trials,
        seed: a.seed,
        bernoulli: a.bern,
    };
    let report = run_convergence(&cfg)?;
    finish_report(&report, Some(&a.out))
}

fn verify_cmd(a: VerifyArgs) -> Result<bool, Box<dyn Error>> {
    let scopes: Vec<Scope> = if a.scope == "all" {
        Scope::ALL.to_vec()
    } else {
        a.scope
            .split(',')
            .map(|s| Scope::parse(s.trim()))
            .collect::<Result<_, _>>()?
    };
    let report = run_verification_suite(&scopes, a.seed);
    finish_report(&report, a.out.as_deref())
}
