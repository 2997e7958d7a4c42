//! Sub-frame spectra: empirical distributions, performance functionals, and
//! subset-averaged goodness measures.
//!
//! Selecting k of a frame's n columns leaves an m×k sub-frame F_S. Its
//! spectrum can be read off the Gram F_S†F_S (k×k) or the Hessian F_S F_S†
//! (m×m); the two share their nonzero eigenvalues, so `Side::Auto` simply
//! takes the smaller matrix. On top of the raw spectrum sit the scalar
//! figures of merit Ψ (noise amplification, Shannon means ratio, restricted
//! isometry, condition number), their subset averages L, and the
//! Kolmogorov-Smirnov distance to a limit law.

use std::f64::consts::E;
use std::fmt;

use serde::Serialize;

use crate::frames::Frame;
use crate::limits::LimitLaw;
use crate::numerics::{herm_eigvals, CMat, NeumaierSum, NumericsError, RngStream};
use crate::subsets::{
    exact_expectation, subframe, subset_gram_from_full, SelectionModel, SubsetError,
};

/// Eigenvalues this far below zero are eigensolver roundoff and clip to 0;
/// anything lower is rejected as a genuinely indefinite input.
pub const CLIP_TOL: f64 = 1e-9;

/// Eigenvalues at or below `SINGULAR_TOL · λmax` count as zero whenever a
/// functional has to invert or take logs of the spectrum.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum SpectraError {
    #[error("selection mask is empty")]
    EmptyMask,
    #[error("the Shannon functional needs k >= m, got k={k} < m={m}")]
    ShannonNeedsWide { k: usize, m: usize },
    #[error("invalid spectra input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Subsets(#[from] SubsetError),
}

/// Which matrix a spectrum was read from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    Gram,
    Hessian,
}

/// Side selection for [`esd_of`]; `Auto` picks the smaller matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Gram,
    Hessian,
    Auto,
}

/// Empirical spectral distribution: ascending eigenvalues plus their origin.
#[derive(Clone, Debug, Serialize)]
pub struct Esd {
    eigenvalues: Vec<f64>,
    ambient: Ambient,
}

impl Esd {
    /// Wrap raw eigenvalues: sort ascending and clip [-`CLIP_TOL`, 0) to
    /// zero. Non-finite entries and anything below the clip window are
    /// rejected rather than repaired.
    pub fn new(mut eigenvalues: Vec<f64>, ambient: Ambient) -> Result<Self, SpectraError> {
        if eigenvalues.is_empty() {
            return Err(SpectraError::Invalid("empty spectrum".into()));
        }
        for v in &mut eigenvalues {
            if !v.is_finite() || *v < -CLIP_TOL {
                return Err(SpectraError::Invalid(format!(
                    "eigenvalue {v} outside the admissible range"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Esd {
            eigenvalues,
            ambient,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Empirical CDF: the fraction of eigenvalues ≤ x.
    pub fn cdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    fn count_le(&self, x: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v <= x)
    }

    fn count_lt(&self, x: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v < x)
    }

    /// CSV serialization, one eigenvalue per line.
    pub fn to_csv(&self) -> String {
        use fmt::Write;
        let mut out = String::from("eigenvalue\n");
        for v in &self.eigenvalues {
            writeln!(out, "{v}").unwrap();
        }
        out
    }
}

/// Eigenvalues of the selected sub-frame on the requested side.
pub fn esd_of(frame: &Frame, mask: &[usize], side: Side) -> Result<Esd, SpectraError> {
    if mask.is_empty() {
        return Err(SpectraError::EmptyMask);
    }
    let ambient = match side {
        Side::Gram => Ambient::Gram,
        Side::Hessian => Ambient::Hessian,
        Side::Auto => {
            if mask.len() <= frame.m() {
                Ambient::Gram
            } else {
                Ambient::Hessian
            }
        }
    };
    let sub = subframe(frame, mask);
    let mat = match ambient {
        Ambient::Gram => sub.gram(),
        Ambient::Hessian => sub.outer_gram(),
    };
    Esd::new(herm_eigvals(&mat)?, ambient)
}

/// (1/normalizer)·Σ λᵢ^r. The normalizer is a plain count, so callers divide
/// by the frame size n, the subset size k, or the dimension m as the
/// statistic at hand demands.
pub fn moment_of(e: &Esd, r: usize, normalizer: usize) -> f64 {
    assert!(
        r >= 1 && normalizer >= 1,
        "moment order and normalizer must be positive"
    );
    let mut acc = NeumaierSum::new();
    for &v in e.eigenvalues() {
        acc.add(v.powi(r as i32));
    }
    acc.total() / normalizer as f64
}

/// First six moments and the shape statistics built from them.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralSummary {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m6: f64,
    /// Empirical spectral variance m₂ − m₁².
    pub esv: f64,
    /// Empirical spectral kurtosis; `None` when the spectrum is too
    /// concentrated to resolve it (esv ≤ 1e-12).
    pub esk: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

pub fn summary(e: &Esd, normalizer: usize) -> SpectralSummary {
    let m: Vec<f64> = (1..=6).map(|r| moment_of(e, r, normalizer)).collect();
    let (m1, m2, m3, m4) = (m[0], m[1], m[2], m[3]);
    let esv = m2 - m1 * m1;
    let esk = if esv > 1e-12 {
        Some((m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1.powi(4)) / (esv * esv))
    } else {
        None
    };
    SpectralSummary {
        m1,
        m2,
        m3,
        m4,
        m5: m[4],
        m6: m[5],
        esv,
        esk,
        lambda_min: e.lambda_min(),
        lambda_max: e.lambda_max(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Mse,
    Shannon,
    Rip,
    Cond,
    StripIndicator,
}

impl FunctionalKind {
    pub fn label(self) -> &'static str {
        match self {
            FunctionalKind::Mse => "mse",
            FunctionalKind::Shannon => "shannon",
            FunctionalKind::Rip => "rip",
            FunctionalKind::Cond => "cond",
            FunctionalKind::StripIndicator => "strip_indicator",
        }
    }
}

impl fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A scalar figure of merit of one sub-frame spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    /// Arithmetic-to-harmonic means ratio of the spectrum: the noise
    /// amplification of least-squares recovery. Read off the Gram when
    /// k ≤ m and off the Hessian when k > m. The log base only matters when
    /// subset averaging takes logs.
    Mse { log_base: f64 },
    /// log(geometric mean / arithmetic mean) of the m eigenvalues of
    /// β⁻¹·F_S F_S†, β = k/m; needs k ≥ m.
    Shannon { log_base: f64 },
    /// max(λmax − 1, 1 − λmin) on the Gram: the restricted-isometry
    /// deviation.
    Rip,
    /// λmax/λmin on the Gram.
    Cond,
    /// 1{Ψ_RIP ≤ δ}, the "good subset" indicator.
    Strip { delta: f64 },
}

impl Functional {
    /// MSE amplification with natural-log averaging.
    pub fn mse() -> Self {
        Functional::Mse { log_base: E }
    }

    /// Shannon means ratio in nats.
    pub fn shannon() -> Self {
        Functional::Shannon { log_base: E }
    }

    pub fn kind(&self) -> FunctionalKind {
        match self {
            Functional::Mse { .. } => FunctionalKind::Mse,
            Functional::Shannon { .. } => FunctionalKind::Shannon,
            Functional::Rip => FunctionalKind::Rip,
            Functional::Cond => FunctionalKind::Cond,
            Functional::Strip { .. } => FunctionalKind::StripIndicator,
        }
    }

    fn log_base(&self) -> Option<f64> {
        match self {
            Functional::Mse { log_base } | Functional::Shannon { log_base } => Some(*log_base),
            _ => None,
        }
    }

    fn delta(&self) -> Option<f64> {
        match self {
            Functional::Strip { delta } => Some(*delta),
            _ => None,
        }
    }

    /// Which matrix the functional reads for a subset of size k.
    fn side(&self, k: usize, m: usize) -> Ambient {
        match self {
            Functional::Mse { .. } if k > m => Ambient::Hessian,
            Functional::Shannon { .. } => Ambient::Hessian,
            _ => Ambient::Gram,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FunctionalResult {
    pub kind: FunctionalKind,
    /// ±∞ when `infinite` is set; JSON renders non-finite floats as null,
    /// so the flag is the portable signal.
    pub value: f64,
    pub infinite: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Evaluate a performance functional on one explicit subset.
pub fn functional(
    frame: &Frame,
    mask: &[usize],
    f: Functional,
) -> Result<FunctionalResult, SpectraError> {
    if mask.is_empty() {
        return Err(SpectraError::EmptyMask);
    }
    if matches!(f, Functional::Shannon { .. }) && mask.len() < frame.m() {
        return Err(SpectraError::ShannonNeedsWide {
            k: mask.len(),
            m: frame.m(),
        });
    }
    let side = match f.side(mask.len(), frame.m()) {
        Ambient::Gram => Side::Gram,
        Ambient::Hessian => Side::Hessian,
    };
    let e = esd_of(frame, mask, side)?;
    let (value, infinite) = psi(&f, e.eigenvalues(), mask.len(), frame.m());
    Ok(FunctionalResult {
        kind: f.kind(),
        value,
        infinite,
        log_base: f.log_base(),
        delta: f.delta(),
    })
}

/// Snap a value a hair under `floor` (pure roundoff) back onto it.
fn snap_min(v: f64, floor: f64) -> f64 {
    if v < floor && v > floor - 1e-12 {
        floor
    } else {
        v
    }
}

/// Snap a value a hair over `ceil` back onto it.
fn snap_max(v: f64, ceil: f64) -> f64 {
    if v > ceil && v < ceil + 1e-12 {
        ceil
    } else {
        v
    }
}

/// Evaluate a functional on an already-computed spectrum; returns the value
/// and the infinite flag. `k` is the subset size, `m` the frame dimension.
fn psi(f: &Functional, eigs: &[f64], k: usize, m: usize) -> (f64, bool) {
    let count = eigs.len() as f64;
    let lo = eigs[0];
    let hi = *eigs.last().unwrap();
    let cut = SINGULAR_TOL * hi.max(0.0);
    match *f {
        Functional::Mse { .. } => {
            if lo <= cut {
                return (f64::INFINITY, true);
            }
            let mut sum = NeumaierSum::new();
            let mut inv = NeumaierSum::new();
            for &v in eigs {
                sum.add(v);
                inv.add(1.0 / v);
            }
            let v = (sum.total() / count) * (inv.total() / count);
            (snap_min(v, 1.0), false)
        }
        Functional::Shannon { log_base } => {
            if lo <= cut {
                return (f64::NEG_INFINITY, true);
            }
            let beta = k as f64 / m as f64;
            let mut lns = NeumaierSum::new();
            let mut sum = NeumaierSum::new();
            for &v in eigs {
                lns.add((v / beta).ln());
                sum.add(v / beta);
            }
            let v = (lns.total() / count - (sum.total() / count).ln()) / log_base.ln();
            (snap_max(v, 0.0), false)
        }
        Functional::Rip => ((hi - 1.0).max(1.0 - lo), false),
        Functional::Cond => {
            if lo <= cut {
                (f64::INFINITY, true)
            } else {
                (hi / lo, false)
            }
        }
        Functional::Strip { delta } => {
            let rip = (hi - 1.0).max(1.0 - lo);
            (f64::from(u8::from(rip <= delta)), false)
        }
    }
}

/// How a subset average is computed.
#[derive(Clone, Copy, Debug)]
pub enum AverageMode {
    /// Exhaustive enumeration, subject to the enumeration caps of
    /// [`exact_expectation`].
    Exact,
    /// Independent draws, each on its own derived stream.
    MonteCarlo { trials: usize, master_seed: u64 },
}

/// A subset-averaged goodness measure with its sampling metadata.
#[derive(Clone, Debug, Serialize)]
pub struct SubsetAverage {
    pub kind: FunctionalKind,
    pub model: String,
    /// Mean over the subsets where the functional is finite.
    pub mean: f64,
    /// 1.96·stderr, for Monte-Carlo runs with at least two finite samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Probability mass (exact mode) or fraction of draws (Monte-Carlo) on
    /// which the functional is infinite.
    pub infinite_fraction: f64,
    pub samples: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// The scalar that [`subset_average`] averages: log Ψ for MSE (in the
/// functional's base), Ψ itself for Shannon/RIP/cond, the indicator for
/// strip. Infinite subsets are flagged, not averaged.
///
/// Random Bernoulli draws can be smaller than the functional wants: a draw
/// with k < m counts as −∞ for Shannon, and the empty draw is vacuously
/// orthonormal (Ψ_MSE = 1, Ψ_RIP = 0, Ψ_cond = 1).
fn averaged_stat(frame: &Frame, full_gram: &CMat, cols: &[usize], f: &Functional) -> (f64, bool) {
    let m = frame.m();
    let k = cols.len();
    if k == 0 {
        return match f {
            Functional::Mse { .. } | Functional::Rip => (0.0, false),
            Functional::Cond => (1.0, false),
            Functional::Strip { delta } => (f64::from(u8::from(0.0 <= *delta)), false),
            Functional::Shannon { .. } => (f64::NEG_INFINITY, true),
        };
    }
    if matches!(f, Functional::Shannon { .. }) && k < m {
        return (f64::NEG_INFINITY, true);
    }
    let mat = match f.side(k, m) {
        Ambient::Gram => subset_gram_from_full(full_gram, cols),
        Ambient::Hessian => subframe(frame, cols).outer_gram(),
    };
    let eigs = herm_eigvals(&mat).expect("eigenvalue solve inside subset average");
    let (v, infinite) = psi(f, &eigs, k, m);
    if infinite {
        return (v, true);
    }
    match f {
        Functional::Mse { log_base } => (v.ln() / log_base.ln(), false),
        _ => (v, false),
    }
}

/// Average a functional over the selection model, exactly or by Monte Carlo.
///
/// MSE averages log Ψ (the L_MSE figure), Shannon and RIP/cond average Ψ
/// itself, strip averages the good-subset indicator. Subsets on which the
/// functional is infinite are excluded from the mean and reported through
/// `infinite_fraction`.
pub fn subset_average(
    frame: &Frame,
    model: SelectionModel,
    f: Functional,
    mode: AverageMode,
) -> Result<SubsetAverage, SpectraError> {
    model.validate(frame.n())?;
    let full_gram = frame.matrix().gram();
    match mode {
        AverageMode::Exact => {
            let mut samples = 0u64;
            let raw = exact_expectation(&model, frame.n(), |cols| {
                samples += 1;
                let (g, infinite) = averaged_stat(frame, &full_gram, cols, &f);
                if infinite {
                    vec![0.0, 1.0]
                } else {
                    vec![g, 0.0]
                }
            })?;
            let infinite_fraction = raw[1].clamp(0.0, 1.0);
            let mean = if infinite_fraction < 1.0 - 1e-15 {
                raw[0] / (1.0 - infinite_fraction)
            } else {
                f64::NAN
            };
            Ok(SubsetAverage {
                kind: f.kind(),
                model: model.label(),
                mean,
                half_width: None,
                infinite_fraction,
                samples,
                log_base: f.log_base(),
                delta: f.delta(),
            })
        }
        AverageMode::MonteCarlo {
            trials,
            master_seed,
        } => {
            if trials < 2 {
                return Err(SpectraError::Invalid(format!(
                    "Monte-Carlo averaging needs at least two trials, got {trials}"
                )));
            }
            let mut sum = NeumaierSum::new();
            let mut sumsq = NeumaierSum::new();
            let mut finite = 0u64;
            let mut infinite = 0u64;
            for trial in 0..trials {
                let mut rng = RngStream::for_trial(master_seed, trial as u64);
                let cols = model.draw(frame.n(), &mut rng);
                let (g, inf) = averaged_stat(frame, &full_gram, &cols, &f);
                if inf {
                    infinite += 1;
                } else {
                    finite += 1;
                    sum.add(g);
                    sumsq.add(g * g);
                }
            }
            let mean = if finite > 0 {
                sum.total() / finite as f64
            } else {
                f64::NAN
            };
            let half_width = if finite >= 2 {
                let nf = finite as f64;
                let var = ((sumsq.total() - nf * mean * mean) / (nf - 1.0)).max(0.0);
                Some(1.96 * (var / nf).sqrt())
            } else {
                None
            };
            Ok(SubsetAverage {
                kind: f.kind(),
                model: model.label(),
                mean,
                half_width,
                infinite_fraction: infinite as f64 / trials as f64,
                samples: trials as u64,
                log_base: f.log_base(),
                delta: f.delta(),
            })
        }
    }
}

/// The law's point masses as (location, mass) pairs.
fn law_atoms(law: &LimitLaw) -> Vec<(f64, f64)> {
    let mut atoms = vec![(0.0, law.zero_atom_mass())];
    if let Some(a) = law.atom() {
        atoms.push(a);
    }
    atoms.retain(|&(_, mass)| mass > 0.0);
    atoms
}

/// Left limit of the law's CDF: the CDF minus any point mass sitting
/// exactly at x.
fn law_cdf_left(law: &LimitLaw, atoms: &[(f64, f64)], x: f64) -> f64 {
    let mut c = law.cdf(x);
    for &(loc, mass) in atoms {
        if x == loc {
            c -= mass;
        }
    }
    c.max(0.0)
}

/// KS distance between an empirical distribution and a limit law: the sup of
/// |F̂ − C| over both sides of every empirical jump, plus both sides of the
/// law's point masses.
pub fn ks_distance(e: &Esd, law: &LimitLaw) -> f64 {
    let count = e.len() as f64;
    let atoms = law_atoms(law);
    let mut sup = 0.0f64;
    for (i, &x) in e.eigenvalues().iter().enumerate() {
        // Just below x the empirical CDF is still i/count, and the law is at
        // its own left limit there; at x both sit at their right values.
        sup = sup
            .max((i as f64 + 1.0) / count - law.cdf(x))
            .max(law_cdf_left(law, &atoms, x) - i as f64 / count);
    }
    for &(loc, mass) in &atoms {
        let c_right = law.cdf(loc);
        let c_left = c_right - mass;
        let e_right = e.count_le(loc) as f64 / count;
        let e_left = e.count_lt(loc) as f64 / count;
        sup = sup.max((e_right - c_right).abs()).max((e_left - c_left).abs());
    }
    sup
}

/// KS distance between two empirical distributions: the sup over the union
/// of jump points, evaluated from both sides of each jump.
pub fn ks_distance_between(a: &Esd, b: &Esd) -> f64 {
    let (va, vb) = (a.eigenvalues(), b.eigenvalues());
    let (ka, kb) = (va.len() as f64, vb.len() as f64);
    let mut sup = 0.0f64;
    let (mut ia, mut ib) = (0usize, 0usize);
    while ia < va.len() || ib < vb.len() {
        let x = match (va.get(ia), vb.get(ib)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        // Everything consumed so far is strictly below x: the left limit.
        sup = sup.max((ia as f64 / ka - ib as f64 / kb).abs());
        while ia < va.len() && va[ia] == x {
            ia += 1;
        }
        while ib < vb.len() && vb[ib] == x {
            ib += 1;
        }
        sup = sup.max((ia as f64 / ka - ib as f64 / kb).abs());
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build, FamilyParams, Frame};
    use crate::limits::sample_manova_ensemble;
    use crate::numerics::CMat;
    use approx::assert_abs_diff_eq;

    fn gaussian(m: usize, n: usize, seed: u64) -> Frame {
        build(&FamilyParams::IidGaussian { m, n, seed }).unwrap()
    }

    fn esd(vals: &[f64]) -> Esd {
        Esd::new(vals.to_vec(), Ambient::Gram).unwrap()
    }

    /// Two unit columns in R² with inner product 1/2.
    fn correlated_pair() -> Frame {
        let mat = CMat::from_real_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (0, 1) => 0.5,
            (1, 1) => 0.75f64.sqrt(),
            _ => 0.0,
        });
        Frame::new(
            mat,
            FamilyParams::Custom {
                label: "pair".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn esd_construction_clips_and_sorts() {
        let e = Esd::new(vec![2.0, -5e-10, 1.0], Ambient::Hessian).unwrap();
        assert_eq!(e.eigenvalues(), &[0.0, 1.0, 2.0]);
        assert_eq!(e.ambient(), Ambient::Hessian);
        assert_eq!(e.len(), 3);
        assert!(!e.is_empty());
        assert!(Esd::new(vec![], Ambient::Gram).is_err());
        assert!(Esd::new(vec![-1e-8], Ambient::Gram).is_err());
        assert!(Esd::new(vec![f64::NAN], Ambient::Gram).is_err());
        assert_eq!(e.to_csv(), "eigenvalue\n0\n1\n2\n");
    }

    #[test]
    fn orthonormal_subset_spectra_are_flat() {
        // The spike half of spikes+Fourier is an orthonormal set.
        let f = build(&FamilyParams::SpikesFourier { m: 4 }).unwrap();
        let e = esd_of(&f, &[0, 1, 2, 3], Side::Auto).unwrap();
        assert_eq!(e.ambient(), Ambient::Gram);
        for &v in e.eigenvalues() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        let mse = functional(&f, &[0, 1, 2, 3], Functional::mse()).unwrap();
        let sh = functional(&f, &[0, 1, 2, 3], Functional::shannon()).unwrap();
        let rip = functional(&f, &[0, 1, 2, 3], Functional::Rip).unwrap();
        let cond = functional(&f, &[0, 1, 2, 3], Functional::Cond).unwrap();
        assert_abs_diff_eq!(mse.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sh.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rip.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cond.value, 1.0, epsilon = 1e-12);
        assert_eq!(sh.log_base, Some(std::f64::consts::E));
    }

    #[test]
    fn uniform_grid_lpf_subset_is_unitary() {
        // Stride n/k with k = m turns the sub-frame into a square DFT.
        let f = build(&FamilyParams::Lpf { m: 4, n: 12 }).unwrap();
        let e = esd_of(&f, &[0, 3, 6, 9], Side::Gram).unwrap();
        for &v in e.eigenvalues() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn full_tight_frame_hessian_is_scaled_identity() {
        let f = build(&FamilyParams::PaleyReal { q: 5 }).unwrap();
        let e = esd_of(&f, &[0, 1, 2, 3, 4, 5], Side::Auto).unwrap();
        assert_eq!(e.ambient(), Ambient::Hessian);
        assert_eq!(e.len(), 3);
        for &v in e.eigenvalues() {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn esd_of_rejects_empty_mask() {
        let f = gaussian(3, 6, 1);
        assert!(matches!(
            esd_of(&f, &[], Side::Auto),
            Err(SpectraError::EmptyMask)
        ));
    }

    #[test]
    fn moment_of_pinned_values() {
        assert_abs_diff_eq!(moment_of(&esd(&[1.0, 1.0, 1.0]), 2, 3), 1.0);
        assert_abs_diff_eq!(
            moment_of(&esd(&[0.0, 0.0, 0.0, 2.0, 2.0, 2.0]), 3, 6),
            4.0
        );
        assert_abs_diff_eq!(moment_of(&esd(&[0.5, 1.5]), 1, 2), 1.0);
        // Normalizing by the frame size instead of the subset size.
        assert_abs_diff_eq!(moment_of(&esd(&[0.5, 1.5]), 1, 4), 0.5);
    }

    #[test]
    fn summary_pinned_values() {
        let s = summary(&esd(&[0.0, 2.0]), 2);
        assert_abs_diff_eq!(s.m1, 1.0);
        assert_abs_diff_eq!(s.m2, 2.0);
        assert_abs_diff_eq!(s.esv, 1.0);
        // m3 = 4, m4 = 8: kurtosis (8 - 16 + 12 - 3)/1 = 1.
        assert_abs_diff_eq!(s.esk.unwrap(), 1.0);
        assert_eq!((s.lambda_min, s.lambda_max), (0.0, 2.0));

        let flat = summary(&esd(&[1.0, 1.0, 1.0]), 3);
        assert!(flat.esv.abs() <= 1e-12);
        assert!(flat.esk.is_none());
        let json = serde_json::to_string(&flat).unwrap();
        assert!(json.contains("\"esk\":null"));
    }

    #[test]
    fn correlated_pair_functionals() {
        // Gram eigenvalues (1/2, 3/2).
        let f = correlated_pair();
        let mse = functional(&f, &[0, 1], Functional::mse()).unwrap();
        let rip = functional(&f, &[0, 1], Functional::Rip).unwrap();
        let cond = functional(&f, &[0, 1], Functional::Cond).unwrap();
        assert_abs_diff_eq!(mse.value, 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rip.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cond.value, 3.0, epsilon = 1e-12);
        assert!(!mse.infinite && !rip.infinite && !cond.infinite);

        // k = m = 2, so Shannon is admissible here; k = 1 is not.
        let sh = functional(&f, &[0, 1], Functional::shannon()).unwrap();
        assert!(sh.value < 0.0 && sh.value.is_finite());
        assert!(matches!(
            functional(&f, &[0], Functional::shannon()),
            Err(SpectraError::ShannonNeedsWide { k: 1, m: 2 })
        ));
        assert!(matches!(
            functional(&f, &[], Functional::Rip),
            Err(SpectraError::EmptyMask)
        ));
    }

    #[test]
    fn singular_subsets_flag_infinite() {
        // [I I]: columns 0 and 2 coincide, so that pair's Gram is singular.
        let f = build(&FamilyParams::UnionBases { m: 2, copies: 2 }).unwrap();
        let mse = functional(&f, &[0, 2], Functional::mse()).unwrap();
        let cond = functional(&f, &[0, 2], Functional::Cond).unwrap();
        assert!(mse.infinite && mse.value.is_infinite());
        assert!(cond.infinite);
        // Eigenvalues (0, 2): the deviation from isometry is exactly 1.
        let rip = functional(&f, &[0, 2], Functional::Rip).unwrap();
        assert_abs_diff_eq!(rip.value, 1.0, epsilon = 1e-12);
        let strip = functional(&f, &[0, 2], Functional::Strip { delta: 0.5 }).unwrap();
        assert_eq!(strip.value, 0.0);
        let good = functional(&f, &[0, 1], Functional::Strip { delta: 0.5 }).unwrap();
        assert_eq!(good.value, 1.0);
        assert_eq!(good.delta, Some(0.5));
    }

    #[test]
    fn psi_inequalities_on_random_subsets() {
        let mut rng = RngStream::new(0x9e1f, 0);
        for trial in 0..40 {
            let m = 2 + (trial % 4);
            let n = m + 1 + (trial % 5);
            let f = gaussian(m, n, 100 + trial as u64);
            let k = 1 + rng.index(n);
            let cols = rng.sorted_subset(n, k);
            let mse = functional(&f, &cols, Functional::mse()).unwrap();
            if !mse.infinite {
                assert!(mse.value >= 1.0, "mse {} below 1", mse.value);
            }
            let rip = functional(&f, &cols, Functional::Rip).unwrap();
            assert!(rip.value >= 0.0);
            let cond = functional(&f, &cols, Functional::Cond).unwrap();
            if !cond.infinite {
                assert!(cond.value >= 1.0);
            }
            if k >= m {
                let sh = functional(&f, &cols, Functional::shannon()).unwrap();
                if !sh.infinite {
                    assert!(sh.value <= 0.0, "shannon {} above 0", sh.value);
                }
            }
        }
    }

    #[test]
    fn bernoulli_mask_moments_match_matrix_powers() {
        // (1/n)·tr((F P F†)^r) against the Hessian-side ESD moments.
        let f = gaussian(4, 10, 7);
        let mut rng = RngStream::new(0xabc, 0);
        let model = SelectionModel::Bern { p: 0.5 };
        let mask = model.draw(f.n(), &mut rng);
        assert!(!mask.is_empty());
        let e = esd_of(&f, &mask, Side::Hessian).unwrap();
        let h = subframe(&f, &mask).outer_gram();
        let mut power = CMat::identity(f.m());
        for r in 1..=4 {
            power = power.mul(&h);
            let direct = power.trace().re / f.n() as f64;
            assert_abs_diff_eq!(moment_of(&e, r, f.n()), direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn singleton_and_full_averages_are_pinned() {
        let f = gaussian(3, 6, 11);
        // Singleton Grams are [1], so L_MSE(F, 1) = 0 for any unit-norm frame.
        let l1 = subset_average(
            &f,
            SelectionModel::Comb { k: 1 },
            Functional::mse(),
            AverageMode::Exact,
        )
        .unwrap();
        assert_abs_diff_eq!(l1.mean, 0.0, epsilon = 1e-12);
        assert_eq!(l1.samples, 6);
        assert_eq!(l1.infinite_fraction, 0.0);

        // The full subset of a tight frame has Hessian (n/m)I, so the
        // Shannon means ratio vanishes.
        for params in [
            FamilyParams::SpikesFourier { m: 3 },
            FamilyParams::RandDft { m: 3, n: 7, seed: 1 },
            FamilyParams::UnionBases { m: 3, copies: 2 },
        ] {
            let tight = build(&params).unwrap();
            let ln = subset_average(
                &tight,
                SelectionModel::Comb { k: tight.n() },
                Functional::shannon(),
                AverageMode::Exact,
            )
            .unwrap();
            assert_abs_diff_eq!(ln.mean, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_subset_average_meets_the_equiangular_bound() {
        // L_MSE(F, 2) >= log((n-1)m / ((m-1)n)), met exactly by an ETF.
        let bound = |f: &Frame| {
            let (m, n) = (f.m() as f64, f.n() as f64);
            ((n - 1.0) * m / ((m - 1.0) * n)).ln()
        };
        for (frame, exact) in [
            (build(&FamilyParams::PaleyReal { q: 5 }).unwrap(), true),
            (build(&FamilyParams::Lpf { m: 3, n: 7 }).unwrap(), false),
            (gaussian(3, 6, 2), false),
            (gaussian(4, 9, 3), false),
            (build(&FamilyParams::SpikesFourier { m: 3 }).unwrap(), false),
        ] {
            let l2 = subset_average(
                &frame,
                SelectionModel::Comb { k: 2 },
                Functional::mse(),
                AverageMode::Exact,
            )
            .unwrap();
            assert_eq!(l2.infinite_fraction, 0.0);
            assert!(
                l2.mean >= bound(&frame) - 1e-9,
                "L_MSE(F,2) = {} under bound {}",
                l2.mean,
                bound(&frame)
            );
            if exact {
                assert_abs_diff_eq!(l2.mean, bound(&frame), epsilon = 1e-9);
            } else {
                assert!(l2.mean > bound(&frame) + 1e-6);
            }
        }
    }

    #[test]
    fn strip_average_is_one_on_orthonormal_selections() {
        // An identity frame: every subset, including the empty one, is
        // orthonormal.
        let f = build(&FamilyParams::UnionBases { m: 3, copies: 1 }).unwrap();
        let avg = subset_average(
            &f,
            SelectionModel::Bern { p: 0.5 },
            Functional::Strip { delta: 1.0 },
            AverageMode::Exact,
        )
        .unwrap();
        assert_abs_diff_eq!(avg.mean, 1.0, epsilon = 1e-12);
        assert_eq!(avg.infinite_fraction, 0.0);
        assert_eq!(avg.samples, 8);
    }

    #[test]
    fn bernoulli_shannon_average_splits_finite_and_infinite() {
        // [I I] over R², Bern(1/2): 16 equally likely masks. Draws with
        // k < 2 (5 masks) and the two duplicate pairs are -∞; the four
        // orthonormal pairs and the full set give 0; the four triples give
        // ln(8/9)/2 each.
        let f = build(&FamilyParams::UnionBases { m: 2, copies: 2 }).unwrap();
        let avg = subset_average(
            &f,
            SelectionModel::Bern { p: 0.5 },
            Functional::shannon(),
            AverageMode::Exact,
        )
        .unwrap();
        assert_abs_diff_eq!(avg.infinite_fraction, 7.0 / 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(avg.mean, 2.0 * (8.0f64 / 9.0).ln() / 9.0, epsilon = 1e-12);
        assert_eq!(avg.samples, 16);
    }

    #[test]
    fn monte_carlo_average_brackets_the_exact_value() {
        let f = gaussian(3, 8, 3);
        let model = SelectionModel::Bern { p: 0.4 };
        let exact = subset_average(&f, model, Functional::mse(), AverageMode::Exact).unwrap();
        let mc = subset_average(
            &f,
            model,
            Functional::mse(),
            AverageMode::MonteCarlo {
                trials: 4000,
                master_seed: 11,
            },
        )
        .unwrap();
        let half = mc.half_width.unwrap();
        assert!(
            (mc.mean - exact.mean).abs() <= 2.0 * half,
            "MC mean {} vs exact {} (half-width {})",
            mc.mean,
            exact.mean,
            half
        );
        assert!((mc.infinite_fraction - exact.infinite_fraction).abs() <= 0.05);
        assert!(matches!(
            subset_average(
                &f,
                model,
                Functional::mse(),
                AverageMode::MonteCarlo {
                    trials: 1,
                    master_seed: 0
                }
            ),
            Err(SpectraError::Invalid(_))
        ));
    }

    #[test]
    fn ks_between_esds_pinned_and_metric() {
        let a = esd(&[0.0, 2.0]);
        let b = esd(&[0.0, 1.0, 2.0]);
        assert_abs_diff_eq!(ks_distance_between(&a, &b), 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(ks_distance_between(&a, &a), 0.0);

        let mut rng = RngStream::new(0x77, 0);
        for _ in 0..50 {
            let draw = |rng: &mut RngStream| {
                let len = 1 + rng.index(30);
                let vals: Vec<f64> = (0..len).map(|_| 4.0 * rng.uniform()).collect();
                Esd::new(vals, Ambient::Gram).unwrap()
            };
            let (x, y, z) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let (dxy, dyx) = (ks_distance_between(&x, &y), ks_distance_between(&y, &x));
            assert_abs_diff_eq!(dxy, dyx, epsilon = 1e-15);
            let (dxz, dyz) = (ks_distance_between(&x, &z), ks_distance_between(&y, &z));
            assert!(dxz <= dxy + dyz + 1e-12, "triangle inequality violated");
        }
    }

    #[test]
    fn ks_against_atomic_law_is_pinned() {
        // γ = 1/2, β = 2 has p = 1: the law is (1/2)δ₀ + (1/2)δ₂ exactly.
        let law = LimitLaw::manova(0.5, 2.0).unwrap();
        assert_abs_diff_eq!(ks_distance(&esd(&[0.0, 2.0]), &law), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            ks_distance(&esd(&[0.0, 1.0, 2.0]), &law),
            1.0 / 6.0,
            epsilon = 1e-12
        );
        // Missing the zero atom entirely costs its full mass.
        assert_abs_diff_eq!(ks_distance(&esd(&[2.0, 2.0]), &law), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn manova_ensemble_esd_approaches_the_law() {
        // k = 400 at γ = 1/2, β = 4/5; Δ_KS should already be around 1e-2.
        let law = LimitLaw::manova(0.5, 0.8).unwrap();
        for seed in [0x51ab, 0x71ef] {
            let mut rng = RngStream::new(seed, 0);
            let vals = sample_manova_ensemble(400, 500, 1000, &mut rng).unwrap();
            let e = Esd::new(vals, Ambient::Gram).unwrap();
            let d = ks_distance(&e, &law);
            assert!(d < 0.1, "KS distance {d} too large for seed {seed}");
        }
    }

    #[test]
    fn functional_results_serialize_cleanly() {
        let f = correlated_pair();
        let res = functional(&f, &[0, 1], Functional::Strip { delta: 0.25 }).unwrap();
        let json = serde_json::to_string(&res).unwrap();
        assert!(json.contains("\"kind\":\"strip_indicator\""));
        assert!(json.contains("\"delta\":0.25"));
        assert!(!json.contains("log_base"));
    }
}
