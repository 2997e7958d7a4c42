//! Application-level figures of merit: the analog source codec built on
//! least-squares encoding, multiple-access capacity averages, and the
//! space-time determinant bound.
//!
//! Everything here reduces to a function of the sub-frame spectrum. The
//! ECDQ rate is a log of the MSE amplification, the NOMA capacity is a
//! log-determinant, and the space-time bound is a reciprocal determinant;
//! the subset-averaging plumbing mirrors `spectra::subset_average`, with
//! infinite subsets flagged and counted rather than folded into means.
//! All rates and capacities are in bits.

use num_complex::Complex64;
use serde::Serialize;

use crate::frames::Frame;
use crate::numerics::{cholesky, chol_solve, herm_eigvals, CMat, NeumaierSum, RngStream};
use crate::spectra::{AverageMode, SINGULAR_TOL};
use crate::subsets::{
    exact_expectation, subframe, subset_gram_from_full, SelectionModel, SubsetError,
};

#[derive(Debug, thiserror::Error)]
pub enum CodingError {
    #[error("invalid coding configuration: {0}")]
    Invalid(String),
    #[error("subset Gram is singular")]
    SingularGram,
    #[error("least-squares encoding needs k <= m, got k={k} > m={m}")]
    TooManyColumns { k: usize, m: usize },
    #[error("the determinant bound needs k >= m, got k={k} < m={m}")]
    TooFewColumns { k: usize, m: usize },
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error(transparent)]
    Subsets(#[from] SubsetError),
}

/// Encoder-side estimator; only least squares is implemented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ls,
}

/// Operating point of the analog rate-distortion codec.
///
/// `beta` and `p` are the nominal aspect ratios k/m and k/n of the design
/// point. The per-subset rate always uses the realized ratios of the subset
/// at hand; the nominal values are cross-checked against the mask or the
/// selection model so a config cannot silently disagree with the draw.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RdfConfig {
    /// Source variance σx².
    pub sigma_x2: f64,
    /// Target distortion D, same units as the variance.
    pub distortion: f64,
    pub beta: f64,
    pub p: f64,
    pub estimator: Estimator,
}

impl RdfConfig {
    pub fn new(sigma_x2: f64, distortion: f64, beta: f64, p: f64) -> Result<Self, CodingError> {
        if !(sigma_x2 > 0.0) || !sigma_x2.is_finite() || !(distortion > 0.0) || !distortion.is_finite()
        {
            return Err(CodingError::Invalid(format!(
                "variance and distortion must be positive, got sigma_x2={sigma_x2}, D={distortion}"
            )));
        }
        if !(p > 0.0) || !(beta > 0.0) || !beta.is_finite() || p > beta + 1e-12 {
            return Err(CodingError::Invalid(format!(
                "aspect ratios must satisfy 0 < p <= beta, got p={p}, beta={beta}"
            )));
        }
        Ok(RdfConfig {
            sigma_x2,
            distortion,
            beta,
            p,
            estimator: Estimator::Ls,
        })
    }

    /// Design point for drawing k of the frame's n columns.
    pub fn for_subset_size(
        sigma_x2: f64,
        distortion: f64,
        frame: &Frame,
        k: usize,
    ) -> Result<Self, CodingError> {
        Self::new(
            sigma_x2,
            distortion,
            k as f64 / frame.m() as f64,
            k as f64 / frame.n() as f64,
        )
    }

    /// Signal-to-distortion ratio σx²/D.
    pub fn sdr(&self) -> f64 {
        self.sigma_x2 / self.distortion
    }

    fn check_against(&self, beta: f64, p: f64) -> Result<(), CodingError> {
        if (self.beta - beta).abs() > 1e-9 || (self.p - p).abs() > 1e-9 {
            return Err(CodingError::Invalid(format!(
                "config aspect ratios (beta={}, p={}) disagree with the selection (beta={beta}, p={p})",
                self.beta, self.p
            )));
        }
        Ok(())
    }
}

/// A rate or capacity value with its infinity flag; the flag is the portable
/// signal since JSON renders non-finite floats as null.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateValue {
    pub value: f64,
    pub infinite: bool,
}

/// Least-squares encoding: the minimum-norm frequency vector x̃ with
/// F_S† x̃ = x_s, namely x̃ = F_S (F_S†F_S)⁻¹ x_s.
///
/// The interpolation residual is verified to 1e-9·‖x_s‖ before returning;
/// a sub-frame too ill-conditioned to meet that is reported as an error.
pub fn ls_encode(
    frame: &Frame,
    mask: &[usize],
    x_s: &[Complex64],
) -> Result<Vec<Complex64>, CodingError> {
    let (k, m) = (mask.len(), frame.m());
    assert_eq!(k, x_s.len(), "sample vector length must match the mask");
    if k > m {
        return Err(CodingError::TooManyColumns { k, m });
    }
    if k == 0 {
        return Ok(vec![Complex64::ZERO; m]);
    }
    let sub = subframe(frame, mask);
    let gram = sub.gram();
    let eigs = herm_eigvals(&gram)?;
    if eigs[0] <= SINGULAR_TOL * eigs.last().unwrap().max(0.0) {
        return Err(CodingError::SingularGram);
    }
    let l = cholesky(&gram).map_err(|_| CodingError::SingularGram)?;
    let xt = sub.mul_vec(&chol_solve(&l, x_s));
    let back = sub.adjoint().mul_vec(&xt);
    let norm: f64 = x_s.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let resid: f64 = back
        .iter()
        .zip(x_s)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if resid > 1e-9 * norm {
        return Err(CodingError::Invalid(format!(
            "interpolation residual {resid:.3e} exceeds 1e-9 of the sample norm {norm:.3e}"
        )));
    }
    Ok(xt)
}

/// The ECDQ rate for one subset from its Gram eigenvalues, in bits per
/// source sample: (p/2β)·log₂(1 + (σx²/D)·β·Ψ_MSE), where the prefactor
/// p/2β = m/2n is independent of the subset size.
fn rate_from_gram(gram: &CMat, k: usize, m: usize, n: usize, cfg: &RdfConfig) -> (f64, bool) {
    let eigs = herm_eigvals(gram).expect("eigenvalue solve for subset Gram");
    let hi = *eigs.last().unwrap();
    if eigs[0] <= SINGULAR_TOL * hi.max(0.0) {
        return (f64::INFINITY, true);
    }
    let mut sum = NeumaierSum::new();
    let mut inv = NeumaierSum::new();
    for &v in &eigs {
        sum.add(v);
        inv.add(1.0 / v);
    }
    let kf = k as f64;
    let psi = ((sum.total() / kf) * (inv.total() / kf)).max(1.0);
    let beta = kf / m as f64;
    let arg = 1.0 + cfg.sdr() * beta * psi;
    (m as f64 / (2.0 * n as f64) * arg.log2(), false)
}

/// ECDQ coding rate of one explicit subset, bits per source sample. A
/// singular sub-frame is an infinite rate, not an error.
pub fn ecdq_rate(frame: &Frame, mask: &[usize], cfg: &RdfConfig) -> Result<RateValue, CodingError> {
    let (k, m, n) = (mask.len(), frame.m(), frame.n());
    if k == 0 {
        return Err(CodingError::Invalid("selection mask is empty".into()));
    }
    if k > m {
        return Err(CodingError::TooManyColumns { k, m });
    }
    cfg.check_against(k as f64 / m as f64, k as f64 / n as f64)?;
    let gram = subframe(frame, mask).gram();
    let (value, infinite) = rate_from_gram(&gram, k, m, n, cfg);
    Ok(RateValue { value, infinite })
}

/// Common subset-averaging result: mean over the finite subsets, Monte-Carlo
/// half-width, and the flagged-infinite bookkeeping.
struct AveragedSamples {
    mean: f64,
    half_width: Option<f64>,
    infinite_fraction: f64,
    samples: u64,
    finite_values: Vec<f64>,
}

fn average_over_subsets<G>(
    n: usize,
    model: SelectionModel,
    mode: AverageMode,
    collect: bool,
    mut stat: G,
) -> Result<AveragedSamples, CodingError>
where
    G: FnMut(&[usize]) -> (f64, bool),
{
    match mode {
        AverageMode::Exact => {
            let mut samples = 0u64;
            let mut finite_values = Vec::new();
            let raw = exact_expectation(&model, n, |cols| {
                samples += 1;
                let (g, infinite) = stat(cols);
                if infinite {
                    vec![0.0, 1.0]
                } else {
                    if collect {
                        finite_values.push(g);
                    }
                    vec![g, 0.0]
                }
            })?;
            let infinite_fraction = raw[1].clamp(0.0, 1.0);
            let mean = if infinite_fraction < 1.0 - 1e-15 {
                raw[0] / (1.0 - infinite_fraction)
            } else {
                f64::NAN
            };
            Ok(AveragedSamples {
                mean,
                half_width: None,
                infinite_fraction,
                samples,
                finite_values,
            })
        }
        AverageMode::MonteCarlo {
            trials,
            master_seed,
        } => {
            if trials < 2 {
                return Err(CodingError::Invalid(format!(
                    "Monte-Carlo averaging needs at least two trials, got {trials}"
                )));
            }
            let mut sum = NeumaierSum::new();
            let mut sumsq = NeumaierSum::new();
            let mut finite_values = Vec::new();
            let mut finite = 0u64;
            let mut infinite = 0u64;
            for trial in 0..trials {
                let mut rng = RngStream::for_trial(master_seed, trial as u64);
                let cols = model.draw(n, &mut rng);
                let (g, inf) = stat(&cols);
                if inf {
                    infinite += 1;
                } else {
                    finite += 1;
                    sum.add(g);
                    sumsq.add(g * g);
                    if collect {
                        finite_values.push(g);
                    }
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
            Ok(AveragedSamples {
                mean,
                half_width,
                infinite_fraction: infinite as f64 / trials as f64,
                samples: trials as u64,
                finite_values,
            })
        }
    }
}

/// Operational rate-distortion outcome: the averaged ECDQ rate plus the raw
/// per-subset rates for histogramming. `rates` lists the finite subsets in
/// enumeration or draw order (exact Bernoulli enumeration lists each subset
/// once; its unequal weights enter the mean, not the list).
#[derive(Clone, Debug, Serialize)]
pub struct RdfOutcome {
    pub config: RdfConfig,
    pub model: String,
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub infinite_fraction: f64,
    pub samples: u64,
    pub rates: Vec<f64>,
}

/// Average the ECDQ rate over the selection model. Per-subset aspect ratios
/// are the realized ones; draws larger than m (possible under Bernoulli)
/// count as infinite, and the empty draw codes nothing at rate zero.
pub fn operational_rdf(
    frame: &Frame,
    model: SelectionModel,
    cfg: &RdfConfig,
    mode: AverageMode,
) -> Result<RdfOutcome, CodingError> {
    model.validate(frame.n())?;
    let (m, n) = (frame.m(), frame.n());
    match model {
        SelectionModel::Comb { k } => {
            if k > m {
                return Err(CodingError::TooManyColumns { k, m });
            }
            cfg.check_against(k as f64 / m as f64, k as f64 / n as f64)?;
        }
        SelectionModel::Bern { p } => {
            cfg.check_against(p * n as f64 / m as f64, p)?;
        }
    }
    let full_gram = frame.matrix().gram();
    let avg = average_over_subsets(n, model, mode, true, |cols| {
        let k = cols.len();
        if k == 0 {
            return (0.0, false);
        }
        if k > m {
            return (f64::INFINITY, true);
        }
        let gram = subset_gram_from_full(&full_gram, cols);
        rate_from_gram(&gram, k, m, n, cfg)
    })?;
    Ok(RdfOutcome {
        config: *cfg,
        model: model.label(),
        mean: avg.mean,
        half_width: avg.half_width,
        infinite_fraction: avg.infinite_fraction,
        samples: avg.samples,
        rates: avg.finite_values,
    })
}

/// Multiple-access capacity mode: `Regular` keeps the identity inside the
/// log-determinant, `Practical` drops it (interference-dominated operation)
/// and therefore needs k ≤ m and a nonsingular Gram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    Regular,
    Practical,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CapacityConfig {
    /// Per-user signal-to-noise ratio, linear scale.
    pub snr: f64,
    /// Nominal number of active users.
    pub k: usize,
    pub mode: CapacityMode,
}

impl CapacityConfig {
    pub fn new(snr: f64, k: usize, mode: CapacityMode) -> Result<Self, CodingError> {
        if !(snr > 0.0) || !snr.is_finite() {
            return Err(CodingError::Invalid(format!(
                "SNR must be positive and finite, got {snr}"
            )));
        }
        if k == 0 {
            return Err(CodingError::Invalid("need at least one active user".into()));
        }
        Ok(CapacityConfig { snr, k, mode })
    }
}

/// Per-subset capacity in bits per resource: (1/m)·log₂ det(I + SNR·G_S),
/// or without the identity in practical mode. Regular mode reads whichever
/// side is smaller: the nonzero spectrum is shared and the extra zero
/// eigenvalues contribute log 1 = 0.
fn capacity_of(frame: &Frame, full_gram: &CMat, cols: &[usize], cfg: &CapacityConfig) -> (f64, bool) {
    let (k, m) = (cols.len(), frame.m());
    if k == 0 {
        return (0.0, false);
    }
    match cfg.mode {
        CapacityMode::Regular => {
            let mat = if k <= m {
                subset_gram_from_full(full_gram, cols)
            } else {
                subframe(frame, cols).outer_gram()
            };
            let eigs = herm_eigvals(&mat).expect("eigenvalue solve for subset capacity");
            let mut acc = NeumaierSum::new();
            for &v in &eigs {
                acc.add((1.0 + cfg.snr * v.max(0.0)).log2());
            }
            (acc.total() / m as f64, false)
        }
        CapacityMode::Practical => {
            if k > m {
                return (f64::NEG_INFINITY, true);
            }
            let gram = subset_gram_from_full(full_gram, cols);
            let eigs = herm_eigvals(&gram).expect("eigenvalue solve for subset capacity");
            if eigs[0] <= SINGULAR_TOL * eigs.last().unwrap().max(0.0) {
                return (f64::NEG_INFINITY, true);
            }
            let mut acc = NeumaierSum::new();
            for &v in &eigs {
                acc.add((cfg.snr * v).log2());
            }
            (acc.total() / m as f64, false)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityOutcome {
    pub config: CapacityConfig,
    pub model: String,
    /// Bits per resource, averaged over finite subsets.
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub infinite_fraction: f64,
    pub samples: u64,
}

/// Average multiple-access capacity over the selection model.
pub fn noma_capacity(
    frame: &Frame,
    model: SelectionModel,
    cfg: &CapacityConfig,
    mode: AverageMode,
) -> Result<CapacityOutcome, CodingError> {
    model.validate(frame.n())?;
    if let SelectionModel::Comb { k } = model {
        if k != cfg.k {
            return Err(CodingError::Invalid(format!(
                "config expects k={} active users but the model draws {k}",
                cfg.k
            )));
        }
        if cfg.mode == CapacityMode::Practical && k > frame.m() {
            return Err(CodingError::TooManyColumns { k, m: frame.m() });
        }
    }
    let full_gram = frame.matrix().gram();
    let avg = average_over_subsets(frame.n(), model, mode, false, |cols| {
        capacity_of(frame, &full_gram, cols, cfg)
    })?;
    Ok(CapacityOutcome {
        config: *cfg,
        model: model.label(),
        mean: avg.mean,
        half_width: avg.half_width,
        infinite_fraction: avg.infinite_fraction,
        samples: avg.samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StcOutcome {
    pub k: usize,
    pub snr: f64,
    /// Averaged pairwise-error bound SNR^(−m)/det(H_S).
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub infinite_fraction: f64,
    pub samples: u64,
}

/// Space-time determinant bound averaged over k-subsets: the mean of
/// SNR^(−m)/det(F_S F_S†). Singular subsets contribute +∞, flagged and
/// counted separately.
pub fn stc_bound(
    frame: &Frame,
    k: usize,
    snr: f64,
    mode: AverageMode,
) -> Result<StcOutcome, CodingError> {
    let m = frame.m();
    if k < m {
        return Err(CodingError::TooFewColumns { k, m });
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(CodingError::Invalid(format!(
            "SNR must be positive and finite, got {snr}"
        )));
    }
    let model = SelectionModel::Comb { k };
    model.validate(frame.n())?;
    let avg = average_over_subsets(frame.n(), model, mode, false, |cols| {
        let h = subframe(frame, cols).outer_gram();
        let eigs = herm_eigvals(&h).expect("eigenvalue solve for subset Hessian");
        if eigs[0] <= SINGULAR_TOL * eigs.last().unwrap().max(0.0) {
            return (f64::INFINITY, true);
        }
        let mut logdet = NeumaierSum::new();
        for &v in &eigs {
            logdet.add(v.ln());
        }
        ((-(m as f64) * snr.ln() - logdet.total()).exp(), false)
    })?;
    Ok(StcOutcome {
        k,
        snr,
        mean: avg.mean,
        half_width: avg.half_width,
        infinite_fraction: avg.infinite_fraction,
        samples: avg.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build, FamilyParams, Frame};
    use crate::numerics::chol_inv_trace;
    use approx::assert_abs_diff_eq;

    fn gaussian(m: usize, n: usize, seed: u64) -> Frame {
        build(&FamilyParams::IidGaussian { m, n, seed }).unwrap()
    }

    fn random_complex(rng: &mut RngStream, len: usize) -> Vec<Complex64> {
        (0..len).map(|_| rng.complex_normal()).collect()
    }

    fn vec_norm(v: &[Complex64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn ls_encode_interpolates_and_respects_square_case() {
        let f = gaussian(4, 9, 5);
        let mut rng = RngStream::new(0xec0de, 0);
        for mask in [vec![0, 3, 7], vec![1, 2, 4, 8]] {
            let x_s = random_complex(&mut rng, mask.len());
            let xt = ls_encode(&f, &mask, &x_s).unwrap();
            assert_eq!(xt.len(), 4);
            let back = subframe(&f, &mask).adjoint().mul_vec(&xt);
            for (a, b) in back.iter().zip(&x_s) {
                assert!((a - b).norm() <= 1e-9 * vec_norm(&x_s));
            }
        }
    }

    #[test]
    fn ls_encode_is_an_isometry_on_orthonormal_subsets() {
        let f = build(&FamilyParams::SpikesFourier { m: 4 }).unwrap();
        let mut rng = RngStream::new(0x150, 0);
        let x_s = random_complex(&mut rng, 4);
        let xt = ls_encode(&f, &[0, 1, 2, 3], &x_s).unwrap();
        assert_abs_diff_eq!(vec_norm(&xt), vec_norm(&x_s), epsilon = 1e-12);
    }

    #[test]
    fn ls_encode_minimizes_norm_over_the_solution_set() {
        let f = gaussian(4, 8, 21);
        let mask = [1, 4, 6];
        let mut rng = RngStream::new(0x31415, 0);
        let x_s = random_complex(&mut rng, 3);
        let xt = ls_encode(&f, &mask, &x_s).unwrap();
        let sub = subframe(&f, &mask);
        let gram = sub.gram();
        let l = cholesky(&gram).unwrap();
        for _ in 0..100 {
            // Project random noise onto the orthogonal complement of the
            // sub-frame's column space; adding it preserves F_S†x̃ = x_s.
            let w = random_complex(&mut rng, 4);
            let proj = sub.mul_vec(&chol_solve(&l, &sub.adjoint().mul_vec(&w)));
            let shifted: Vec<Complex64> = xt
                .iter()
                .zip(w.iter().zip(&proj))
                .map(|(x, (wi, pi))| x + (wi - pi))
                .collect();
            assert!(vec_norm(&xt) <= vec_norm(&shifted) + 1e-9);
        }
    }

    #[test]
    fn ls_encode_rejects_oversize_and_singular_masks() {
        let f = gaussian(3, 8, 2);
        let x4 = vec![Complex64::ONE; 4];
        assert!(matches!(
            ls_encode(&f, &[0, 1, 2, 3], &x4),
            Err(CodingError::TooManyColumns { k: 4, m: 3 })
        ));
        let dup = build(&FamilyParams::UnionBases { m: 2, copies: 2 }).unwrap();
        let x2 = vec![Complex64::ONE; 2];
        assert!(matches!(
            ls_encode(&dup, &[0, 2], &x2),
            Err(CodingError::SingularGram)
        ));
        assert_eq!(ls_encode(&f, &[], &[]).unwrap(), vec![Complex64::ZERO; 3]);
    }

    #[test]
    fn ecdq_rate_matches_the_trace_identity() {
        // (p/2β)·log₂(1 + sdr·β·Ψ) against (m/2n)·log₂(1 + σx²·tr(G⁻¹)/(mD)).
        for (frame, mask) in [
            (build(&FamilyParams::Lpf { m: 4, n: 8 }).unwrap(), vec![0, 2, 5]),
            (build(&FamilyParams::DssQr { q: 7 }).unwrap(), vec![1, 3, 6]),
            (gaussian(5, 11, 9), vec![0, 1, 6, 8, 10]),
        ] {
            let k = mask.len();
            let cfg = RdfConfig::for_subset_size(2.0, 0.05, &frame, k).unwrap();
            let rate = ecdq_rate(&frame, &mask, &cfg).unwrap();
            assert!(!rate.infinite);
            let gram = subframe(&frame, &mask).gram();
            let l = cholesky(&gram).unwrap();
            let (m, n) = (frame.m() as f64, frame.n() as f64);
            let direct = m / (2.0 * n)
                * (1.0 + cfg.sigma_x2 * chol_inv_trace(&l) / (m * cfg.distortion)).log2();
            assert_abs_diff_eq!(rate.value, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn ecdq_rate_on_the_uniform_lpf_grid_hits_the_shannon_form() {
        // Ψ_MSE = 1, β = 1: the rate collapses to (p/2)·log₂(1 + σx²/D).
        let f = build(&FamilyParams::Lpf { m: 4, n: 12 }).unwrap();
        let mask = [0, 3, 6, 9];
        let cfg = RdfConfig::for_subset_size(1.0, 0.01, &f, 4).unwrap();
        let rate = ecdq_rate(&f, &mask, &cfg).unwrap();
        let p = 4.0 / 12.0;
        assert_abs_diff_eq!(rate.value, p / 2.0 * 101.0f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn ecdq_rate_is_monotone_in_amplification_and_vanishes_at_zero_sdr() {
        let f = gaussian(4, 9, 33);
        // Same subset size, so identical (p, β); only Ψ differs.
        let well = [0, 3, 6];
        let worse = [0, 1, 2];
        let cfg = RdfConfig::for_subset_size(1.0, 0.1, &f, 3).unwrap();
        let g_well = subframe(&f, &well).gram();
        let g_worse = subframe(&f, &worse).gram();
        let psi = |g: &CMat| {
            let e = herm_eigvals(g).unwrap();
            let s: f64 = e.iter().sum();
            let i: f64 = e.iter().map(|v| 1.0 / v).sum();
            s * i / (e.len() * e.len()) as f64
        };
        let (r_well, r_worse) = (
            ecdq_rate(&f, &well, &cfg).unwrap(),
            ecdq_rate(&f, &worse, &cfg).unwrap(),
        );
        if psi(&g_well) < psi(&g_worse) {
            assert!(r_well.value < r_worse.value);
        } else {
            assert!(r_well.value >= r_worse.value);
        }

        let tiny = RdfConfig::for_subset_size(1e-12, 1.0, &f, 3).unwrap();
        let r0 = ecdq_rate(&f, &well, &tiny).unwrap();
        assert!(r0.value >= 0.0 && r0.value < 1e-10);

        let singular = build(&FamilyParams::UnionBases { m: 2, copies: 2 }).unwrap();
        let cfg2 = RdfConfig::for_subset_size(1.0, 0.1, &singular, 2).unwrap();
        let r = ecdq_rate(&singular, &[0, 2], &cfg2).unwrap();
        assert!(r.infinite && r.value.is_infinite());
    }

    #[test]
    fn ecdq_rate_rejects_mismatched_configs() {
        let f = gaussian(4, 9, 1);
        let cfg = RdfConfig::new(1.0, 0.1, 0.5, 0.25).unwrap();
        assert!(matches!(
            ecdq_rate(&f, &[0, 1, 2], &cfg),
            Err(CodingError::Invalid(_))
        ));
        assert!(RdfConfig::new(0.0, 0.1, 1.0, 0.5).is_err());
        assert!(RdfConfig::new(1.0, -0.1, 1.0, 0.5).is_err());
        assert!(RdfConfig::new(1.0, 0.1, 0.4, 0.5).is_err());
    }

    #[test]
    fn operational_rdf_full_selection_is_deterministic() {
        // k = n forces k = m: an identity frame encodes at the Shannon rate.
        let f = build(&FamilyParams::UnionBases { m: 3, copies: 1 }).unwrap();
        let cfg = RdfConfig::for_subset_size(1.0, 0.25, &f, 3).unwrap();
        let out = operational_rdf(
            &f,
            SelectionModel::Comb { k: 3 },
            &cfg,
            AverageMode::Exact,
        )
        .unwrap();
        assert_eq!(out.samples, 1);
        assert_eq!(out.rates.len(), 1);
        assert_eq!(out.infinite_fraction, 0.0);
        assert_abs_diff_eq!(out.mean, 0.5 * 5.0f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn operational_rdf_prefers_the_etf_over_the_lpf() {
        // Matched n, γ, β: the equiangular spectrum amplifies noise less.
        let etf = build(&FamilyParams::DssQr { q: 7 }).unwrap();
        let lpf = build(&FamilyParams::Lpf { m: 3, n: 7 }).unwrap();
        let cfg = RdfConfig::for_subset_size(1.0, 0.01, &etf, 2).unwrap();
        let model = SelectionModel::Comb { k: 2 };
        let r_etf = operational_rdf(&etf, model, &cfg, AverageMode::Exact).unwrap();
        let r_lpf = operational_rdf(&lpf, model, &cfg, AverageMode::Exact).unwrap();
        assert_eq!(r_etf.samples, 21);
        assert!(
            r_etf.mean < r_lpf.mean,
            "ETF rate {} not below LPF rate {}",
            r_etf.mean,
            r_lpf.mean
        );
        // Shannon reference line: mean rate ≥ (p/2)·log₂(σx²/D).
        let shannon = cfg.p / 2.0 * cfg.sdr().log2();
        assert!(r_etf.mean >= shannon && r_lpf.mean >= shannon);
    }

    #[test]
    fn operational_rdf_monte_carlo_brackets_exact() {
        let f = gaussian(4, 10, 17);
        let cfg = RdfConfig::for_subset_size(1.0, 0.1, &f, 3).unwrap();
        let model = SelectionModel::Comb { k: 3 };
        let exact = operational_rdf(&f, model, &cfg, AverageMode::Exact).unwrap();
        let mc = operational_rdf(
            &f,
            model,
            &cfg,
            AverageMode::MonteCarlo {
                trials: 2000,
                master_seed: 5,
            },
        )
        .unwrap();
        let half = mc.half_width.unwrap();
        assert!((mc.mean - exact.mean).abs() <= 2.0 * half);
        assert_eq!(mc.rates.len() as u64, mc.samples);
    }

    #[test]
    fn capacity_is_pinned_on_orthonormal_subsets() {
        // Identity frame: every k-subset has G_S = I.
        let f = build(&FamilyParams::UnionBases { m: 4, copies: 1 }).unwrap();
        let model = SelectionModel::Comb { k: 2 };
        let reg = CapacityConfig::new(10.0, 2, CapacityMode::Regular).unwrap();
        let out = noma_capacity(&f, model, &reg, AverageMode::Exact).unwrap();
        assert_abs_diff_eq!(out.mean, 0.5 * 11.0f64.log2(), epsilon = 1e-12);

        let prac = CapacityConfig::new(10.0, 2, CapacityMode::Practical).unwrap();
        let out = noma_capacity(&f, model, &prac, AverageMode::Exact).unwrap();
        assert_abs_diff_eq!(out.mean, 0.5 * 10.0f64.log2(), epsilon = 1e-12);
        assert_eq!(out.infinite_fraction, 0.0);
    }

    #[test]
    fn capacity_eigen_path_equals_direct_determinant() {
        let f = gaussian(3, 8, 41);
        let cfg = CapacityConfig::new(7.0, 4, CapacityMode::Regular).unwrap();
        let full_gram = f.matrix().gram();
        // k > m: the Gram is singular but I + SNR·G stays positive definite.
        exact_expectation(&SelectionModel::Comb { k: 4 }, 8, |cols| {
            let (eig_path, infinite) = capacity_of(&f, &full_gram, cols, &cfg);
            assert!(!infinite);
            let g = subset_gram_from_full(&full_gram, cols);
            let shifted = CMat::from_fn(4, 4, |i, j| {
                let base = g[(i, j)] * cfg.snr;
                if i == j {
                    base + 1.0
                } else {
                    base
                }
            });
            let l = cholesky(&shifted).unwrap();
            let direct = crate::numerics::chol_logdet(&l) / (f.m() as f64 * 2.0f64.ln());
            assert_abs_diff_eq!(eig_path, direct, epsilon = 1e-9);
            vec![0.0]
        })
        .unwrap();
    }

    #[test]
    fn capacity_is_monotone_in_snr_and_subset_growth() {
        let f = gaussian(4, 9, 13);
        let full_gram = f.matrix().gram();
        let mut rng = RngStream::new(0xcafe, 0);
        for _ in 0..25 {
            let k = 1 + rng.index(8);
            let cols = rng.sorted_subset(9, k);
            let lo = CapacityConfig::new(3.0, k, CapacityMode::Regular).unwrap();
            let hi = CapacityConfig::new(9.0, k, CapacityMode::Regular).unwrap();
            let (c_lo, _) = capacity_of(&f, &full_gram, &cols, &lo);
            let (c_hi, _) = capacity_of(&f, &full_gram, &cols, &hi);
            assert!(c_hi >= c_lo - 1e-12);

            // Add one more column: the determinant cannot shrink.
            if k < 9 {
                let extra = (0..9).find(|j| !cols.contains(j)).unwrap();
                let mut grown = cols.clone();
                grown.push(extra);
                grown.sort_unstable();
                let (c_grown, _) = capacity_of(&f, &full_gram, &grown, &lo);
                assert!(c_grown >= c_lo - 1e-12);
            }
        }
        // SNR → 0 sends the regular capacity to zero.
        let faint = CapacityConfig::new(1e-12, 3, CapacityMode::Regular).unwrap();
        let (c0, _) = capacity_of(&f, &full_gram, &[0, 1, 2], &faint);
        assert!(c0 >= 0.0 && c0 < 1e-9);
    }

    #[test]
    fn etf_capacity_beats_the_random_frame() {
        // β = 1 at γ ≈ 1/2, SNR = 100, matched sizes.
        let etf = build(&FamilyParams::DssQr { q: 43 }).unwrap();
        let rnd = gaussian(etf.m(), etf.n(), 97);
        let k = etf.m();
        let cfg = CapacityConfig::new(100.0, k, CapacityMode::Regular).unwrap();
        let model = SelectionModel::Comb { k };
        let mode = AverageMode::MonteCarlo {
            trials: 400,
            master_seed: 0xbeef,
        };
        let c_etf = noma_capacity(&etf, model, &cfg, mode).unwrap();
        let c_rnd = noma_capacity(&rnd, model, &cfg, mode).unwrap();
        assert!(
            c_etf.mean > c_rnd.mean + 0.05,
            "ETF capacity {} not above random-frame capacity {}",
            c_etf.mean,
            c_rnd.mean
        );
    }

    #[test]
    fn capacity_validates_its_configuration() {
        let f = gaussian(3, 6, 1);
        assert!(CapacityConfig::new(0.0, 2, CapacityMode::Regular).is_err());
        assert!(CapacityConfig::new(1.0, 0, CapacityMode::Regular).is_err());
        let cfg = CapacityConfig::new(1.0, 2, CapacityMode::Regular).unwrap();
        assert!(matches!(
            noma_capacity(&f, SelectionModel::Comb { k: 3 }, &cfg, AverageMode::Exact),
            Err(CodingError::Invalid(_))
        ));
        let prac = CapacityConfig::new(1.0, 5, CapacityMode::Practical).unwrap();
        assert!(matches!(
            noma_capacity(&f, SelectionModel::Comb { k: 5 }, &prac, AverageMode::Exact),
            Err(CodingError::TooManyColumns { .. })
        ));
        // Bernoulli draws with k > m or singular Grams are flagged, not fatal.
        let prac_bern = CapacityConfig::new(1.0, 3, CapacityMode::Practical).unwrap();
        let out = noma_capacity(
            &f,
            SelectionModel::Bern { p: 0.7 },
            &prac_bern,
            AverageMode::Exact,
        )
        .unwrap();
        assert!(out.infinite_fraction > 0.0);
    }

    #[test]
    fn stc_bound_is_pinned_on_the_full_tight_frame() {
        let f = build(&FamilyParams::SpikesFourier { m: 3 }).unwrap();
        let out = stc_bound(&f, 6, 10.0, AverageMode::Exact).unwrap();
        assert_eq!(out.samples, 1);
        assert_abs_diff_eq!(out.mean, 1e-3 / 8.0, epsilon = 1e-15);
        let sharper = stc_bound(&f, 6, 100.0, AverageMode::Exact).unwrap();
        assert!(sharper.mean < out.mean);
    }

    #[test]
    fn stc_bound_prefers_the_etf_and_validates_inputs() {
        // γ ≈ 1/2 at p ≈ 0.9: diversity-order territory.
        let etf = build(&FamilyParams::DssQr { q: 19 }).unwrap();
        let lpf = build(&FamilyParams::Lpf { m: 9, n: 19 }).unwrap();
        let (b_etf, b_lpf) = (
            stc_bound(&etf, 17, 4.0, AverageMode::Exact).unwrap(),
            stc_bound(&lpf, 17, 4.0, AverageMode::Exact).unwrap(),
        );
        assert_eq!(b_etf.samples, 171);
        assert!(
            b_etf.mean < b_lpf.mean,
            "ETF bound {} not below LPF bound {}",
            b_etf.mean,
            b_lpf.mean
        );
        assert!(matches!(
            stc_bound(&etf, 5, 4.0, AverageMode::Exact),
            Err(CodingError::TooFewColumns { .. })
        ));
        assert!(stc_bound(&etf, 17, 0.0, AverageMode::Exact).is_err());
        assert!(stc_bound(&etf, 25, 4.0, AverageMode::Exact).is_err());
    }
}
