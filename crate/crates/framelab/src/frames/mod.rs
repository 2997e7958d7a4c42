//! Unit-norm frame families and their diagnostics.
//!
//! A frame here is an m×n complex matrix with unit-norm columns, m ≤ n.
//! Deterministic families (harmonic, Paley, Steiner) hit their coherence and
//! tightness targets exactly; random families (Gaussian, Haar, random rows)
//! are normalized per column and carry their seed in the parameters, so any
//! frame can be rebuilt from its serialized description.

mod families;
pub mod gf;
mod io;

use num_complex::Complex64;

use crate::numerics::{herm_eig, CMat, NumericsError};

pub use io::{read_json, write_json};

/// Column norms are enforced at this tolerance on construction.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Tightness and equiangularity are judged at this tolerance.
pub const FLATNESS_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("invalid frame parameters: {0}")]
    Invalid(String),
    #[error("column {col} has norm {norm}, expected 1")]
    UnitNorm { col: usize, norm: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("frame i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// A cyclic difference set: `elements ⊂ Z_modulus` whose nonzero pairwise
/// differences cover every nonzero residue equally often.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferenceSet {
    pub modulus: usize,
    pub elements: Vec<usize>,
}

impl DifferenceSet {
    /// The quadratic residues modulo a prime q ≡ 3 (mod 4), a
    /// (q, (q-1)/2, (q-3)/4) difference set.
    pub fn quadratic_residues(q: usize) -> Result<Self, FrameError> {
        if !is_prime(q) || q % 4 != 3 {
            return Err(FrameError::Invalid(format!(
                "quadratic-residue difference sets need a prime q ≡ 3 (mod 4), got {q}"
            )));
        }
        let mut elements: Vec<usize> = (1..q).map(|i| i * i % q).collect();
        elements.sort_unstable();
        elements.dedup();
        Ok(DifferenceSet {
            modulus: q,
            elements,
        })
    }

    /// `Some(λ)` when the set is a difference set with that multiplicity,
    /// `None` when well-formed but not a difference set, `Err` when the
    /// elements are out of range or duplicated.
    pub fn validate(&self) -> Result<Option<usize>, FrameError> {
        let n = self.modulus;
        if n == 0 {
            return Err(FrameError::Invalid("zero modulus".into()));
        }
        let mut seen = vec![false; n];
        for &e in &self.elements {
            if e >= n {
                return Err(FrameError::Invalid(format!(
                    "element {e} out of range for modulus {n}"
                )));
            }
            if seen[e] {
                return Err(FrameError::Invalid(format!("duplicate element {e}")));
            }
            seen[e] = true;
        }
        if n == 1 {
            return Ok(Some(0));
        }
        let mut counts = vec![0usize; n];
        for &a in &self.elements {
            for &b in &self.elements {
                if a != b {
                    counts[(n + a - b) % n] += 1;
                }
            }
        }
        let lambda = counts[1];
        if counts[1..].iter().all(|&c| c == lambda) {
            Ok(Some(lambda))
        } else {
            Ok(None)
        }
    }
}

/// Construction parameters; the `family` tag plus this record round-trips
/// through JSON, so random families carry their seed.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyParams {
    /// Harmonic low-pass frame: rows 1..m of the n-point DFT, scaled to
    /// unit columns.
    Lpf { m: usize, n: usize },
    /// Difference-set spectrum: DFT rows indexed by the quadratic residues
    /// modulo a prime q ≡ 3 (mod 4).
    DssQr { q: usize },
    /// Difference-set spectrum with an explicit difference set.
    DssSet { set: DifferenceSet },
    /// Real Paley ETF from the symmetric conference matrix of order q+1,
    /// q a prime power ≡ 1 (mod 4). Dimensions (q+1)/2 × (q+1).
    PaleyReal { q: usize },
    /// Complex Paley ETF from the skew conference matrix of order q+1,
    /// q a prime power ≡ 3 (mod 4). Dimensions (q+1)/2 × (q+1).
    PaleyComplex { q: usize },
    /// Steiner ETF over the pair design on v points: v(v-1)/2 × v².
    SteinerPairs { v: usize },
    /// Identity next to the unitary DFT: m × 2m, tight but not equiangular.
    SpikesFourier { m: usize },
    /// Identity next to a Sylvester-Hadamard basis, m a power of two.
    SpikesHadamard { m: usize },
    /// `copies` copies of the identity basis side by side.
    UnionBases { m: usize, copies: usize },
    /// Real i.i.d. N(0,1) entries with columns normalized.
    IidGaussian { m: usize, n: usize, seed: u64 },
    /// First m rows of a Haar unitary (QR of complex Ginibre), columns
    /// normalized. Normalization makes exact tightness impossible at finite
    /// n; the tightness residual decays as n grows.
    Haar { m: usize, n: usize, seed: u64 },
    /// m distinct DFT rows chosen uniformly at random: exactly tight.
    RandDft { m: usize, n: usize, seed: u64 },
    /// m distinct rows of the orthonormal DCT-II, columns normalized.
    RandDct { m: usize, n: usize, seed: u64 },
    /// Built directly from a matrix (for example a Seidel adjacency);
    /// cannot be rebuilt from parameters alone.
    Custom { label: String },
}

impl FamilyParams {
    pub fn family(&self) -> &'static str {
        match self {
            FamilyParams::Lpf { .. } => "lpf",
            FamilyParams::DssQr { .. } | FamilyParams::DssSet { .. } => "dss",
            FamilyParams::PaleyReal { .. } => "paley_real",
            FamilyParams::PaleyComplex { .. } => "paley_complex",
            FamilyParams::SteinerPairs { .. } => "steiner_pairs",
            FamilyParams::SpikesFourier { .. } => "spikes_fourier",
            FamilyParams::SpikesHadamard { .. } => "spikes_hadamard",
            FamilyParams::UnionBases { .. } => "union_bases",
            FamilyParams::IidGaussian { .. } => "iid_gaussian",
            FamilyParams::Haar { .. } => "haar",
            FamilyParams::RandDft { .. } => "rand_dft",
            FamilyParams::RandDct { .. } => "rand_dct",
            FamilyParams::Custom { .. } => "custom",
        }
    }
}

/// An m×n frame with unit-norm columns.
#[derive(Clone, Debug)]
pub struct Frame {
    mat: CMat,
    params: FamilyParams,
}

impl Frame {
    /// Wrap a matrix, enforcing unit-norm columns at [`UNIT_NORM_TOL`].
    pub fn new(mat: CMat, params: FamilyParams) -> Result<Self, FrameError> {
        let (m, n) = (mat.rows(), mat.cols());
        if m == 0 || n == 0 || m > n {
            return Err(FrameError::Invalid(format!(
                "frame dimensions must satisfy 1 <= m <= n, got {m}x{n}"
            )));
        }
        for j in 0..n {
            let norm = mat.col_norm(j);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(FrameError::UnitNorm { col: j, norm });
            }
        }
        Ok(Frame { mat, params })
    }

    pub fn m(&self) -> usize {
        self.mat.rows()
    }

    pub fn n(&self) -> usize {
        self.mat.cols()
    }

    /// Aspect ratio γ = m/n.
    pub fn gamma(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn params(&self) -> &FamilyParams {
        &self.params
    }

    pub fn family(&self) -> &'static str {
        self.params.family()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        diagnostics(self)
    }
}

/// Build a frame from its parameters.
pub fn build(params: &FamilyParams) -> Result<Frame, FrameError> {
    families::build_frame(params)
}

/// Frame quality summary; bounds come from the Welch inequalities.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Diagnostics {
    pub m: usize,
    pub n: usize,
    pub unit_norm_residual: f64,
    /// Largest off-diagonal Gram magnitude.
    pub coherence: f64,
    /// √((n-m)/(m(n-1))): the floor for `coherence`, met exactly by ETFs.
    pub welch_max_bound: f64,
    /// Mean of |⟨f_i, f_j⟩|² over i ≠ j.
    pub mean_square_corr: f64,
    /// (n-m)/(m(n-1)): the floor for `mean_square_corr`, met by tight frames.
    pub welch_mean_square_bound: f64,
    /// ‖FF† - (n/m)I‖_max.
    pub tightness_residual: f64,
    /// Largest deviation of |⟨f_i, f_j⟩| from its off-diagonal mean.
    pub equiangular_residual: f64,
    pub is_tight: bool,
    pub is_etf: bool,
}

fn diagnostics(f: &Frame) -> Diagnostics {
    let (m, n) = (f.m(), f.n());
    let g = f.mat.gram();
    let mut coherence: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let a = g[(i, j)].norm();
            coherence = coherence.max(a);
            sum_sq += a * a;
            sum_abs += a;
        }
    }
    let pairs = (n * (n - 1)) as f64;
    let mean_abs = if n > 1 { sum_abs / pairs } else { 0.0 };
    let mut equiangular_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                equiangular_residual = equiangular_residual.max((g[(i, j)].norm() - mean_abs).abs());
            }
        }
    }
    let ratio = n as f64 / m as f64;
    let mut tightness_residual: f64 = 0.0;
    let h = f.mat.outer_gram();
    for i in 0..m {
        for j in 0..m {
            let want = if i == j { ratio } else { 0.0 };
            tightness_residual = tightness_residual.max((h[(i, j)] - want).norm());
        }
    }
    let unit_norm_residual = (0..n)
        .map(|j| (f.mat.col_norm(j) - 1.0).abs())
        .fold(0.0, f64::max);
    let (welch_max_bound, welch_mean_square_bound) = if n > 1 {
        let b = (n - m) as f64 / (m * (n - 1)) as f64;
        (b.sqrt(), b)
    } else {
        (0.0, 0.0)
    };
    let is_tight = tightness_residual <= FLATNESS_TOL;
    Diagnostics {
        m,
        n,
        unit_norm_residual,
        coherence,
        welch_max_bound,
        mean_square_corr: if n > 1 { sum_sq / pairs } else { 0.0 },
        welch_mean_square_bound,
        tightness_residual,
        equiangular_residual,
        is_tight,
        is_etf: is_tight && equiangular_residual <= FLATNESS_TOL,
    }
}

/// Frame with Gram matrix `I + scale·S` for a Seidel-type matrix `S`
/// (Hermitian, zero diagonal). The Gram must be positive semidefinite; its
/// rank becomes the frame dimension m.
pub fn from_seidel(s: &CMat, scale: f64, label: &str) -> Result<Frame, FrameError> {
    if s.rows() != s.cols() {
        return Err(FrameError::Invalid("Seidel matrix must be square".into()));
    }
    let n = s.rows();
    if s.hermiticity_residual() > 1e-12 {
        return Err(FrameError::Invalid("Seidel matrix must be Hermitian".into()));
    }
    for i in 0..n {
        if s[(i, i)].norm() > 0.0 {
            return Err(FrameError::Invalid(
                "Seidel matrix must have a zero diagonal".into(),
            ));
        }
    }
    let g = CMat::identity(n).add(&s.scale(Complex64::new(scale, 0.0)));
    let mat = unit_frame_from_gram(&g)?;
    Frame::new(
        mat,
        FamilyParams::Custom {
            label: label.to_string(),
        },
    )
}

/// Factor a PSD Gram with unit diagonal as `F† F` and return `F` with its
/// columns renormalized to exact unit length.
pub(crate) fn unit_frame_from_gram(g: &CMat) -> Result<CMat, FrameError> {
    let n = g.rows();
    let dec = herm_eig(g)?;
    let lmax = dec.values.last().copied().unwrap_or(0.0);
    let tol = 1e-8 * lmax.max(1.0);
    if dec.values.first().copied().unwrap_or(0.0) < -tol {
        return Err(FrameError::Invalid(
            "Gram matrix is not positive semidefinite".into(),
        ));
    }
    let kept: Vec<usize> = (0..n).filter(|&i| dec.values[i] > tol).rev().collect();
    if kept.is_empty() {
        return Err(FrameError::Invalid("Gram matrix has rank zero".into()));
    }
    let mut mat = CMat::from_fn(kept.len(), n, |r, j| {
        dec.values[kept[r]].sqrt() * dec.vectors[(j, kept[r])].conj()
    });
    for j in 0..n {
        let norm = mat.col_norm(j);
        if norm <= 0.0 {
            return Err(FrameError::Invalid(format!(
                "Gram column {j} has zero diagonal"
            )));
        }
        mat.scale_col(j, Complex64::new(1.0 / norm, 0.0));
    }
    Ok(mat)
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
pub(crate) fn pentagon_seidel() -> CMat {
    // Seidel adjacency of the icosahedral two-graph; rows index the six
    // diagonals, + for acute, - for obtuse crossings.
    let signs: [[i32; 6]; 6] = [
        [0, 1, 1, 1, 1, 1],
        [1, 0, -1, 1, 1, -1],
        [1, -1, 0, -1, 1, 1],
        [1, 1, -1, 0, -1, 1],
        [1, 1, 1, -1, 0, -1],
        [1, -1, 1, 1, -1, 0],
    ];
    CMat::from_real_fn(6, 6, |i, j| f64::from(signs[i][j]))
}
