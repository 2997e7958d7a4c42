//! Limiting spectral laws: Marchenko–Pastur and Wachter's MANOVA family.
//!
//! Both laws are handled by one machinery, since MP is exactly the γ → 0
//! member of the MANOVA family: same edge formulas, same density shape with
//! the (1 − γx) factor dropping out. The γ = 1/2 member, recentered, is the
//! Kesten–McKay distribution; its moments are exercised through the exact
//! moment engine rather than a separate law object.
//!
//! Besides the continuous density on [λ₋, λ₊] and the documented point mass
//! at 1/γ, a law with β > 1 carries a point mass of 1 − 1/β at zero: the
//! matrices whose spectra these laws describe are k×k of rank at most m, so
//! a fraction 1 − m/k of the eigenvalues is exactly zero. Dropping that atom
//! would leave less than unit mass. All masses, CDFs, and moments here
//! account for it.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use crate::numerics::{
    chol_real, forward_solve, rational_to_f64, sym_eigvals, syrk_sum, NeumaierSum, NumericsError,
    RMat, Rational, RngStream,
};
use num_bigint::BigInt;
use num_traits::Zero;

#[derive(Debug, thiserror::Error)]
pub enum LimitsError {
    #[error("invalid law parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LawFamily {
    Mp,
    Manova,
}

/// Number of θ-intervals in the cached CDF table.
const CDF_GRID: usize = 4096;

/// A limiting spectral law: continuous density on [λ₋, λ₊] plus up to two
/// point masses (at 0 for β > 1, at 1/γ when 1 + 1/β − 1/(βγ) > 0).
///
/// Instances are immutable; the CDF table is built lazily on first use and
/// shared, so concurrent reads are safe.
#[derive(Debug)]
pub struct LimitLaw {
    family: LawFamily,
    beta: f64,
    /// Aspect ratio γ; 0 encodes the MP law (the γ → 0 limit).
    gamma: f64,
    lambda_minus: f64,
    lambda_plus: f64,
    atom_location: f64,
    atom_mass: f64,
    zero_atom_mass: f64,
    cdf_table: OnceLock<CdfTable>,
}

impl Clone for LimitLaw {
    fn clone(&self) -> Self {
        LimitLaw {
            family: self.family,
            beta: self.beta,
            gamma: self.gamma,
            lambda_minus: self.lambda_minus,
            lambda_plus: self.lambda_plus,
            atom_location: self.atom_location,
            atom_mass: self.atom_mass,
            zero_atom_mass: self.zero_atom_mass,
            cdf_table: OnceLock::new(),
        }
    }
}

impl LimitLaw {
    /// Marchenko–Pastur with aspect β = k/m: edges (1 ± √β)², and for β > 1
    /// a point mass 1 − 1/β at zero.
    pub fn mp(beta: f64) -> Result<Self, LimitsError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(LimitsError::Invalid(format!(
                "MP needs finite β > 0, got {beta}"
            )));
        }
        let s = beta.sqrt();
        Ok(LimitLaw {
            family: LawFamily::Mp,
            beta,
            gamma: 0.0,
            lambda_minus: (1.0 - s) * (1.0 - s),
            lambda_plus: (1.0 + s) * (1.0 + s),
            atom_location: f64::INFINITY,
            atom_mass: 0.0,
            zero_atom_mass: (1.0 - 1.0 / beta).max(0.0),
            cdf_table: OnceLock::new(),
        })
    }

    /// Wachter MANOVA with aspect γ = m/n ∈ (0, 1] and β = k/m, requiring
    /// p = βγ ≤ 1.
    pub fn manova(gamma: f64, beta: f64) -> Result<Self, LimitsError> {
        if !(gamma > 0.0 && gamma <= 1.0) || !(beta > 0.0) || !beta.is_finite() {
            return Err(LimitsError::Invalid(format!(
                "MANOVA needs γ ∈ (0,1] and β > 0, got γ={gamma}, β={beta}"
            )));
        }
        let p = beta * gamma;
        if p > 1.0 + 1e-12 {
            return Err(LimitsError::Invalid(format!(
                "MANOVA needs p = βγ ≤ 1, got {p}"
            )));
        }
        let u = (beta * (1.0 - gamma)).sqrt();
        let v = (1.0 - p).max(0.0).sqrt();
        let mut lambda_plus = (u + v) * (u + v);
        // λ₊ ≤ 1/γ always, with equality exactly when γ(1+β) = 1. Snap the
        // computed edge onto the pole in that case so quadrature can tell a
        // hard edge (density ~ (λ₊−x)^(−1/2)) from a soft one.
        if (1.0 - gamma * lambda_plus).abs() <= 1e-9 {
            lambda_plus = 1.0 / gamma;
        }
        let law = LimitLaw {
            family: LawFamily::Manova,
            beta,
            gamma,
            lambda_minus: (u - v) * (u - v),
            lambda_plus,
            atom_location: 1.0 / gamma,
            atom_mass: (1.0 + 1.0 / beta - 1.0 / (beta * gamma)).clamp(0.0, 1.0),
            zero_atom_mass: (1.0 - 1.0 / beta).max(0.0),
            cdf_table: OnceLock::new(),
        };
        debug_assert!(law.atom_location >= law.lambda_plus - 1e-9);
        Ok(law)
    }

    pub fn family(&self) -> LawFamily {
        self.family
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Aspect ratio γ for MANOVA laws; `None` for MP.
    pub fn gamma(&self) -> Option<f64> {
        match self.family {
            LawFamily::Mp => None,
            LawFamily::Manova => Some(self.gamma),
        }
    }

    /// Support of the continuous part, [λ₋, λ₊].
    pub fn support(&self) -> (f64, f64) {
        (self.lambda_minus, self.lambda_plus)
    }

    /// The point mass at 1/γ, as (location, mass); `None` for MP.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match self.family {
            LawFamily::Mp => None,
            LawFamily::Manova => Some((self.atom_location, self.atom_mass)),
        }
    }

    /// The point mass at zero, (1 − 1/β)⁺; nonzero only when β > 1.
    pub fn zero_atom_mass(&self) -> f64 {
        self.zero_atom_mass
    }

    /// The continuous part of the density; 0 outside (λ₋, λ₊). Point masses
    /// are reported by [`Self::atom`] and [`Self::zero_atom_mass`].
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = (self.lambda_minus, self.lambda_plus);
        if !(x > lo && x < hi) {
            return 0.0;
        }
        let num = ((hi - x) * (x - lo)).sqrt();
        let den = 2.0 * self.beta * PI * x * (1.0 - self.gamma * x);
        if den <= 0.0 {
            return 0.0;
        }
        num / den
    }

    /// Abscissa and continuous-part kernel at θ under x = λ₋ + w·sin²θ.
    ///
    /// The kernel is f(x)·dx/dθ expanded algebraically: the edge factor
    /// √((λ₊−x)(x−λ₋)) equals w·sinθ·cosθ exactly, and 1 − γx equals
    /// (1 − γλ₊) + γw·cos²θ exactly, so both soft edges, the zero edge
    /// (λ₋ = 0, where x itself cancels a sin²θ), and the hard edge
    /// λ₊ = 1/γ produce a smooth bounded integrand. Evaluating f pointwise
    /// in x instead loses the hard-edge limit to rounding: x collapses onto
    /// λ₊ and the integrand drops from its true limit w/(βπγλ₊) to 0.
    fn theta_point(&self, theta: f64) -> (f64, f64) {
        let (lo, hi) = (self.lambda_minus, self.lambda_plus);
        let w = hi - lo;
        let t = theta.clamp(1e-9, FRAC_PI_2 - 1e-9);
        let (s, c) = (t.sin(), t.cos());
        let x = lo + w * s * s;
        let eta = (1.0 - self.gamma * hi).max(0.0);
        let k = w * w * s * s * c * c / (self.beta * PI * x * (eta + self.gamma * w * c * c));
        (x, k)
    }

    /// ∫ g(x) dμ_cont between two θ abscissas by panel-doubling Simpson on
    /// the smooth kernel; the atoms are not included.
    fn integrate_theta(
        &self,
        g: &dyn Fn(f64) -> f64,
        theta_lo: f64,
        theta_hi: f64,
        abs_tol: f64,
    ) -> Result<f64, LimitsError> {
        if !(self.lambda_plus - self.lambda_minus > 1e-12) || theta_hi <= theta_lo {
            return Ok(0.0);
        }
        let eval = |theta: f64| {
            let (x, k) = self.theta_point(theta);
            k * g(x)
        };
        let mut panels = 256usize;
        let mut prev = f64::NAN;
        for _ in 0..14 {
            let h = (theta_hi - theta_lo) / panels as f64;
            let mut acc = NeumaierSum::new();
            for i in 0..panels {
                let a = theta_lo + i as f64 * h;
                acc.add(h / 6.0 * (eval(a) + 4.0 * eval(a + 0.5 * h) + eval(a + h)));
            }
            let est = acc.total();
            if !est.is_finite() {
                return Err(NumericsError::NonFinite("law quadrature").into());
            }
            if (est - prev).abs() <= abs_tol {
                return Ok(est);
            }
            prev = est;
            panels *= 2;
        }
        Err(NumericsError::NoConvergence("law quadrature").into())
    }

    /// θ abscissa of x under the support map, clamped to [0, π/2].
    fn theta_of(&self, x: f64) -> f64 {
        let w = self.lambda_plus - self.lambda_minus;
        if !(w > 1e-12) {
            return 0.0;
        }
        ((x - self.lambda_minus) / w).clamp(0.0, 1.0).sqrt().asin()
    }

    fn table(&self) -> &CdfTable {
        self.cdf_table.get_or_init(|| CdfTable::build(self))
    }

    /// Total mass of the continuous part, from the cached table.
    pub fn continuous_mass(&self) -> f64 {
        self.table().total()
    }

    /// CDF including both point masses, from the cached monotone table.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let mut c = self.zero_atom_mass;
        c += self.table().cumulative(x, self.lambda_minus, self.lambda_plus);
        if x >= self.atom_location {
            c += self.atom_mass;
        }
        c
    }

    /// CDF by direct quadrature, for verifying the table.
    pub fn cdf_quadrature(&self, x: f64, abs_tol: f64) -> Result<f64, LimitsError> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let mut c = self.zero_atom_mass;
        c += self.integrate_theta(&|_| 1.0, 0.0, self.theta_of(x), abs_tol)?;
        if x >= self.atom_location {
            c += self.atom_mass;
        }
        Ok(c)
    }

    /// Per-eigenvalue moment ∫x^r dμ in closed form, point masses included.
    ///
    /// MP moments are Narayana polynomials in β. MANOVA moments divide the
    /// Narayana-sum moment polynomial by p termwise, so every term carries
    /// nonnegative powers of p, 1−p, and x = 1/γ − 1: exact at p ∈ {0, 1}
    /// and stable as γ → 0.
    pub fn moment(&self, r: usize) -> f64 {
        assert!(r >= 1, "moments are defined for r >= 1");
        match self.family {
            LawFamily::Mp => mp_moment(self.beta, r),
            LawFamily::Manova => manova_per_eigenvalue_moment(self.gamma, self.beta, r),
        }
    }

    /// Per-eigenvalue moment by quadrature plus atom contributions; cross-
    /// checks [`Self::moment`].
    pub fn moment_quadrature(&self, r: usize, abs_tol: f64) -> Result<f64, LimitsError> {
        assert!(r >= 1, "moments are defined for r >= 1");
        let cont = self.integrate_theta(&|x| x.powi(r as i32), 0.0, FRAC_PI_2, abs_tol)?;
        let atom = if self.atom_mass > 0.0 {
            self.atom_location.powi(r as i32) * self.atom_mass
        } else {
            0.0
        };
        Ok(cont + atom)
    }

    /// ∫g dμ for a spectral functional g, atoms included. Returns ±∞ when
    /// the integral provably diverges:
    ///
    /// * mse, g = 1/x: the β > 1 zero atom gives +∞ outright; at β = 1 the
    ///   density behaves like x^(−1/2) at the zero edge, so x⁻¹dμ ~ x^(−3/2)
    ///   diverges. Finite exactly when β < 1 (then λ₋ > 0).
    /// * shannon, g = ln x: −∞ for β > 1 (zero atom); at β = 1 the edge
    ///   exponent gives ln(x)·x^(−1/2), integrable, so the value is finite
    ///   for every β ≤ 1.
    pub fn functional_integral(
        &self,
        kind: LawFunctional<'_>,
        abs_tol: f64,
    ) -> Result<f64, LimitsError> {
        let edge_touches_zero = self.lambda_minus <= 1e-12 * self.lambda_plus;
        match kind {
            LawFunctional::Mse => {
                if self.zero_atom_mass > 0.0 || edge_touches_zero {
                    return Ok(f64::INFINITY);
                }
                let cont = self.integrate_theta(&|x| 1.0 / x, 0.0, FRAC_PI_2, abs_tol)?;
                Ok(cont + self.atom_mass_times(|x| 1.0 / x))
            }
            LawFunctional::Shannon => {
                if self.zero_atom_mass > 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let cont = if edge_touches_zero {
                    // ln x is log-singular at the zero edge, which stalls the
                    // quadrature; peel off [0, δ] analytically using the edge
                    // model f ≈ √λ₊/(2βπ)·x^(−1/2), whose ln-weighted integral
                    // is 2√δ·lnδ − 4√δ. The neglected correction is
                    // O(δ^(3/2) ln δ).
                    let w = self.lambda_plus - self.lambda_minus;
                    let delta = 1e-8 * w;
                    let tail = self.lambda_plus.sqrt() / (2.0 * self.beta * PI)
                        * (2.0 * delta.sqrt() * delta.ln() - 4.0 * delta.sqrt());
                    let body = self.integrate_theta(
                        &f64::ln,
                        self.theta_of(self.lambda_minus + delta),
                        FRAC_PI_2,
                        abs_tol,
                    )?;
                    tail + body
                } else {
                    self.integrate_theta(&f64::ln, 0.0, FRAC_PI_2, abs_tol)?
                };
                Ok(cont + self.atom_mass_times(f64::ln))
            }
            LawFunctional::Generic(g) => {
                let cont = self.integrate_theta(g, 0.0, FRAC_PI_2, abs_tol)?;
                let zero = if self.zero_atom_mass > 0.0 {
                    self.zero_atom_mass * g(0.0)
                } else {
                    0.0
                };
                Ok(cont + self.atom_mass_times(g) + zero)
            }
        }
    }

    fn atom_mass_times(&self, g: impl Fn(f64) -> f64) -> f64 {
        if self.atom_mass > 0.0 {
            self.atom_mass * g(self.atom_location)
        } else {
            0.0
        }
    }

    /// Sample the CDF at `count` evenly spaced abscissas spanning the full
    /// mass (0 through max(λ₊, atom)), for CSV export.
    pub fn cdf_samples(&self, count: usize) -> Vec<(f64, f64)> {
        let hi = if self.atom_mass > 0.0 {
            self.atom_location
        } else {
            self.lambda_plus
        };
        let lo = 0.0f64.min(self.lambda_minus);
        (0..count.max(2))
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (count.max(2) - 1) as f64;
                (x, self.cdf(x))
            })
            .collect()
    }
}

/// Spectral functionals with law-side integrals.
pub enum LawFunctional<'a> {
    /// g(x) = 1/x: arithmetic-to-harmonic amplification per eigenvalue.
    Mse,
    /// g(x) = ln x: log geometric mean per eigenvalue.
    Shannon,
    Generic(&'a dyn Fn(f64) -> f64),
}

/// Cumulative table of the continuous part over θ ∈ [0, π/2] under
/// x = λ₋ + (λ₊ − λ₋)sin²θ; increments are per-interval Simpson, so the
/// table is monotone by construction.
#[derive(Debug)]
struct CdfTable {
    cum: Vec<f64>,
}

impl CdfTable {
    fn build(law: &LimitLaw) -> CdfTable {
        if !(law.lambda_plus - law.lambda_minus > 1e-12) {
            // Degenerate support (γ = 1 or p = 1): no continuous mass.
            return CdfTable { cum: vec![0.0; 2] };
        }
        let g = |theta: f64| law.theta_point(theta).1;
        let h = FRAC_PI_2 / CDF_GRID as f64;
        let mut cum = Vec::with_capacity(CDF_GRID + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..CDF_GRID {
            let a = i as f64 * h;
            acc += h / 6.0 * (g(a) + 4.0 * g(a + 0.5 * h) + g(a + h));
            cum.push(acc);
        }
        CdfTable { cum }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn cumulative(&self, x: f64, lo: f64, hi: f64) -> f64 {
        if x <= lo {
            return 0.0;
        }
        if x >= hi || !(hi - lo > 1e-12) {
            return self.total();
        }
        let theta = ((x - lo) / (hi - lo)).sqrt().clamp(0.0, 1.0).asin();
        let n = self.cum.len() - 1;
        let t = (theta / FRAC_PI_2 * n as f64).clamp(0.0, n as f64);
        let i = (t as usize).min(n - 1);
        let frac = t - i as f64;
        self.cum[i] + frac * (self.cum[i + 1] - self.cum[i])
    }
}

/// MP per-eigenvalue moment: Σ_{i=1..r} N(r,i) β^(i−1), exact for all β
/// including the β > 1 regime with its zero atom.
fn mp_moment(beta: f64, r: usize) -> f64 {
    let table = NarayanaTable::new(r);
    let mut acc = 0.0;
    for i in 1..=r {
        acc += rational_to_f64(&table.value(r, i)) * beta.powi(i as i32 - 1);
    }
    acc
}

/// MANOVA per-eigenvalue moment: the Narayana-sum moment polynomial divided
/// by p termwise.
fn manova_per_eigenvalue_moment(gamma: f64, beta: f64, r: usize) -> f64 {
    let p = beta * gamma;
    let x = 1.0 / gamma - 1.0;
    if r == 1 {
        return 1.0;
    }
    let table = NarayanaTable::new(r - 1);
    let mut acc = (x + 1.0).powi(r as i32 - 1);
    for j in 0..=r - 2 {
        for i in 1..=j + 1 {
            let n = rational_to_f64(&table.value(j + 1, i));
            acc -= n
                * x.powi(i as i32)
                * p.powi(i as i32 - 1)
                * (1.0 - p).powi((2 + j - i) as i32)
                * (x + 1.0).powi((r - 2 - j) as i32);
        }
    }
    acc
}

/// Narayana numbers N(j,i) = (1/j)·C(j,i)·C(j,i−1) as exact rationals.
pub struct NarayanaTable {
    rows: Vec<Vec<Rational>>,
}

impl NarayanaTable {
    pub fn new(max_order: usize) -> Self {
        let mut rows = Vec::with_capacity(max_order);
        for j in 1..=max_order as u64 {
            let row = (1..=j)
                .map(|i| {
                    Rational::new(
                        crate::numerics::binomial(j, i) * crate::numerics::binomial(j, i - 1),
                        BigInt::from(j),
                    )
                })
                .collect();
            rows.push(row);
        }
        NarayanaTable { rows }
    }

    pub fn max_order(&self) -> usize {
        self.rows.len()
    }

    /// N(j,i); zero outside 1 ≤ i ≤ j.
    pub fn value(&self, j: usize, i: usize) -> Rational {
        if j == 0 || j > self.rows.len() || i == 0 || i > j {
            return Rational::zero();
        }
        self.rows[j - 1][i - 1].clone()
    }

    /// Σᵢ N(j,i), which must equal the j-th Catalan number.
    pub fn row_sum(&self, j: usize) -> Rational {
        assert!(j >= 1 && j <= self.rows.len());
        self.rows[j - 1]
            .iter()
            .fold(Rational::zero(), |a, b| a + b)
    }
}

/// Eigenvalues (ascending, clipped at 0) of one draw of the k×k matrix
/// (n/m)·(AA† + BB†)^(−1/2) BB† (AA† + BB†)^(−1/2) with A, B real iid
/// standard Gaussian of shapes k×(n−m) and k×m.
///
/// The sampled matrix is similar to (n/m)·(AA†+BB†)⁻¹BB† = (n/m)·XX† with
/// X = L⁻¹B and L the Cholesky factor of AA†+BB†, which needs one real
/// factorization and one symmetric eigensolve instead of matrix square
/// roots.
pub fn sample_manova_ensemble(
    k: usize,
    m: usize,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>, LimitsError> {
    if k == 0 || m == 0 || m > n {
        return Err(LimitsError::Invalid(format!(
            "ensemble needs 1 <= m <= n and k >= 1, got k={k}, m={m}, n={n}"
        )));
    }
    if k > n {
        return Err(LimitsError::Invalid(format!(
            "ensemble needs k <= n for an invertible AA†+BB†, got k={k}, n={n}"
        )));
    }
    let a = RMat::from_fn(k, n - m, |_, _| rng.normal());
    let b = RMat::from_fn(k, m, |_, _| rng.normal());
    let s = syrk_sum(&a, &b);
    let l = chol_real(&s)?;
    let x = forward_solve(&l, &b);
    let xxt = syrk_sum(&x, &RMat::zeros(k, 0));
    let scale = n as f64 / m as f64;
    let mut vals = sym_eigvals(&xxt)?;
    for v in vals.iter_mut() {
        *v = (*v * scale).max(0.0);
    }
    Ok(vals)
}
