//! Expected sub-frame moments: exact low orders, asymptotic recursion, and
//! the bounds that single out tight frames and ETFs.
//!
//! The central objects are the moments m_r = E[tr((F P F†)^r)]/n of a
//! Bernoulli(p)-selected column subset. For ETFs the expectations are exact
//! rational functions of (γ, p, n) for r ≤ 4, with variances for r ≤ 2. For
//! general r the asymptotic moment is produced by a recursion over
//! non-crossing partitions whose cycle values live in Q(√(1/γ−1)); the
//! engine's output is asserted rational and can be compared, exactly, with
//! the MANOVA limit moments.

mod field;
mod partitions;

pub use field::QuadExt;
pub use partitions::{
    classify, enumerate_partitions, CycleProfile, Partition, DEFAULT_ORDER_CAP, MAX_ORDER_HARD,
};

use num_traits::{One, Signed, Zero};

use crate::limits::NarayanaTable;
use crate::numerics::{binomial, Rational};

#[derive(Debug, thiserror::Error)]
pub enum MomentsError {
    #[error("moment order {0} outside the supported range {1}")]
    OrderOutOfRange(usize, &'static str),
    #[error("order {0} exceeds the partition cap {MAX_ORDER_HARD}")]
    CapExceeded(usize),
    #[error("this operation needs a finite frame size n in the context")]
    MissingSize,
    #[error("invalid moment context: {0}")]
    Invalid(String),
}

/// The (γ, p) pair every moment formula is written in, with the net
/// redundancy x = 1/γ − 1 kept exact and an optional finite frame size.
#[derive(Clone, Debug)]
pub struct MomentContext {
    gamma: Rational,
    p: Rational,
    x: Rational,
    n: Option<u64>,
}

impl MomentContext {
    pub fn new(gamma: Rational, p: Rational, n: Option<u64>) -> Result<Self, MomentsError> {
        if !gamma.is_positive() || gamma > Rational::one() {
            return Err(MomentsError::Invalid(format!(
                "aspect ratio γ = {gamma} outside (0, 1]"
            )));
        }
        if p.is_negative() || p > Rational::one() {
            return Err(MomentsError::Invalid(format!(
                "selection probability p = {p} outside [0, 1]"
            )));
        }
        if let Some(n) = n {
            if n < 2 {
                return Err(MomentsError::Invalid(format!("frame size n = {n} < 2")));
            }
            let m = &gamma * Rational::from_integer(n.into());
            if !m.is_integer() {
                return Err(MomentsError::Invalid(format!(
                    "γ = {gamma} and n = {n} give a non-integer frame dimension m"
                )));
            }
        }
        let x = gamma.recip() - Rational::one();
        Ok(MomentContext { gamma, p, x, n })
    }

    pub fn gamma(&self) -> &Rational {
        &self.gamma
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    /// Net redundancy x = 1/γ − 1.
    pub fn x(&self) -> &Rational {
        &self.x
    }

    pub fn n(&self) -> Option<u64> {
        self.n
    }

    fn require_n(&self) -> Result<u64, MomentsError> {
        self.n.ok_or(MomentsError::MissingSize)
    }

    fn require_open_gamma(&self) -> Result<(), MomentsError> {
        if self.gamma == Rational::one() {
            return Err(MomentsError::Invalid(
                "asymptotic recursion needs 0 < γ < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Exact base^exp for small nonnegative exponents.
fn rpow(base: &Rational, exp: usize) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Evaluate a polynomial given as coefficients indexed by power.
pub fn eval_poly(coeffs: &[Rational], at: &Rational) -> Rational {
    let mut acc = Rational::zero();
    for c in coeffs.iter().rev() {
        acc = acc * at + c;
    }
    acc
}

/// The cycle-value sequence A₁, A₂, … over Q(√x), x = 1/γ − 1.
///
/// These are the free cumulants of the two-point law (1−γ)δ₋ₐ + γδₐ with
/// a = γ⁻¹/(2√x), the spectral distribution of the centered full-frame
/// Gram. Its R-transform satisfies T² + T = A₁z + a²z², which pins the
/// seeds A₁ = (2 − 1/γ)/(2√x), A₂ = 1 and the signed convolution
/// A_{s+1} = −Σ_{i=1}^{s} A_i A_{s+1−i}. At γ = 1/2 the odd entries vanish
/// and A_{2j+2} = (−1)ʲ·Catalan(j), the cumulant sequence of the free
/// symmetric Bernoulli law.
///
/// The sign on the convolution matters: the unsigned variant also produces
/// A₂ = 1 and Catalan magnitudes at γ = 1/2, but from order 3 on it breaks
/// the exact-moment identities that exhaustive subset enumeration on real
/// ETFs confirms (the unsigned A₃ = +2A₁ gives m₃ a p³ coefficient of
/// x − x² where the verified value is x² − x).
#[derive(Clone, Debug)]
pub struct ASequence {
    gamma: Rational,
    x: Rational,
    values: Vec<QuadExt>,
}

impl ASequence {
    pub fn gamma(&self) -> &Rational {
        &self.gamma
    }

    pub fn x(&self) -> &Rational {
        &self.x
    }

    pub fn max_s(&self) -> usize {
        self.values.len()
    }

    /// A_s, 1-indexed.
    pub fn value(&self, s: usize) -> Result<&QuadExt, MomentsError> {
        if s == 0 || s > self.values.len() {
            return Err(MomentsError::Invalid(format!(
                "A_{s} not computed (have 1..={})",
                self.values.len()
            )));
        }
        Ok(&self.values[s - 1])
    }
}

pub fn a_sequence(gamma: &Rational, max_s: usize) -> Result<ASequence, MomentsError> {
    if !gamma.is_positive() || *gamma >= Rational::one() {
        return Err(MomentsError::Invalid(format!(
            "A-sequence needs 0 < γ < 1, got {gamma}"
        )));
    }
    if max_s < 2 {
        return Err(MomentsError::Invalid(format!(
            "A-sequence needs max_s >= 2, got {max_s}"
        )));
    }
    let x = gamma.recip() - Rational::one();
    // A₁ = (2 − 1/γ)/(2√x), stored as the √x coefficient (2 − 1/γ)/(2x).
    let two = Rational::from_integer(2.into());
    let a1 = QuadExt::from_radical((&two - gamma.recip()) / (&two * &x));
    let minus_one = -Rational::one();
    let mut values = vec![a1, QuadExt::one()];
    while values.len() < max_s {
        let s = values.len();
        let mut next = QuadExt::zero();
        for i in 1..=s {
            next = next.add(&values[i - 1].mul(&values[s - i], &x));
        }
        values.push(next.scale(&minus_one));
    }
    Ok(ASequence {
        gamma: gamma.clone(),
        x,
        values,
    })
}

/// ∏ A_s over the cycles of a non-crossing partition; 0 for crossing ones.
pub fn partition_value(profile: &CycleProfile, a: &ASequence) -> Result<QuadExt, MomentsError> {
    if !profile.is_noncrossing {
        return Ok(QuadExt::zero());
    }
    let mut acc = QuadExt::one();
    for &s in &profile.cycle_lengths {
        acc = acc.mul(a.value(s)?, a.x());
    }
    Ok(acc)
}

/// Centralized asymptotic moment as a polynomial in p: coefficient of p^t is
/// the sum of partition values over Π(r,t). At γ = 1/2 these are the
/// Kesten–McKay moments.
pub fn central_moment(ctx: &MomentContext, r: usize) -> Result<Vec<QuadExt>, MomentsError> {
    ctx.require_open_gamma()?;
    let a = a_sequence(&ctx.gamma, r.max(2))?;
    let mut coeffs = vec![QuadExt::zero(); r + 1];
    partitions::for_each_partition(r, |assignment, t| {
        let profile = partitions::classify_assignment(assignment, t);
        let value = partition_value(&profile, &a)
            .expect("cycle lengths are bounded by the partition order");
        if !value.is_zero() {
            coeffs[t] = coeffs[t].add(&value);
        }
    })?;
    Ok(coeffs)
}

/// Asymptotic sub-frame moment m*_r as a polynomial in p with exact rational
/// coefficients.
///
/// The recursion produces coefficients in Q(√x); parity of the cycle values
/// makes every √x term cancel against the (1/γ−1)^(j/2) prefactors, and the
/// cancellation is asserted on every coefficient rather than assumed.
pub fn asymptotic_moment(ctx: &MomentContext, r: usize) -> Result<Vec<Rational>, MomentsError> {
    ctx.require_open_gamma()?;
    if r == 0 || r > MAX_ORDER_HARD {
        return Err(MomentsError::CapExceeded(r));
    }
    let x = &ctx.x;
    let half_inv_gamma = ctx.gamma.recip() / Rational::from_integer(2.into());
    let mut acc = vec![QuadExt::zero(); r + 1];
    acc[1] = QuadExt::from_rational(rpow(&half_inv_gamma, r));
    for j in 1..=r {
        let central = central_moment(ctx, j)?;
        let radical_power = if j % 2 == 0 {
            QuadExt::from_rational(rpow(x, j / 2))
        } else {
            QuadExt::from_radical(rpow(x, (j - 1) / 2))
        };
        let scale = Rational::from(binomial(r as u64, j as u64)) * rpow(&half_inv_gamma, r - j);
        for t in 1..=j {
            let term = central[t].mul(&radical_power, x).scale(&scale);
            acc[t] = acc[t].add(&term);
        }
    }
    let mut out = vec![Rational::zero(); r + 1];
    for (t, q) in acc.into_iter().enumerate() {
        assert!(
            q.is_rational(),
            "√x coefficient failed to cancel at order {r}, power p^{t}: {q}"
        );
        out[t] = q.u;
    }
    Ok(out)
}

/// MANOVA limit moment m_r(γ,p) = E[tr(G_S^r)]/n, exact.
///
/// The Narayana-polynomial form is expanded termwise so each term carries
/// nonnegative powers of p and 1−p: exact at p ∈ {0, 1} with no division
/// by 1−p.
pub fn manova_moment_exact(gamma: &Rational, p: &Rational, r: usize) -> Rational {
    assert!(r >= 1, "moments are defined for r >= 1");
    let x = gamma.recip() - Rational::one();
    let xp1 = gamma.recip();
    let one = Rational::one();
    let mut m = p * rpow(&xp1, r - 1);
    if r >= 2 {
        let narayana = NarayanaTable::new(r - 1);
        for j in 0..=r - 2 {
            for i in 1..=j + 1 {
                let term = narayana.value(j + 1, i)
                    * rpow(&x, i)
                    * rpow(p, i)
                    * rpow(&(&one - p), 2 + j - i)
                    * rpow(&xp1, r - 2 - j);
                m -= term;
            }
        }
    }
    m
}

/// Per-order comparison of the recursive asymptotic moment with the MANOVA
/// moment at the context's exact (γ, p).
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityVerdict {
    pub r: usize,
    pub recursive: Rational,
    pub manova: Rational,
    pub equal: bool,
}

/// Exact-rational test of m*_r(γ,p) = m_r^MANOVA(γ,p) for r = 1..=r_max.
///
/// Equality for every r is a conjecture; it is known for r ≤ 4 (where the
/// exact finite-n expectations converge to the MANOVA values) and at
/// γ = 1/2, and has been verified symbolically through r = 10.
pub fn manova_identity_check(
    ctx: &MomentContext,
    r_max: usize,
) -> Result<Vec<IdentityVerdict>, MomentsError> {
    let mut out = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let recursive = eval_poly(&asymptotic_moment(ctx, r)?, &ctx.p);
        let manova = manova_moment_exact(&ctx.gamma, &ctx.p, r);
        let equal = recursive == manova;
        out.push(IdentityVerdict {
            r,
            recursive,
            manova,
            equal,
        });
    }
    Ok(out)
}

/// Finite-n correction to the fourth ETF moment; zero for r ≤ 3.
fn delta_term(ctx: &MomentContext, r: usize, n: u64) -> Rational {
    if r != 4 {
        return Rational::zero();
    }
    let one = Rational::one();
    let q = &one - &ctx.p;
    &ctx.p * &ctx.p * &q * &q * &ctx.x * &ctx.x / Rational::from_integer((n - 1).into())
}

/// Exact expected sub-frame moment of an m×n ETF: the MANOVA value plus the
/// finite-n correction, for r = 1..=4.
pub fn etf_expected_moment(ctx: &MomentContext, r: usize) -> Result<Rational, MomentsError> {
    if !(1..=4).contains(&r) {
        return Err(MomentsError::OrderOutOfRange(r, "1..=4"));
    }
    let n = ctx.require_n()?;
    Ok(manova_moment_exact(&ctx.gamma, &ctx.p, r) + delta_term(ctx, r, n))
}

/// Exact variance of the sub-frame moment tr(G_S^r)/n, r = 1..=2.
///
/// The first-order value (p − p²)/n holds for every unit-norm frame (the
/// trace of the subset Gram is just the subset size); the second-order value
/// is specific to ETFs.
pub fn etf_moment_variance(ctx: &MomentContext, r: usize) -> Result<Rational, MomentsError> {
    if !(1..=2).contains(&r) {
        return Err(MomentsError::OrderOutOfRange(r, "1..=2"));
    }
    let n = ctx.require_n()?;
    let nr = Rational::from_integer(n.into());
    let p = &ctx.p;
    let x = &ctx.x;
    let one = Rational::one();
    if r == 1 {
        return Ok((p - p * p) / nr);
    }
    let nm1 = Rational::from_integer((n - 1).into());
    let i = |k: i64| Rational::from_integer(k.into());
    let t2 = -&one + i(4) * x + i(2) * x * x / &nm1;
    let t3 = i(4) * x * (-&one + x * (&nr - i(2)) / &nm1);
    let t4 = x * x * (i(6) - i(4) * &nr) / &nm1;
    let p2 = p * p;
    let p3 = &p2 * p;
    let p4 = &p2 * &p2;
    Ok((p + t2 * p2 + t3 * p3 + t4 * p4) / nr)
}

/// Lower bound on the expected sub-frame moment of ANY unit-norm frame for
/// r = 2, 3, 4: the ETF value, whether or not an ETF exists at (m, n).
/// Equality holds at r = 2, 3 exactly for tight frames and at r = 4 exactly
/// for ETFs.
pub fn ewb_bound(ctx: &MomentContext, r: usize) -> Result<Rational, MomentsError> {
    if !(2..=4).contains(&r) {
        return Err(MomentsError::OrderOutOfRange(r, "2..=4"));
    }
    etf_expected_moment(ctx, r)
}

/// Closed-form lower bounds on the asymptotic empirical spectral variance
/// (any unit-norm frame) and kurtosis (tight frames) of the sub-frame ESD.
/// Both are attained by ETFs.
pub fn esv_esk_bounds(ctx: &MomentContext) -> Result<(Rational, Rational), MomentsError> {
    let p = &ctx.p;
    let one = Rational::one();
    if !p.is_positive() || *p >= one {
        return Err(MomentsError::Invalid(format!(
            "ESV/ESK bounds need 0 < p < 1, got p = {p}"
        )));
    }
    let x = &ctx.x;
    let i = |k: i64| Rational::from_integer(k.into());
    let esv = p + (x - &one) * p * p;
    let x2 = x * x;
    let x3 = &x2 * x;
    let x4 = &x2 * &x2;
    let p2 = p * p;
    let p3 = &p2 * p;
    let p4 = &p2 * &p2;
    let num = p
        + (i(6) * x - i(4)) * &p2
        + (i(6) * &x2 - i(16) * x + i(6)) * &p3
        + (&x3 - i(7) * &x2 + i(11) * x - i(3)) * &p4;
    let den = (&x4 + i(2) * &x2 + &one) * &p2 - (i(2) * &x2 + i(2)) * &p3 + &p4;
    Ok((esv, num / den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{self, FamilyParams};
    use crate::limits::LimitLaw;
    use crate::numerics::{loglog_fit, rat, rational_to_f64, NeumaierSum, RngStream};
    use crate::subsets::{exact_low_moment_stats_bernoulli, exact_moment_stats, SelectionModel};

    fn ctx(gamma: Rational, p: Rational, n: Option<u64>) -> MomentContext {
        MomentContext::new(gamma, p, n).unwrap()
    }

    #[test]
    fn a_sequence_at_half_gamma_gives_signed_catalans() {
        let a = a_sequence(&rat(1, 2), 8).unwrap();
        let want = [0i64, 1, 0, -1, 0, 2, 0, -5];
        for (s, w) in want.iter().enumerate() {
            assert_eq!(
                a.value(s + 1).unwrap(),
                &QuadExt::from_rational(rat(*w, 1)),
                "A_{}",
                s + 1
            );
        }
    }

    #[test]
    fn a_sequence_general_gamma() {
        // A₃ = −2A₁A₂ = −2A₁, and entries alternate between pure-rational
        // and pure-radical parity.
        for g in [rat(1, 3), rat(2, 5), rat(3, 4), rat(1, 5)] {
            let a = a_sequence(&g, 9).unwrap();
            assert_eq!(a.value(2).unwrap(), &QuadExt::one());
            assert_eq!(a.value(3).unwrap(), &a.value(1).unwrap().scale(&rat(-2, 1)));
            for s in 1..=9 {
                let v = a.value(s).unwrap();
                if s % 2 == 0 {
                    assert!(v.v.is_zero(), "A_{s} should be rational at γ={g}");
                } else {
                    assert!(v.u.is_zero(), "A_{s} should be a pure radical at γ={g}");
                }
            }
        }
        assert!(a_sequence(&rat(1, 2), 1).is_err());
        assert!(a_sequence(&rat(1, 1), 4).is_err());
        assert!(a_sequence(&rat(-1, 2), 4).is_err());
    }

    #[test]
    fn partition_values_pinned() {
        let a = a_sequence(&rat(1, 3), 5).unwrap();
        let x = a.x().clone();
        // (12,35,4) → A₁A₂² = A₁.
        let pi = enumerate_partitions(5, 3)
            .unwrap()
            .into_iter()
            .find(|p| p.block_of() == [0, 0, 1, 2, 1])
            .unwrap();
        let profile = classify(&pi);
        assert_eq!(profile.cycle_lengths, vec![1, 2, 2]);
        let a1 = a.value(1).unwrap().clone();
        assert_eq!(partition_value(&profile, &a).unwrap(), a1);
        // Whole set of [3] → A₁³.
        let whole = enumerate_partitions(3, 1).unwrap().remove(0);
        let a1cubed = a1.mul(&a1, &x).mul(&a1, &x);
        assert_eq!(partition_value(&classify(&whole), &a).unwrap(), a1cubed);
        // Crossing → 0.
        let crossing = enumerate_partitions(4, 2)
            .unwrap()
            .into_iter()
            .find(|p| p.block_of() == [0, 1, 0, 1])
            .unwrap();
        assert!(partition_value(&classify(&crossing), &a)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn central_moments_small_orders() {
        let c = ctx(rat(1, 3), rat(1, 2), None);
        let a = a_sequence(&rat(1, 3), 2).unwrap();
        let a1 = a.value(1).unwrap().clone();
        let m1 = central_moment(&c, 1).unwrap();
        assert_eq!(m1[1], a1);
        let m2 = central_moment(&c, 2).unwrap();
        assert_eq!(m2[1], a1.mul(&a1, a.x()));
        assert_eq!(m2[2], QuadExt::one());
        // γ = 1/2: A₁ = 0, so the central second moment is exactly p².
        let ch = ctx(rat(1, 2), rat(1, 2), None);
        let m2h = central_moment(&ch, 2).unwrap();
        assert!(m2h[1].is_zero());
        assert_eq!(m2h[2], QuadExt::one());
    }

    #[test]
    fn asymptotic_moments_match_closed_forms() {
        for g in [rat(1, 4), rat(1, 3), rat(1, 2), rat(2, 3), rat(1, 5)] {
            let c = ctx(g.clone(), rat(1, 2), None);
            let x = c.x().clone();
            let one = Rational::one();
            let m1 = asymptotic_moment(&c, 1).unwrap();
            assert_eq!(m1, vec![Rational::zero(), one.clone()]);
            let m2 = asymptotic_moment(&c, 2).unwrap();
            assert_eq!(m2, vec![Rational::zero(), one.clone(), x.clone()]);
            let m3 = asymptotic_moment(&c, 3).unwrap();
            assert_eq!(
                m3,
                vec![
                    Rational::zero(),
                    one.clone(),
                    rat(3, 1) * &x,
                    &x * &x - &x,
                ]
            );
            let m4 = asymptotic_moment(&c, 4).unwrap();
            let x2 = &x * &x;
            let x3 = &x2 * &x;
            assert_eq!(
                m4,
                vec![
                    Rational::zero(),
                    one,
                    rat(6, 1) * &x,
                    rat(6, 1) * &x2 - rat(4, 1) * &x,
                    x3 - rat(3, 1) * &x2 + &x,
                ]
            );
        }
    }

    #[test]
    fn rationality_holds_through_order_eight() {
        // The assert inside asymptotic_moment is the check; γ = 1/5 makes
        // x = 4 a perfect square, exercising that representation too.
        for g in [rat(1, 4), rat(1, 3), rat(1, 2), rat(2, 3), rat(1, 5), rat(5, 9)] {
            let c = ctx(g, rat(1, 2), None);
            for r in 1..=8 {
                asymptotic_moment(&c, r).unwrap();
            }
        }
    }

    #[test]
    fn identity_with_manova_moments() {
        for (g, p) in [
            (rat(1, 3), rat(1, 4)),
            (rat(1, 2), rat(2, 3)),
            (rat(2, 3), rat(1, 5)),
            (rat(1, 4), rat(1, 1)),
        ] {
            let c = ctx(g.clone(), p.clone(), None);
            for v in manova_identity_check(&c, 8).unwrap() {
                assert!(
                    v.equal,
                    "γ={g}, p={p}, r={}: {} vs {}",
                    v.r, v.recursive, v.manova
                );
            }
        }
    }

    #[test]
    fn manova_moment_matches_float_law() {
        for (g, p) in [(rat(1, 2), rat(1, 3)), (rat(1, 4), rat(3, 4)), (rat(2, 5), rat(1, 1))] {
            let gamma = rational_to_f64(&g);
            let beta = rational_to_f64(&(&p / &g));
            let law = LimitLaw::manova(gamma, beta).unwrap();
            for r in 1..=6 {
                let exact = rational_to_f64(&(manova_moment_exact(&g, &p, r) / &p));
                assert!(
                    (exact - law.moment(r)).abs() < 1e-12,
                    "per-eigenvalue moment mismatch at γ={g}, p={p}, r={r}"
                );
            }
        }
    }

    #[test]
    fn etf_expected_moment_pinned_values() {
        // r = 1 is p for every context.
        let c = ctx(rat(1, 2), rat(2, 7), Some(6));
        assert_eq!(etf_expected_moment(&c, 1).unwrap(), rat(2, 7));
        // x = 4/3 (the 3×7 geometry), p = 1/2: m₂ = 5/6.
        let c = ctx(rat(3, 7), rat(1, 2), Some(7));
        assert_eq!(etf_expected_moment(&c, 2).unwrap(), rat(5, 6));
        // x = 1, p = 1/2, n = 6: the MANOVA value 35/16 plus Δ = 1/80.
        let c = ctx(rat(1, 2), rat(1, 2), Some(6));
        assert_eq!(etf_expected_moment(&c, 4).unwrap(), rat(11, 5));
        assert!(etf_expected_moment(&c, 5).is_err());
        assert!(etf_expected_moment(&c, 0).is_err());
        let no_n = ctx(rat(1, 2), rat(1, 2), None);
        assert!(matches!(
            etf_expected_moment(&no_n, 2),
            Err(MomentsError::MissingSize)
        ));
    }

    #[test]
    fn expected_moments_match_enumeration_on_dss7() {
        let frame = frames::build(&FamilyParams::DssQr { q: 7 }).unwrap();
        assert!(frame.diagnostics().is_etf);
        for (pn, pd) in [(1i64, 4i64), (1, 2), (3, 4)] {
            let c = ctx(rat(3, 7), rat(pn, pd), Some(7));
            let stats = exact_moment_stats(
                &frame,
                &SelectionModel::Bern {
                    p: pn as f64 / pd as f64,
                },
                4,
            )
            .unwrap();
            for r in 1..=4 {
                let want = rational_to_f64(&etf_expected_moment(&c, r).unwrap());
                assert!(
                    (stats[r - 1].mean - want).abs() < 1e-12,
                    "r={r}, p={pn}/{pd}: enumeration {} vs formula {want}",
                    stats[r - 1].mean
                );
            }
        }
    }

    #[test]
    fn variances_pinned_and_against_enumeration() {
        let c = ctx(rat(3, 7), rat(1, 2), Some(7));
        assert_eq!(etf_moment_variance(&c, 1).unwrap(), rat(1, 28));
        for p in [rat(0, 1), rat(1, 1)] {
            let c = ctx(rat(3, 7), p, Some(7));
            assert_eq!(etf_moment_variance(&c, 1).unwrap(), rat(0, 1));
            assert_eq!(etf_moment_variance(&c, 2).unwrap(), rat(0, 1));
        }
        assert!(etf_moment_variance(&c, 3).is_err());

        // Both variances against exhaustive enumeration on the 3×7 ETF.
        let frame = frames::build(&FamilyParams::DssQr { q: 7 }).unwrap();
        let stats = exact_low_moment_stats_bernoulli(&frame, 0.5).unwrap();
        for r in 1..=2 {
            let want = rational_to_f64(&etf_moment_variance(&c, r).unwrap());
            assert!(
                (stats[r - 1].variance - want).abs() < 1e-12,
                "V_{r}: enumeration {} vs formula {want}",
                stats[r - 1].variance
            );
        }

        // V₁ is frame-independent: check it on a decidedly non-ETF frame.
        let gauss = frames::build(&FamilyParams::IidGaussian {
            m: 3,
            n: 6,
            seed: 11,
        })
        .unwrap();
        let gstats = exact_low_moment_stats_bernoulli(&gauss, 0.3).unwrap();
        let cg = ctx(rat(1, 2), rat(3, 10), Some(6));
        let want = rational_to_f64(&etf_moment_variance(&cg, 1).unwrap());
        assert!((gstats[0].variance - want).abs() < 1e-12);
    }

    #[test]
    fn ewb_bound_edges() {
        // r = 2 at p = 1 is the classical mean-squared Welch bound 1 + x.
        let c = ctx(rat(1, 2), rat(1, 1), Some(8));
        assert_eq!(ewb_bound(&c, 2).unwrap(), rat(2, 1));
        assert!(ewb_bound(&c, 1).is_err());
        assert!(ewb_bound(&c, 5).is_err());

        // Repetition frame [I I]: tight but not equiangular, so the r = 2
        // bound is met with equality and the r = 4 bound is strict.
        let rep = frames::build(&FamilyParams::UnionBases { m: 3, copies: 2 }).unwrap();
        assert!(rep.diagnostics().is_tight && !rep.diagnostics().is_etf);
        let stats =
            exact_moment_stats(&rep, &SelectionModel::Bern { p: 0.5 }, 4).unwrap();
        let c = ctx(rat(1, 2), rat(1, 2), Some(6));
        let b2 = rational_to_f64(&ewb_bound(&c, 2).unwrap());
        let b4 = rational_to_f64(&ewb_bound(&c, 4).unwrap());
        assert!((stats[1].mean - b2).abs() < 1e-12);
        assert!(stats[3].mean > b4 + 1e-6);
    }

    #[test]
    fn esv_esk_pinned_values() {
        // x = 1: the ESV bound collapses to p.
        let c = ctx(rat(1, 2), rat(3, 10), None);
        let (esv, _) = esv_esk_bounds(&c).unwrap();
        assert_eq!(esv, rat(3, 10));
        // γ = 1/2, p = 1/2: ESK bound is 10/9.
        let c = ctx(rat(1, 2), rat(1, 2), None);
        let (esv, esk) = esv_esk_bounds(&c).unwrap();
        assert_eq!(esv, rat(1, 2));
        assert_eq!(esk, rat(10, 9));
        // Small p: bound goes to zero; endpoints are rejected.
        let c = ctx(rat(1, 2), rat(1, 1000), None);
        let (esv, _) = esv_esk_bounds(&c).unwrap();
        assert!(esv < rat(1, 500));
        assert!(esv_esk_bounds(&ctx(rat(1, 2), rat(0, 1), None)).is_err());
        assert!(esv_esk_bounds(&ctx(rat(1, 2), rat(1, 1), None)).is_err());
    }

    #[test]
    fn context_validation() {
        assert!(MomentContext::new(rat(0, 1), rat(1, 2), None).is_err());
        assert!(MomentContext::new(rat(3, 2), rat(1, 2), None).is_err());
        assert!(MomentContext::new(rat(1, 2), rat(-1, 2), None).is_err());
        assert!(MomentContext::new(rat(1, 2), rat(3, 2), None).is_err());
        assert!(MomentContext::new(rat(1, 2), rat(1, 2), Some(1)).is_err());
        // γn must be an integer dimension.
        assert!(MomentContext::new(rat(1, 2), rat(1, 2), Some(7)).is_err());
        assert!(MomentContext::new(rat(1, 2), rat(1, 2), Some(8)).is_ok());
        // γ = 1 contexts are fine for finite-n formulas but not the engine.
        let c = ctx(rat(1, 1), rat(1, 2), Some(4));
        assert_eq!(etf_expected_moment(&c, 3).unwrap(), rat(1, 2));
        assert!(asymptotic_moment(&c, 2).is_err());
    }

    /// Monte-Carlo variance of the second sub-frame moment.
    fn mc_m2_variance(frame: &frames::Frame, p: f64, trials: usize, seed: u64) -> f64 {
        let g = frame.matrix().gram();
        let n = frame.n();
        let model = SelectionModel::Bern { p };
        let mut rng = RngStream::new(seed, 0);
        let mut acc = NeumaierSum::new();
        let mut acc2 = NeumaierSum::new();
        for _ in 0..trials {
            let cols = model.draw(n, &mut rng);
            let mut t = 0.0;
            for &i in &cols {
                for &j in &cols {
                    t += g[(i, j)].norm_sqr();
                }
            }
            let v = t / n as f64;
            acc.add(v);
            acc2.add(v * v);
        }
        let tf = trials as f64;
        let mean = acc.total() / tf;
        (acc2.total() / tf - mean * mean) * tf / (tf - 1.0)
    }

    #[test]
    fn m2_variance_decays_like_one_over_n() {
        // Exhaustive for the small difference-set ETFs, Monte Carlo above
        // the Gray-walk budget; the fitted slope of ln V₂ against ln n
        // should sit near −1.
        let mut sizes = Vec::new();
        let mut variances = Vec::new();
        for q in [7usize, 11, 19] {
            let frame = frames::build(&FamilyParams::DssQr { q }).unwrap();
            let stats = exact_low_moment_stats_bernoulli(&frame, 0.4).unwrap();
            sizes.push(q as f64);
            variances.push(stats[1].variance);
        }
        for q in [23usize, 31] {
            let frame = frames::build(&FamilyParams::DssQr { q }).unwrap();
            sizes.push(q as f64);
            variances.push(mc_m2_variance(&frame, 0.4, 20_000, 0x5eed));
        }
        let fit = loglog_fit(&sizes, &variances).unwrap();
        assert!(
            (-1.3..=-0.7).contains(&fit.slope),
            "slope {} outside [-1.3, -0.7]",
            fit.slope
        );
    }
}
