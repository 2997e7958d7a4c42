//! Quadrature for spectral densities with square-root edges.

use std::f64::consts::FRAC_PI_2;

use super::NumericsError;

/// Integrate `f` over `[lo, hi]` where `f` may blow up like an inverse
/// square root at either endpoint (the generic spectral-edge behavior).
///
/// The substitution `x = lo + (hi-lo) sin²θ` maps the interval to
/// `[0, π/2]` and turns √-type edge factors into smooth functions of θ, so
/// composite Simpson converges fast. Panels double from 2¹⁴ until two
/// successive estimates agree within `abs_tol`.
pub fn integrate_edge_singular(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    abs_tol: f64,
) -> Result<f64, NumericsError> {
    if !lo.is_finite() || !hi.is_finite() || !(abs_tol > 0.0) {
        return Err(NumericsError::Invalid(
            "quadrature needs finite bounds and a positive tolerance".into(),
        ));
    }
    if hi <= lo {
        return Ok(0.0);
    }
    let width = hi - lo;
    // Endpoints are nudged inward: at an integrable 1/√ edge the transformed
    // integrand has a finite nonzero limit, which a literal θ = 0 evaluation
    // would turn into 0·inf.
    let g = |theta: f64| {
        let t = theta.clamp(1e-12, FRAC_PI_2 - 1e-12);
        let s = t.sin();
        f(lo + width * s * s) * width * (2.0 * t).sin()
    };
    let mut panels: usize = 1 << 14;
    let mut prev = simpson(&g, panels);
    if !prev.is_finite() {
        return Err(NumericsError::NonFinite("integrand"));
    }
    for _ in 0..7 {
        panels *= 2;
        let next = simpson(&g, panels);
        if !next.is_finite() {
            return Err(NumericsError::NonFinite("integrand"));
        }
        if (next - prev).abs() <= abs_tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(NumericsError::NoConvergence("panel-doubling quadrature"))
}

fn simpson(g: &impl Fn(f64) -> f64, panels: usize) -> f64 {
    let h = FRAC_PI_2 / panels as f64;
    let mut s = g(0.0) + g(FRAC_PI_2);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(i as f64 * h);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semicircle_mass() {
        // ∫₀² √(x(2-x))/π dx = 1/2.
        let v = integrate_edge_singular(|x| (x * (2.0 - x)).sqrt() / std::f64::consts::PI, 0.0, 2.0, 1e-10)
            .unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn inverse_sqrt_edge() {
        // ∫₀¹ x^{-1/2} dx = 2, singular at the left edge.
        let v = integrate_edge_singular(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn smooth_integrand() {
        let v = integrate_edge_singular(f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate_edge_singular(|_| 1.0, 3.0, 3.0, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn marchenko_pastur_normalizes() {
        // β = 1/2: density √((λ₊-x)(x-λ₋))/(2πβx) on [λ₋, λ₊] has mass 1.
        let beta: f64 = 0.5;
        let (lm, lp) = ((1.0 - beta.sqrt()).powi(2), (1.0 + beta.sqrt()).powi(2));
        let f = |x: f64| ((lp - x) * (x - lm)).sqrt() / (2.0 * std::f64::consts::PI * beta * x);
        let v = integrate_edge_singular(f, lm, lp, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }
}
