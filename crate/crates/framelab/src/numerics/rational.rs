//! Exact rational arithmetic helpers.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::NumericsError;

/// Arbitrary-precision rational; every exact moment identity in the crate is
/// stated over this type.
pub type Rational = num_rational::BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Binomial coefficient, exact.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    // Multiply before dividing: each prefix is itself a binomial, so the
    // division is exact at every step.
    for i in 0..k {
        acc *= BigInt::from(n - i);
        acc /= BigInt::from(i + 1);
    }
    acc
}

/// Catalan number C_j = binom(2j, j)/(j+1).
pub fn catalan(j: u64) -> BigInt {
    binomial(2 * j, j) / BigInt::from(j + 1)
}

/// Parse `"a/b"` or `"a"`.
pub fn parse_rational(s: &str) -> Result<Rational, NumericsError> {
    let bad = || NumericsError::Invalid(format!("cannot parse rational from {s:?}"));
    let mut parts = s.trim().splitn(2, '/');
    let numer: BigInt = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    match parts.next() {
        None => Ok(Rational::from_integer(numer)),
        Some(d) => {
            let denom: BigInt = d.trim().parse().map_err(|_| bad())?;
            if denom.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(numer, denom))
        }
    }
}

/// Render as `"a/b"`, or `"a"` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), BigInt::from(120));
        assert_eq!(binomial(0, 0), BigInt::one());
        assert_eq!(binomial(5, 6), BigInt::zero());
        assert_eq!(binomial(52, 26).to_string(), "495918532948104");
    }

    #[test]
    fn catalans() {
        let want = [1u64, 1, 2, 5, 14, 42, 132, 429];
        for (j, w) in want.iter().enumerate() {
            assert_eq!(catalan(j as u64), BigInt::from(*w));
        }
    }

    #[test]
    fn parse_and_format_roundtrip() {
        for s in ["3/4", "-7/5", "12", "0", "-3"] {
            let r = parse_rational(s).unwrap();
            assert_eq!(format_rational(&r), s);
        }
        assert_eq!(format_rational(&parse_rational("6/8").unwrap()), "3/4");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn to_f64() {
        assert_eq!(rational_to_f64(&rat(3, 4)), 0.75);
        assert_eq!(rational_to_f64(&rat(-1, 2)), -0.5);
    }
}
