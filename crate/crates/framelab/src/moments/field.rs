//! Exact arithmetic in the quadratic extension Q(√x).
//!
//! The recursive moment engine works with numbers of the form u + v·√x
//! where x = 1/γ − 1 and u, v are rationals. Keeping the √x part symbolic
//! (instead of as a float) is what turns the MANOVA identity check into a
//! true identity test: the engine's output is rational exactly when the
//! v part cancels to zero, and that cancellation is asserted, not assumed.

use std::fmt;

use num_traits::{One, Zero};

use crate::numerics::Rational;

/// u + v·√x. The radicand x is not stored per element; multiplication takes
/// it as an argument, and all elements combined in one computation must share
/// the same x.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadExt {
    pub u: Rational,
    pub v: Rational,
}

impl QuadExt {
    pub fn zero() -> Self {
        QuadExt {
            u: Rational::zero(),
            v: Rational::zero(),
        }
    }

    pub fn one() -> Self {
        QuadExt {
            u: Rational::one(),
            v: Rational::zero(),
        }
    }

    pub fn from_rational(u: Rational) -> Self {
        QuadExt {
            u,
            v: Rational::zero(),
        }
    }

    /// v·√x with no rational part.
    pub fn from_radical(v: Rational) -> Self {
        QuadExt {
            u: Rational::zero(),
            v,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    /// True when the √x coefficient is exactly zero.
    pub fn is_rational(&self) -> bool {
        self.v.is_zero()
    }

    pub fn add(&self, rhs: &QuadExt) -> QuadExt {
        QuadExt {
            u: &self.u + &rhs.u,
            v: &self.v + &rhs.v,
        }
    }

    pub fn sub(&self, rhs: &QuadExt) -> QuadExt {
        QuadExt {
            u: &self.u - &rhs.u,
            v: &self.v - &rhs.v,
        }
    }

    /// (u₁ + v₁√x)(u₂ + v₂√x) = (u₁u₂ + v₁v₂x) + (u₁v₂ + u₂v₁)√x.
    pub fn mul(&self, rhs: &QuadExt, x: &Rational) -> QuadExt {
        QuadExt {
            u: &self.u * &rhs.u + &self.v * &rhs.v * x,
            v: &self.u * &rhs.v + &rhs.u * &self.v,
        }
    }

    pub fn scale(&self, c: &Rational) -> QuadExt {
        QuadExt {
            u: &self.u * c,
            v: &self.v * c,
        }
    }
}

impl fmt::Display for QuadExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.v.is_zero() {
            write!(f, "{}", self.u)
        } else if self.u.is_zero() {
            write!(f, "{}·√x", self.v)
        } else {
            write!(f, "{} + {}·√x", self.u, self.v)
        }
    }
}
