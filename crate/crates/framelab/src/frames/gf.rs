//! Small finite fields GF(p^e) and their quadratic character.
//!
//! Elements are indexed 0..q-1; the index's base-p digits are the
//! coefficients of the residue polynomial. Fields here are tiny (Paley
//! constructions), so arithmetic works digit-by-digit with no tables.

use super::FrameError;

#[derive(Clone, Debug)]
pub struct SmallField {
    p: u64,
    e: u32,
    q: u64,
    /// Monic irreducible of degree e over F_p, lowest-degree coefficient
    /// first, length e+1. Unused (empty) when e = 1.
    irr: Vec<u64>,
}

impl SmallField {
    pub fn new(q: u64) -> Result<Self, FrameError> {
        let (p, e) = prime_power(q).ok_or_else(|| {
            FrameError::Invalid(format!("{q} is not a prime power"))
        })?;
        let irr = if e == 1 {
            vec![]
        } else {
            find_irreducible(p, e)
        };
        Ok(SmallField { p, e, q, irr })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    fn to_poly(&self, x: u64) -> Vec<u64> {
        let mut digits = vec![0; self.e as usize];
        let mut x = x;
        for d in digits.iter_mut() {
            *d = x % self.p;
            x /= self.p;
        }
        digits
    }

    fn from_poly(&self, poly: &[u64]) -> u64 {
        let mut x = 0;
        for &d in poly.iter().rev() {
            x = x * self.p + d;
        }
        x
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        if self.e == 1 {
            return (a + b) % self.p;
        }
        let (pa, pb) = (self.to_poly(a), self.to_poly(b));
        let sum: Vec<u64> = pa.iter().zip(&pb).map(|(x, y)| (x + y) % self.p).collect();
        self.from_poly(&sum)
    }

    pub fn neg(&self, a: u64) -> u64 {
        if self.e == 1 {
            return (self.p - a) % self.p;
        }
        let pa = self.to_poly(a);
        let neg: Vec<u64> = pa.iter().map(|x| (self.p - x) % self.p).collect();
        self.from_poly(&neg)
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.e == 1 {
            return a * b % self.p;
        }
        let (pa, pb) = (self.to_poly(a), self.to_poly(b));
        let mut prod = vec![0u64; 2 * self.e as usize - 1];
        for (i, x) in pa.iter().enumerate() {
            for (j, y) in pb.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % self.p;
            }
        }
        // Reduce modulo the irreducible polynomial.
        for i in (self.e as usize..prod.len()).rev() {
            let c = prod[i];
            if c == 0 {
                continue;
            }
            prod[i] = 0;
            for (j, &m) in self.irr.iter().enumerate().take(self.e as usize) {
                let idx = i - self.e as usize + j;
                prod[idx] = (prod[idx] + c * (self.p - m)) % self.p;
            }
        }
        self.from_poly(&prod[..self.e as usize])
    }

    pub fn pow(&self, a: u64, mut k: u64) -> u64 {
        let mut base = a;
        let mut acc = 1;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    /// Quadratic character: 0 at 0, +1 on nonzero squares, -1 otherwise.
    /// For q ≡ 1 (mod 4) it is even, for q ≡ 3 (mod 4) odd.
    pub fn chi(&self, a: u64) -> i32 {
        if a == 0 {
            0
        } else if self.pow(a, (self.q - 1) / 2) == 1 {
            1
        } else {
            -1
        }
    }
}

fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 0;
    for cand in 2..=q {
        if q % cand == 0 {
            p = cand;
            break;
        }
    }
    let mut rest = q;
    let mut e = 0;
    while rest % p == 0 {
        rest /= p;
        e += 1;
    }
    (rest == 1).then_some((p, e))
}

/// First monic irreducible of degree e over F_p in lexicographic order of
/// the non-leading coefficients (deterministic, so field arithmetic is
/// stable across runs).
fn find_irreducible(p: u64, e: u32) -> Vec<u64> {
    let e = e as usize;
    let count = (0..e).fold(1u64, |acc, _| acc * p);
    for code in 0..count {
        let mut poly = vec![0u64; e + 1];
        let mut c = code;
        for d in poly.iter_mut().take(e) {
            *d = c % p;
            c /= p;
        }
        poly[e] = 1;
        if is_irreducible(&poly, p) {
            poly.truncate(e); // leading 1 is implicit
            return poly;
        }
    }
    unreachable!("irreducible polynomials of every degree exist over F_p")
}

/// Trial division by all monic polynomials of degree 1..=deg/2.
fn is_irreducible(poly: &[u64], p: u64) -> bool {
    let deg = poly.len() - 1;
    for d in 1..=deg / 2 {
        let count = (0..d).fold(1u64, |acc, _| acc * p);
        for code in 0..count {
            let mut div = vec![0u64; d + 1];
            let mut c = code;
            for x in div.iter_mut().take(d) {
                *x = c % p;
                c /= p;
            }
            div[d] = 1;
            if poly_rem_is_zero(poly, &div, p) {
                return false;
            }
        }
    }
    true
}

fn poly_rem_is_zero(num: &[u64], div: &[u64], p: u64) -> bool {
    let mut rem = num.to_vec();
    let d = div.len() - 1;
    while rem.len() > d {
        let lead = *rem.last().unwrap();
        if lead != 0 {
            let off = rem.len() - 1 - d;
            for (j, &m) in div.iter().enumerate() {
                rem[off + j] = (rem[off + j] + lead * (p - m) % p) % p;
            }
        }
        rem.pop();
    }
    rem.iter().all(|&x| x == 0)
}
