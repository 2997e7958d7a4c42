//! Builders for the individual frame families.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::gf::SmallField;
use super::{unit_frame_from_gram, DifferenceSet, FamilyParams, Frame, FrameError};
use crate::numerics::{qr, CMat, RngStream};

pub(super) fn build_frame(params: &FamilyParams) -> Result<Frame, FrameError> {
    let mat = match params {
        FamilyParams::Lpf { m, n } => lpf(*m, *n)?,
        FamilyParams::DssQr { q } => dss(&DifferenceSet::quadratic_residues(*q)?)?,
        FamilyParams::DssSet { set } => dss(set)?,
        FamilyParams::PaleyReal { q } => paley_real(*q)?,
        FamilyParams::PaleyComplex { q } => paley_complex(*q)?,
        FamilyParams::SteinerPairs { v } => steiner_pairs(*v)?,
        FamilyParams::SpikesFourier { m } => spikes_fourier(*m)?,
        FamilyParams::SpikesHadamard { m } => spikes_hadamard(*m)?,
        FamilyParams::UnionBases { m, copies } => union_bases(*m, *copies)?,
        FamilyParams::IidGaussian { m, n, seed } => iid_gaussian(*m, *n, *seed)?,
        FamilyParams::Haar { m, n, seed } => haar(*m, *n, *seed)?,
        FamilyParams::RandDft { m, n, seed } => rand_dft(*m, *n, *seed)?,
        FamilyParams::RandDct { m, n, seed } => rand_dct(*m, *n, *seed)?,
        FamilyParams::Custom { label } => {
            return Err(FrameError::Invalid(format!(
                "custom frame {label:?} cannot be rebuilt from parameters"
            )))
        }
    };
    Frame::new(mat, params.clone())
}

fn check_dims(m: usize, n: usize) -> Result<(), FrameError> {
    if m == 0 || m > n {
        return Err(FrameError::Invalid(format!(
            "need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    Ok(())
}

/// Unimodular entry `exp(-2πi k/n)/√m` with the angle reduced first.
fn dft_entry(k: usize, n: usize, m: usize) -> Complex64 {
    Complex64::from_polar(1.0 / (m as f64).sqrt(), -TAU * (k % n) as f64 / n as f64)
}

fn lpf(m: usize, n: usize) -> Result<CMat, FrameError> {
    check_dims(m, n)?;
    // Rows 1..m of the DFT; row 0 (all ones) is excluded, matching the
    // convention where m = n recovers the full unitary DFT via rows 1..n.
    Ok(CMat::from_fn(m, n, |r, t| dft_entry((r + 1) * t, n, m)))
}

fn dss(set: &DifferenceSet) -> Result<CMat, FrameError> {
    match set.validate()? {
        Some(_) => {}
        None => {
            return Err(FrameError::Invalid(format!(
                "{:?} mod {} is not a difference set",
                set.elements, set.modulus
            )))
        }
    }
    let n = set.modulus;
    let m = set.elements.len();
    check_dims(m, n)?;
    let mut rows = set.elements.clone();
    rows.sort_unstable();
    Ok(CMat::from_fn(m, n, |r, t| dft_entry(rows[r] * t, n, m)))
}

/// Symmetric (q ≡ 1 mod 4) or skew (q ≡ 3 mod 4) Paley conference matrix of
/// order q+1; index 0 plays the point at infinity.
fn paley_conference(field: &SmallField, skew: bool) -> CMat {
    let q = field.q() as usize;
    CMat::from_real_fn(q + 1, q + 1, |i, j| {
        if i == j {
            0.0
        } else if i == 0 {
            1.0
        } else if j == 0 {
            if skew {
                -1.0
            } else {
                1.0
            }
        } else {
            f64::from(field.chi(field.sub(i as u64 - 1, j as u64 - 1)))
        }
    })
}

fn paley_real(q: usize) -> Result<CMat, FrameError> {
    if q % 4 != 1 {
        return Err(FrameError::Invalid(format!(
            "real Paley frames need a prime power q ≡ 1 (mod 4), got {q}; \
             for q ≡ 3 (mod 4) use paley_complex"
        )));
    }
    let field = SmallField::new(q as u64)?;
    let c = paley_conference(&field, false);
    let g = CMat::identity(q + 1).add(&c.scale(Complex64::new(1.0 / (q as f64).sqrt(), 0.0)));
    let mat = unit_frame_from_gram(&g)?;
    debug_assert_eq!(mat.rows(), (q + 1) / 2);
    Ok(mat)
}

fn paley_complex(q: usize) -> Result<CMat, FrameError> {
    if q % 4 != 3 {
        return Err(FrameError::Invalid(format!(
            "complex Paley frames need a prime power q ≡ 3 (mod 4), got {q}; \
             for q ≡ 1 (mod 4) use paley_real"
        )));
    }
    let field = SmallField::new(q as u64)?;
    let c = paley_conference(&field, true);
    // iC is Hermitian with (iC)² = qI, so I + iC/√q is a rank-(q+1)/2 Gram.
    let s = CMat::from_fn(q + 1, q + 1, |i, j| Complex64::new(0.0, 1.0) * c[(i, j)]);
    let g = CMat::identity(q + 1).add(&s.scale(Complex64::new(1.0 / (q as f64).sqrt(), 0.0)));
    let mat = unit_frame_from_gram(&g)?;
    debug_assert_eq!(mat.rows(), (q + 1) / 2);
    Ok(mat)
}

/// Steiner ETF over the complete pair design: blocks are the v(v-1)/2 pairs,
/// each point contributes v columns patterned by the nonzero rows of the
/// v-point DFT on its v-1 blocks.
fn steiner_pairs(v: usize) -> Result<CMat, FrameError> {
    if v < 2 {
        return Err(FrameError::Invalid(format!(
            "pair designs need v >= 2, got {v}"
        )));
    }
    let r = v - 1;
    let m = v * (v - 1) / 2;
    let n = v * v;
    let block_index = |a: usize, b: usize| -> usize {
        // Lexicographic rank of the pair (a, b), a < b.
        debug_assert!(a < b && b < v);
        a * (2 * v - a - 1) / 2 + (b - a - 1)
    };
    let mut mat = CMat::zeros(m, n);
    let scale = 1.0 / (r as f64).sqrt();
    for j in 0..v {
        // Blocks through j in ascending block order get DFT rows 1..v-1.
        let mut s = 0;
        for o in 0..v {
            if o == j {
                continue;
            }
            let blk = block_index(j.min(o), j.max(o));
            for b in 0..v {
                let k = (s + 1) * b % v;
                mat[(blk, j * v + b)] = Complex64::from_polar(scale, -TAU * k as f64 / v as f64);
            }
            s += 1;
        }
    }
    Ok(mat)
}

fn spikes_fourier(m: usize) -> Result<CMat, FrameError> {
    check_dims(m, 2 * m)?;
    Ok(CMat::from_fn(m, 2 * m, |i, j| {
        if j < m {
            if i == j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        } else {
            dft_entry(i * (j - m), m, m)
        }
    }))
}

fn spikes_hadamard(m: usize) -> Result<CMat, FrameError> {
    if !m.is_power_of_two() {
        return Err(FrameError::Invalid(format!(
            "Sylvester-Hadamard matrices exist for powers of two, got {m}"
        )));
    }
    let scale = 1.0 / (m as f64).sqrt();
    Ok(CMat::from_real_fn(m, 2 * m, |i, j| {
        if j < m {
            f64::from(i == j)
        } else {
            let sign = ((i & (j - m)).count_ones() & 1) as f64;
            scale * (1.0 - 2.0 * sign)
        }
    }))
}

fn union_bases(m: usize, copies: usize) -> Result<CMat, FrameError> {
    if m == 0 || copies == 0 {
        return Err(FrameError::Invalid(
            "union of bases needs m >= 1 and copies >= 1".into(),
        ));
    }
    Ok(CMat::from_real_fn(m, m * copies, |i, j| {
        f64::from(i == j % m)
    }))
}

fn normalize_columns(mat: &mut CMat) -> Result<(), FrameError> {
    for j in 0..mat.cols() {
        let norm = mat.col_norm(j);
        if norm < 1e-100 {
            return Err(FrameError::Invalid(format!("column {j} is zero")));
        }
        mat.scale_col(j, Complex64::new(1.0 / norm, 0.0));
    }
    Ok(())
}

fn iid_gaussian(m: usize, n: usize, seed: u64) -> Result<CMat, FrameError> {
    check_dims(m, n)?;
    let mut rng = RngStream::new(seed, 0);
    let mut mat = CMat::from_real_fn(m, n, |_, _| rng.normal());
    normalize_columns(&mut mat)?;
    Ok(mat)
}

fn haar(m: usize, n: usize, seed: u64) -> Result<CMat, FrameError> {
    check_dims(m, n)?;
    let mut rng = RngStream::new(seed, 0);
    let ginibre = CMat::from_fn(n, n, |_, _| rng.complex_normal());
    let (q, _r) = qr(&ginibre)?;
    let mut mat = CMat::from_fn(m, n, |i, j| q[(i, j)]);
    normalize_columns(&mut mat)?;
    Ok(mat)
}

fn rand_dft(m: usize, n: usize, seed: u64) -> Result<CMat, FrameError> {
    check_dims(m, n)?;
    let mut rng = RngStream::new(seed, 0);
    let rows = rng.sorted_subset(n, m);
    Ok(CMat::from_fn(m, n, |i, t| dft_entry(rows[i] * t, n, m)))
}

fn rand_dct(m: usize, n: usize, seed: u64) -> Result<CMat, FrameError> {
    check_dims(m, n)?;
    let mut rng = RngStream::new(seed, 0);
    let rows = rng.sorted_subset(n, m);
    let mut mat = CMat::from_real_fn(m, n, |i, t| {
        let r = rows[i];
        if r == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
                * (std::f64::consts::PI * (2 * t + 1) as f64 * r as f64 / (2 * n) as f64).cos()
        }
    });
    normalize_columns(&mut mat)?;
    Ok(mat)
}
