//! Hermitian eigensolver: unitary Householder reduction to a real symmetric
//! tridiagonal matrix, then implicit-shift QL iteration (EISPACK lineage).
//!
//! Inputs are symmetrized as `(A + A†)/2` before reduction, so Gram matrices
//! carrying products' roundoff are handled without fuss. Eigenvalues are
//! returned in ascending order; eigenvector columns match that order and
//! satisfy `‖A v - λ v‖ = O(ε ‖A‖)`.

use num_complex::Complex64;

use super::cmat::CMat;
use super::NumericsError;

pub struct EigDecomp {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unitary matrix whose j-th column is the eigenvector of `values[j]`.
    pub vectors: CMat,
}

const MAX_QL_SWEEPS: usize = 64;

/// Full eigendecomposition of a Hermitian matrix.
pub fn herm_eig(a: &CMat) -> Result<EigDecomp, NumericsError> {
    let n = check_square(a)?;
    if n == 0 {
        return Ok(EigDecomp {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        });
    }
    let mut h = a.hermitized();
    let (mut d, mut e, q) = tridiagonalize(&mut h, true);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    ql_implicit(&mut d, &mut e, Some(&mut z), n)?;
    let q = q.expect("accumulation requested");
    // V = Q Z with Q complex, Z real orthogonal.
    let mut v = CMat::zeros(n, n);
    for i in 0..n {
        for t in 0..n {
            let qit = q[(i, t)];
            if qit == Complex64::ZERO {
                continue;
            }
            let zrow = &z[t * n..(t + 1) * n];
            let vrow = v.row_mut(i);
            for (vj, zj) in vrow.iter_mut().zip(zrow) {
                *vj += qit * zj;
            }
        }
    }
    // Sort ascending, permuting eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = v.select_cols(&order);
    Ok(EigDecomp { values, vectors })
}

/// Ascending eigenvalues only; skips all eigenvector bookkeeping.
pub fn herm_eigvals(a: &CMat) -> Result<Vec<f64>, NumericsError> {
    let n = check_square(a)?;
    if n == 0 {
        return Ok(vec![]);
    }
    let mut h = a.hermitized();
    let (mut d, mut e, _) = tridiagonalize(&mut h, false);
    ql_implicit(&mut d, &mut e, None, n)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn check_square(a: &CMat) -> Result<usize, NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    Ok(a.rows())
}

/// Reduce a Hermitian `h` to real symmetric tridiagonal form in place.
///
/// Returns the diagonal `d`, the subdiagonal `e` (length n, last slot spare
/// for the QL sweep), and, when requested, the accumulated unitary `Q` with
/// `Q† A Q = T`. Subdiagonal phases are absorbed into `Q`, which is what
/// makes `T` real.
fn tridiagonalize(h: &mut CMat, want_q: bool) -> (Vec<f64>, Vec<f64>, Option<CMat>) {
    let n = h.rows();
    let mut subdiag = vec![Complex64::ZERO; n.saturating_sub(1)];
    // Householder reflectors H = I - c u u† kept for the Q accumulation.
    let mut reflectors: Vec<(Vec<Complex64>, f64)> = Vec::new();

    for k in 0..n.saturating_sub(1) {
        let mlen = n - k - 1;
        if mlen == 1 {
            subdiag[k] = h[(k + 1, k)];
            if want_q {
                reflectors.push((vec![], 0.0));
            }
            continue;
        }
        let mut xnorm2 = 0.0;
        for i in k + 1..n {
            xnorm2 += h[(i, k)].norm_sqr();
        }
        let alpha = h[(k + 1, k)];
        let below2 = xnorm2 - alpha.norm_sqr();
        if below2 <= 0.0 || xnorm2 == 0.0 {
            // Nothing under the subdiagonal entry: the column is already in shape.
            subdiag[k] = alpha;
            if want_q {
                reflectors.push((vec![], 0.0));
            }
            continue;
        }
        let xnorm = xnorm2.sqrt();
        let phase = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            Complex64::ONE
        };
        let beta = -phase * xnorm;
        // u = x - beta e1, so ‖u‖² = 2 xnorm (xnorm + |alpha|) and H x = beta e1.
        let mut u = Vec::with_capacity(mlen);
        u.push(alpha - beta);
        for i in k + 2..n {
            u.push(h[(i, k)]);
        }
        let c = 1.0 / (xnorm * (xnorm + alpha.norm()));

        // Rank-2 update of the trailing block B: B -= u w† + w u†
        // with p = c B u and w = p - (c/2)(u† p) u.
        let mut p = vec![Complex64::ZERO; mlen];
        for i in 0..mlen {
            let row = h.row(k + 1 + i);
            let mut s = Complex64::ZERO;
            for (j, uj) in u.iter().enumerate() {
                s += row[k + 1 + j] * uj;
            }
            p[i] = s * c;
        }
        let upc: Complex64 = u.iter().zip(&p).map(|(ui, pi)| ui.conj() * pi).sum();
        let kappa = 0.5 * c * upc.re; // u†p is real for Hermitian B
        let w: Vec<Complex64> = p.iter().zip(&u).map(|(pi, ui)| pi - kappa * ui).collect();
        for i in 0..mlen {
            for j in 0..=i {
                let delta = u[i] * w[j].conj() + w[i] * u[j].conj();
                let val = h[(k + 1 + i, k + 1 + j)] - delta;
                h[(k + 1 + i, k + 1 + j)] = val;
                if j < i {
                    h[(k + 1 + j, k + 1 + i)] = val.conj();
                } else {
                    h[(k + 1 + i, k + 1 + i)] = Complex64::new(val.re, 0.0);
                }
            }
        }
        subdiag[k] = beta;
        if want_q {
            reflectors.push((u, c));
        }
    }

    let d: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
    let mut e = vec![0.0; n]; // last slot is QL workspace
    let mut phases = vec![Complex64::ONE; n];
    for k in 0..n.saturating_sub(1) {
        let b = subdiag[k];
        let ab = b.norm();
        e[k] = ab;
        phases[k + 1] = if ab > 0.0 {
            phases[k] * (b / ab)
        } else {
            phases[k]
        };
    }

    let q = if want_q {
        let mut q = CMat::identity(n);
        // Q = H_0 H_1 ... applied to I from the innermost reflector out.
        for (k, (u, c)) in reflectors.iter().enumerate().rev() {
            if u.is_empty() {
                continue;
            }
            let mut t = vec![Complex64::ZERO; n];
            for (i, ui) in u.iter().enumerate() {
                let row = q.row(k + 1 + i);
                let uic = ui.conj();
                for (tj, qj) in t.iter_mut().zip(row) {
                    *tj += uic * qj;
                }
            }
            for (i, ui) in u.iter().enumerate() {
                let cu = c * ui;
                let row = q.row_mut(k + 1 + i);
                for (qj, tj) in row.iter_mut().zip(&t) {
                    *qj -= cu * tj;
                }
            }
        }
        // Absorb the subdiagonal phases: T_real = D† T D with D = diag(phases).
        for (t, s) in phases.iter().enumerate() {
            if *s != Complex64::ONE {
                q.scale_col(t, *s);
            }
        }
        Some(q)
    } else {
        None
    };

    (d, e, q)
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `e[i]` couples `d[i]` and `d[i+1]` (the last slot
/// of `e` is workspace). When `z` is given (row-major n×n), plane rotations
/// are accumulated into its columns, turning an identity input into the
/// tridiagonal eigenvector matrix.
fn ql_implicit(
    d: &mut [f64],
    e: &mut [f64],
    mut z: Option<&mut [f64]>,
    n: usize,
) -> Result<(), NumericsError> {
    if n <= 1 {
        return Ok(());
    }
    // Absolute deflation floor at ε‖T‖∞. Rank-deficient inputs leave a
    // trailing block where d and e underflow together, so the relative test
    // alone never fires; couplings this small cannot move any eigenvalue
    // past the O(ε‖A‖) accuracy already promised.
    let mut scale = 0.0f64;
    for i in 0..n {
        let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { e[i].abs() } else { 0.0 };
        scale = scale.max(left + d[i].abs() + right);
    }
    let floor = f64::EPSILON * scale;
    for lo in 0..n {
        let mut sweeps = 0;
        loop {
            // First index at or after lo whose coupling is negligible.
            let mut seg = lo;
            while seg + 1 < n {
                let dd = d[seg].abs() + d[seg + 1].abs();
                if e[seg].abs() <= f64::EPSILON * dd || e[seg].abs() <= floor {
                    break;
                }
                seg += 1;
            }
            if seg == lo {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(NumericsError::NoConvergence("QL iteration"));
            }
            let mut g = (d[lo + 1] - d[lo]) / (2.0 * e[lo]);
            let mut r = g.hypot(1.0);
            g = d[seg] - d[lo] + e[lo] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (lo..seg).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Deflate without finishing the sweep.
                    d[i + 1] -= p;
                    e[seg] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[lo] -= p;
            e[lo] = g;
            e[seg] = 0.0;
        }
    }
    Ok(())
}

/// QL driver shared with the real symmetric path.
pub(super) fn ql_values(d: &mut [f64], e: &mut [f64], n: usize) -> Result<(), NumericsError> {
    ql_implicit(d, e, None, n)
}
