//! Complex Cholesky and Householder QR.

use num_complex::Complex64;

use super::cmat::CMat;
use super::NumericsError;

/// Lower Cholesky factor `L` of a Hermitian positive definite `A = L L†`.
pub fn cholesky(a: &CMat) -> Result<CMat, NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut l = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for t in 0..j {
                s -= l[(i, t)] * l[(j, t)].conj();
            }
            if i == j {
                // The pivot of a Hermitian PD matrix is real positive.
                if s.re <= 0.0 || !s.re.is_finite() {
                    return Err(NumericsError::NotPositiveDefinite);
                }
                l[(i, i)] = Complex64::new(s.re.sqrt(), 0.0);
            } else {
                l[(i, j)] = s / l[(j, j)].re;
            }
        }
    }
    Ok(l)
}

/// Solve `L L† x = b` given the Cholesky factor.
pub fn chol_solve(l: &CMat, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.rows();
    assert_eq!(n, b.len(), "chol_solve dimension mismatch");
    let mut y = b.to_vec();
    for i in 0..n {
        for t in 0..i {
            let litt = l[(i, t)];
            y[i] = y[i] - litt * y[t];
        }
        y[i] /= l[(i, i)].re;
    }
    // Back substitution with L†.
    for i in (0..n).rev() {
        for t in i + 1..n {
            let lti = l[(t, i)].conj();
            y[i] = y[i] - lti * y[t];
        }
        y[i] /= l[(i, i)].re;
    }
    y
}

/// `log det(L L†) = 2 Σ log L_ii`.
pub fn chol_logdet(l: &CMat) -> f64 {
    (0..l.rows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0
}

/// `tr((L L†)^{-1}) = ‖L^{-1}‖_F²`, via forward solves against the identity.
pub fn chol_inv_trace(l: &CMat) -> f64 {
    let n = l.rows();
    let mut acc = 0.0;
    let mut y = vec![Complex64::ZERO; n];
    for j in 0..n {
        // Solve L y = e_j; entries above j stay zero.
        for v in &mut y[j..] {
            *v = Complex64::ZERO;
        }
        y[j] = Complex64::new(1.0 / l[(j, j)].re, 0.0);
        for i in j + 1..n {
            let mut s = Complex64::ZERO;
            for t in j..i {
                s += l[(i, t)] * y[t];
            }
            y[i] = -s / l[(i, i)].re;
        }
        acc += y[j..].iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    acc
}

/// Householder QR of a square matrix: `A = Q R` with unitary `Q` and the
/// diagonal of `R` made real positive (the phase convention that turns QR of
/// a Ginibre matrix into a Haar-distributed unitary).
pub fn qr(a: &CMat) -> Result<(CMat, CMat), NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut r = a.clone();
    let mut reflectors: Vec<(Vec<Complex64>, f64)> = Vec::new();
    for k in 0..n.saturating_sub(1) {
        let mut xnorm2 = 0.0;
        for i in k..n {
            xnorm2 += r[(i, k)].norm_sqr();
        }
        if xnorm2 == 0.0 {
            reflectors.push((vec![], 0.0));
            continue;
        }
        let alpha = r[(k, k)];
        let xnorm = xnorm2.sqrt();
        let phase = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            Complex64::ONE
        };
        let beta = -phase * xnorm;
        let mut u = Vec::with_capacity(n - k);
        u.push(alpha - beta);
        for i in k + 1..n {
            u.push(r[(i, k)]);
        }
        let c = 1.0 / (xnorm * (xnorm + alpha.norm()));
        for j in k..n {
            let mut t = Complex64::ZERO;
            for (i, ui) in u.iter().enumerate() {
                t += ui.conj() * r[(k + i, j)];
            }
            t *= c;
            for (i, ui) in u.iter().enumerate() {
                let v = r[(k + i, j)] - ui * t;
                r[(k + i, j)] = v;
            }
        }
        r[(k, k)] = beta;
        for i in k + 1..n {
            r[(i, k)] = Complex64::ZERO;
        }
        reflectors.push((u, c));
    }
    let mut q = CMat::identity(n);
    for (k, (u, c)) in reflectors.iter().enumerate().rev() {
        if u.is_empty() {
            continue;
        }
        let mut t = vec![Complex64::ZERO; n];
        for (i, ui) in u.iter().enumerate() {
            let row = q.row(k + i);
            let uic = ui.conj();
            for (tj, qj) in t.iter_mut().zip(row) {
                *tj += uic * qj;
            }
        }
        for (i, ui) in u.iter().enumerate() {
            let cu = c * ui;
            let row = q.row_mut(k + i);
            for (qj, tj) in row.iter_mut().zip(&t) {
                *qj -= cu * tj;
            }
        }
    }
    // Fix phases so diag(R) >= 0.
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let s = d / d.norm();
            q.scale_col(j, s);
            let sc = s.conj();
            for t in j..n {
                r[(j, t)] *= sc;
            }
        }
    }
    Ok((q, r))
}
