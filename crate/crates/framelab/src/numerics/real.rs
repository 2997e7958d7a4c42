//! Real symmetric kernels for the Gaussian reference ensemble, where complex
//! arithmetic would double the flop count for no benefit.

use std::ops::{Index, IndexMut};

use super::eig::ql_values;
use super::NumericsError;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq, Debug)]
pub struct RMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RMat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl Index<(usize, usize)> for RMat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// `A Aᵀ + B Bᵀ`, computed on the lower triangle and mirrored.
pub fn syrk_sum(a: &RMat, b: &RMat) -> RMat {
    assert_eq!(a.rows, b.rows, "syrk_sum row mismatch");
    let k = a.rows;
    let mut out = RMat::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let dot = |m: &RMat| -> f64 {
                m.row(i)
                    .iter()
                    .zip(m.row(j))
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            };
            let v = dot(a) + dot(b);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn chol_real(m: &RMat) -> Result<RMat, NumericsError> {
    if m.rows != m.cols {
        return Err(NumericsError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    let mut l = RMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for t in 0..j {
                s -= l[(i, t)] * l[(j, t)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(NumericsError::NotPositiveDefinite);
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve `L X = B` columnwise for lower-triangular `L`.
pub fn forward_solve(l: &RMat, b: &RMat) -> RMat {
    assert_eq!(l.rows, b.rows, "forward_solve row mismatch");
    let n = l.rows;
    let mut x = b.clone();
    for i in 0..n {
        let (head, tail) = x.data.split_at_mut(i * x.cols);
        let xi = &mut tail[..x.cols];
        for t in 0..i {
            let lit = l[(i, t)];
            if lit == 0.0 {
                continue;
            }
            let xt = &head[t * x.cols..(t + 1) * x.cols];
            for (a, b) in xi.iter_mut().zip(xt) {
                *a -= lit * b;
            }
        }
        let d = l[(i, i)];
        for a in xi.iter_mut() {
            *a /= d;
        }
    }
    x
}

/// Ascending eigenvalues of a real symmetric matrix (values only).
pub fn sym_eigvals(a: &RMat) -> Result<Vec<f64>, NumericsError> {
    if a.rows != a.cols {
        return Err(NumericsError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(vec![]);
    }
    let mut h = RMat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let (mut d, mut e) = tridiagonalize_real(&mut h);
    ql_values(&mut d, &mut e, n)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Real Householder reduction to tridiagonal form, no accumulation.
/// Signed subdiagonal entries are fine for the QL sweep.
fn tridiagonalize_real(h: &mut RMat) -> (Vec<f64>, Vec<f64>) {
    let n = h.rows;
    let mut e = vec![0.0; n]; // last slot is QL workspace
    for k in 0..n.saturating_sub(1) {
        let mlen = n - k - 1;
        if mlen == 1 {
            e[k] = h[(k + 1, k)];
            continue;
        }
        let mut xnorm2 = 0.0;
        for i in k + 1..n {
            xnorm2 += h[(i, k)] * h[(i, k)];
        }
        let alpha = h[(k + 1, k)];
        let below2 = xnorm2 - alpha * alpha;
        if below2 <= 0.0 || xnorm2 == 0.0 {
            e[k] = alpha;
            continue;
        }
        let xnorm = xnorm2.sqrt();
        let beta = -xnorm.copysign(if alpha == 0.0 { 1.0 } else { alpha });
        let mut u = Vec::with_capacity(mlen);
        u.push(alpha - beta);
        for i in k + 2..n {
            u.push(h[(i, k)]);
        }
        let c = 1.0 / (xnorm * (xnorm + alpha.abs()));
        let mut p = vec![0.0; mlen];
        for i in 0..mlen {
            let row = h.row(k + 1 + i);
            let mut s = 0.0;
            for (j, uj) in u.iter().enumerate() {
                s += row[k + 1 + j] * uj;
            }
            p[i] = s * c;
        }
        let upc: f64 = u.iter().zip(&p).map(|(ui, pi)| ui * pi).sum();
        let kappa = 0.5 * c * upc;
        let w: Vec<f64> = p.iter().zip(&u).map(|(pi, ui)| pi - kappa * ui).collect();
        for i in 0..mlen {
            for j in 0..=i {
                let delta = u[i] * w[j] + w[i] * u[j];
                let val = h[(k + 1 + i, k + 1 + j)] - delta;
                h[(k + 1 + i, k + 1 + j)] = val;
                h[(k + 1 + j, k + 1 + i)] = val;
            }
        }
        e[k] = beta;
    }
    let d: Vec<f64> = (0..n).map(|i| h[(i, i)]).collect();
    (d, e)
}
