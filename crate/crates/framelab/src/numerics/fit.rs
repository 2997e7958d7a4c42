//! Least-squares fits on log scales, for empirical convergence rates.

use super::NumericsError;

#[derive(Debug, Clone, serde::Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ln y` on `ln x`: `y ≈ e^intercept · x^slope`.
///
/// Needs at least three points (one residual degree of freedom) and strictly
/// positive data.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult, NumericsError> {
    let (u, v) = log_pairs(xs, ys, 3)?;
    let n = u.len() as f64;
    let um = u.iter().sum::<f64>() / n;
    let vm = v.iter().sum::<f64>() / n;
    let sxx: f64 = u.iter().map(|x| (x - um) * (x - um)).sum();
    let sxy: f64 = u.iter().zip(&v).map(|(x, y)| (x - um) * (y - vm)).sum();
    if sxx <= 0.0 {
        return Err(NumericsError::Invalid("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = vm - slope * um;
    let ssr: f64 = u
        .iter()
        .zip(&v)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let sst: f64 = v.iter().map(|y| (y - vm) * (y - vm)).sum();
    let sigma2 = ssr / (n - 2.0);
    Ok(FitResult {
        slope,
        intercept,
        slope_stderr: (sigma2 / sxx).sqrt(),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 },
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TwoTermFitResult {
    pub intercept: f64,
    /// Coefficient of `ln n`.
    pub log_coeff: f64,
    /// Coefficient of `ln ln n`.
    pub loglog_coeff: f64,
    pub log_stderr: f64,
    pub loglog_stderr: f64,
    pub r_squared: f64,
}

/// Least squares of `ln y` on `[1, ln n, ln ln n]`, separating a power law
/// from a logarithmic correction: `y ≈ C · n^log_coeff · (ln n)^loglog_coeff`.
pub fn loglog_fit_two_term(ns: &[f64], ys: &[f64]) -> Result<TwoTermFitResult, NumericsError> {
    let (u, v) = log_pairs(ns, ys, 4)?;
    if u.iter().any(|&x| x <= 0.0) {
        return Err(NumericsError::Invalid(
            "two-term fit needs abscissae > 1".into(),
        ));
    }
    let rows: Vec<[f64; 3]> = u.iter().map(|&x| [1.0, x, x.ln()]).collect();
    // Normal equations, 3x3.
    let mut ata = [[0.0; 3]; 3];
    let mut atv = [0.0; 3];
    for (row, y) in rows.iter().zip(&v) {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atv[i] += row[i] * y;
        }
    }
    let inv = invert3(&ata).ok_or_else(|| {
        NumericsError::Invalid("degenerate design matrix in two-term fit".into())
    })?;
    let mut coef = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            coef[i] += inv[i][j] * atv[j];
        }
    }
    let ssr: f64 = rows
        .iter()
        .zip(&v)
        .map(|(row, y)| {
            let fit = coef[0] + coef[1] * row[1] + coef[2] * row[2];
            (y - fit) * (y - fit)
        })
        .sum();
    let n = v.len() as f64;
    let vm = v.iter().sum::<f64>() / n;
    let sst: f64 = v.iter().map(|y| (y - vm) * (y - vm)).sum();
    let sigma2 = ssr / (n - 3.0);
    Ok(TwoTermFitResult {
        intercept: coef[0],
        log_coeff: coef[1],
        loglog_coeff: coef[2],
        log_stderr: (sigma2 * inv[1][1]).sqrt(),
        loglog_stderr: (sigma2 * inv[2][2]).sqrt(),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 },
    })
}

fn log_pairs(
    xs: &[f64],
    ys: &[f64],
    min_len: usize,
) -> Result<(Vec<f64>, Vec<f64>), NumericsError> {
    if xs.len() != ys.len() {
        return Err(NumericsError::Dimension(format!(
            "{} abscissae vs {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < min_len {
        return Err(NumericsError::Invalid(format!(
            "fit needs at least {min_len} points, got {}",
            xs.len()
        )));
    }
    if xs
        .iter()
        .chain(ys)
        .any(|&x| !(x.is_finite() && x > 0.0))
    {
        return Err(NumericsError::Invalid(
            "log fit needs positive finite data".into(),
        ));
    }
    Ok((
        xs.iter().map(|x| x.ln()).collect(),
        ys.iter().map(|y| y.ln()).collect(),
    ))
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // Cofactor expansion; note the transpose in the indexing.
            let r = [(j + 1) % 3, (j + 2) % 3];
            let c = [(i + 1) % 3, (i + 2) % 3];
            let minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]];
            inv[i][j] = minor / det;
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = (1..=8).map(|i| 10.0f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.7)).collect();
        let fit = loglog_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 1.7).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_slope_has_sane_error_bar() {
        let xs: Vec<f64> = (1..=12).map(|i| (i * i) as f64 * 10.0).collect();
        // Deterministic ripple stands in for noise.
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 2.0 * x.powf(-0.5) * (1.0 + 0.02 * ((i % 3) as f64 - 1.0)))
            .collect();
        let fit = loglog_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05);
        assert!(fit.slope_stderr > 0.0);
        assert!((fit.slope + 0.5).abs() < 4.0 * fit.slope_stderr);
    }

    #[test]
    fn two_term_separates_log_factor() {
        let ns: Vec<f64> = (2..=14).map(|i| (1 << i) as f64).collect();
        let ys: Vec<f64> = ns.iter().map(|n| 5.0 * n.powf(-0.5) * n.ln()).collect();
        let fit = loglog_fit_two_term(&ns, &ys).unwrap();
        assert!((fit.log_coeff + 0.5).abs() < 1e-10);
        assert!((fit.loglog_coeff - 1.0).abs() < 1e-10);
        assert!((fit.intercept - 5.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn rejects_nonpositive_data() {
        assert!(loglog_fit(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
        assert!(loglog_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
