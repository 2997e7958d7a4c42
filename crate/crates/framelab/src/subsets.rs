//! Column-subset selection: random draws and exhaustive expectations.
//!
//! Subsets are represented as sorted 0-based column indices, the same
//! convention used in serialized masks. Two selection models are supported:
//! `Comb { k }` draws uniformly among all k-subsets, `Bern { p }` keeps each
//! column independently with probability p.

use crate::frames::Frame;
use crate::numerics::{binomial, CMat, NeumaierSum, RngStream};

/// Exhaustive Bernoulli enumeration walks all 2^n subsets.
const MAX_BERN_EXHAUSTIVE: usize = 24;
/// The incremental low-moment walk affords a few more columns.
const MAX_BERN_INCREMENTAL: usize = 26;
/// Exhaustive k-subset enumeration caps the number of subsets.
const MAX_COMB_SUBSETS: u64 = 2_000_000;

#[derive(Debug, thiserror::Error)]
pub enum SubsetError {
    #[error("invalid selection model: {0}")]
    Invalid(String),
    #[error("exhaustive enumeration too large: {0}")]
    TooLarge(String),
}

/// How columns are chosen from a frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionModel {
    /// Uniform over all subsets of exactly k columns.
    Comb { k: usize },
    /// Each column kept independently with probability p.
    Bern { p: f64 },
}

impl SelectionModel {
    /// Parse the CLI syntax `comb:<k>` or `bern:<p>`.
    pub fn parse(s: &str) -> Result<Self, SubsetError> {
        let bad = || SubsetError::Invalid(format!("expected comb:<k> or bern:<p>, got {s:?}"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "comb" => Ok(SelectionModel::Comb {
                k: arg.parse().map_err(|_| bad())?,
            }),
            "bern" => {
                let p: f64 = arg.parse().map_err(|_| bad())?;
                let model = SelectionModel::Bern { p };
                model.check_p()?;
                Ok(model)
            }
            _ => Err(bad()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SelectionModel::Comb { k } => format!("comb:{k}"),
            SelectionModel::Bern { p } => format!("bern:{p}"),
        }
    }

    fn check_p(&self) -> Result<(), SubsetError> {
        if let SelectionModel::Bern { p } = self {
            if !(0.0..=1.0).contains(p) {
                return Err(SubsetError::Invalid(format!(
                    "Bernoulli probability must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Check the model against a frame of n columns.
    pub fn validate(&self, n: usize) -> Result<(), SubsetError> {
        self.check_p()?;
        if let SelectionModel::Comb { k } = self {
            if *k > n {
                return Err(SubsetError::Invalid(format!(
                    "cannot choose k={k} of n={n} columns"
                )));
            }
        }
        Ok(())
    }

    /// Expected fraction of columns kept, the sampling rate p = E|S|/n.
    pub fn expected_fraction(&self, n: usize) -> f64 {
        match self {
            SelectionModel::Comb { k } => *k as f64 / n as f64,
            SelectionModel::Bern { p } => *p,
        }
    }

    /// Draw a subset as sorted 0-based indices.
    pub fn draw(&self, n: usize, rng: &mut RngStream) -> Vec<usize> {
        match self {
            SelectionModel::Comb { k } => rng.sorted_subset(n, *k),
            SelectionModel::Bern { p } => (0..n).filter(|_| rng.below(*p)).collect(),
        }
    }
}

/// The m×k matrix of the selected columns.
pub fn subframe(frame: &Frame, cols: &[usize]) -> CMat {
    check_mask(cols, frame.n());
    frame.matrix().select_cols(cols)
}

/// The k×k Gram of the selected columns, extracted from a precomputed full
/// Gram so repeated subsets share the inner products.
pub fn subset_gram_from_full(g: &CMat, cols: &[usize]) -> CMat {
    check_mask(cols, g.rows());
    CMat::from_fn(cols.len(), cols.len(), |i, j| g[(cols[i], cols[j])])
}

fn check_mask(cols: &[usize], n: usize) {
    assert!(
        cols.windows(2).all(|w| w[0] < w[1]) && cols.last().is_none_or(|&c| c < n),
        "subset mask must be sorted, distinct, and within 0..{n}"
    );
}

/// Exact expectation of a vector statistic over all subsets of the model.
///
/// The statistic sees sorted 0-based indices and must return the same number
/// of components for every subset. Accumulation is compensated and the
/// result is normalized by the summed weight, so Bernoulli weights that do
/// not add to exactly 1 in floating point do not bias the answer.
pub fn exact_expectation<F>(
    model: &SelectionModel,
    n: usize,
    mut stat: F,
) -> Result<Vec<f64>, SubsetError>
where
    F: FnMut(&[usize]) -> Vec<f64>,
{
    model.validate(n)?;
    let mut sums: Option<Vec<NeumaierSum>> = None;
    let mut wsum = NeumaierSum::new();
    let mut visit = |cols: &[usize], w: f64, stat: &mut F| {
        let vals = stat(cols);
        let sums = sums.get_or_insert_with(|| vec![NeumaierSum::new(); vals.len()]);
        assert_eq!(vals.len(), sums.len(), "statistic changed dimension");
        for (s, v) in sums.iter_mut().zip(&vals) {
            s.add(w * v);
        }
        wsum.add(w);
    };
    match model {
        SelectionModel::Bern { p } => {
            if n > MAX_BERN_EXHAUSTIVE {
                return Err(SubsetError::TooLarge(format!(
                    "2^{n} Bernoulli subsets (limit n = {MAX_BERN_EXHAUSTIVE})"
                )));
            }
            let weights: Vec<f64> = (0..=n)
                .map(|s| p.powi(s as i32) * (1.0 - p).powi((n - s) as i32))
                .collect();
            let mut cols = Vec::with_capacity(n);
            for mask in 0u64..(1u64 << n) {
                cols.clear();
                cols.extend((0..n).filter(|&j| mask >> j & 1 == 1));
                visit(&cols, weights[cols.len()], &mut stat);
            }
        }
        SelectionModel::Comb { k } => {
            let count = binomial(n as u64, *k as u64);
            if count > MAX_COMB_SUBSETS.into() {
                return Err(SubsetError::TooLarge(format!(
                    "C({n},{k}) = {count} subsets (limit {MAX_COMB_SUBSETS})"
                )));
            }
            let k = *k;
            let mut cols: Vec<usize> = (0..k).collect();
            loop {
                visit(&cols, 1.0, &mut stat);
                // Lexicographic successor: bump the rightmost index that has
                // room, then pack the tail tightly after it.
                let Some(i) = (0..k).rev().find(|&i| cols[i] < n - k + i) else {
                    break;
                };
                cols[i] += 1;
                for j in i + 1..k {
                    cols[j] = cols[j - 1] + 1;
                }
            }
        }
    }
    let wtotal = wsum.total();
    Ok(sums
        .expect("at least one subset")
        .iter()
        .map(|s| s.total() / wtotal)
        .collect())
}

/// Mean and variance of a per-subset quantity under a selection model.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MomentStat {
    pub mean: f64,
    pub variance: f64,
}

/// Exact mean and variance of the spectral moments tr(G_S^r)/n for
/// r = 1..=rmax, by exhaustive enumeration.
pub fn exact_moment_stats(
    frame: &Frame,
    model: &SelectionModel,
    rmax: usize,
) -> Result<Vec<MomentStat>, SubsetError> {
    assert!(rmax >= 1);
    let n = frame.n();
    let g = frame.matrix().gram();
    let raw = exact_expectation(model, n, |cols| {
        let gs = subset_gram_from_full(&g, cols);
        let mut vals = vec![0.0; 2 * rmax];
        let mut power = gs.clone();
        for r in 0..rmax {
            if r > 0 {
                power = power.mul(&gs);
            }
            let t = power.trace().re / n as f64;
            vals[r] = t;
            vals[rmax + r] = t * t;
        }
        vals
    })?;
    Ok((0..rmax)
        .map(|r| MomentStat {
            mean: raw[r],
            variance: raw[rmax + r] - raw[r] * raw[r],
        })
        .collect())
}

/// Exact mean and variance of the first two spectral moments under
/// Bernoulli selection, via a Gray-code walk with O(n) work per subset.
///
/// Flipping one column at a time keeps the running pair sum
/// Σ_{i<j∈S} |g_ij|² updated incrementally, which is what makes exhaustive
/// enumeration feasible up to n = 26 columns.
pub fn exact_low_moment_stats_bernoulli(
    frame: &Frame,
    p: f64,
) -> Result<[MomentStat; 2], SubsetError> {
    let model = SelectionModel::Bern { p };
    let n = frame.n();
    model.validate(n)?;
    if n > MAX_BERN_INCREMENTAL {
        return Err(SubsetError::TooLarge(format!(
            "2^{n} Bernoulli subsets (limit n = {MAX_BERN_INCREMENTAL})"
        )));
    }
    let g = frame.matrix().gram();
    let sq: Vec<f64> = (0..n * n)
        .map(|t| g[(t / n, t % n)].norm_sqr())
        .collect();
    let weights: Vec<f64> = (0..=n)
        .map(|s| p.powi(s as i32) * (1.0 - p).powi((n - s) as i32))
        .collect();

    let mut in_set = vec![false; n];
    // row_sum[c] = Σ_{j ∈ S, j ≠ c} |g_cj|², for every column c.
    let mut row_sum = vec![0.0f64; n];
    let mut diag_sum = 0.0f64;
    let mut pair_sum = 0.0f64;
    let mut size = 0usize;

    let mut acc = [NeumaierSum::new(); 5];
    let nf = n as f64;
    let mut record = |size: usize, diag_sum: f64, pair_sum: f64| {
        let w = weights[size];
        let m1 = diag_sum / nf;
        let m2 = (diag_sum + 2.0 * pair_sum) / nf;
        acc[0].add(w);
        acc[1].add(w * m1);
        acc[2].add(w * m1 * m1);
        acc[3].add(w * m2);
        acc[4].add(w * m2 * m2);
    };

    record(size, diag_sum, pair_sum);
    for i in 1u64..(1u64 << n) {
        let c = i.trailing_zeros() as usize;
        if in_set[c] {
            pair_sum -= row_sum[c];
            diag_sum -= sq[c * n + c];
            size -= 1;
            in_set[c] = false;
            for d in 0..n {
                if d != c {
                    row_sum[d] -= sq[d * n + c];
                }
            }
        } else {
            pair_sum += row_sum[c];
            diag_sum += sq[c * n + c];
            size += 1;
            in_set[c] = true;
            for d in 0..n {
                if d != c {
                    row_sum[d] += sq[d * n + c];
                }
            }
        }
        record(size, diag_sum, pair_sum);
    }

    let w = acc[0].total();
    let (em1, em1sq) = (acc[1].total() / w, acc[2].total() / w);
    let (em2, em2sq) = (acc[3].total() / w, acc[4].total() / w);
    Ok([
        MomentStat {
            mean: em1,
            variance: em1sq - em1 * em1,
        },
        MomentStat {
            mean: em2,
            variance: em2sq - em2 * em2,
        },
    ])
}
