//! Dense complex linear algebra, quadrature, and small statistical helpers.
//!
//! Everything here is sized for the matrices this crate actually meets
//! (Gram matrices up to a few hundred rows), favoring predictable accuracy
//! over large-scale performance tricks.

mod cmat;
mod decomp;
mod eig;
mod fit;
mod quad;
mod rational;
mod real;
mod rng;
mod sum;

pub use cmat::CMat;
pub use decomp::{chol_inv_trace, chol_logdet, chol_solve, cholesky, qr};
pub use eig::{herm_eig, herm_eigvals, EigDecomp};
pub use fit::{loglog_fit, loglog_fit_two_term, FitResult, TwoTermFitResult};
pub use quad::integrate_edge_singular;
pub use rational::{
    binomial, catalan, format_rational, parse_rational, rat, rational_to_f64, Rational,
};
pub use real::{chol_real, forward_solve, sym_eigvals, syrk_sum, RMat};
pub use rng::RngStream;
pub use sum::NeumaierSum;

/// Errors from the numerical kernels.
#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
}
