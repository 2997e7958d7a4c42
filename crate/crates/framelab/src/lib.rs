//! Unit-norm frames, random sub-frame spectra, and their limit laws.
//!
//! The crate builds deterministic and random frame families, selects random
//! column subsets, and studies the eigenvalue distribution of the sub-frame
//! Gram matrices: finite-size moments and their exact expectations, the
//! MANOVA and Marchenko-Pastur limit laws, moment bounds that single out
//! equiangular tight frames, and the coding-theoretic figures of merit
//! (rate-distortion, multiple-access capacity, space-time diversity) that
//! those spectra control.

pub mod coding;
pub mod frames;
pub mod harness;
pub mod limits;
pub mod moments;
pub mod numerics;
pub mod spectra;
pub mod subsets;
