//! Numerical toolkit for Gaussian random matrix models `X = A0 + sum_k g_k A_k`.
//!
//! The crate computes the matrix concentration parameters of such models
//! (`sigma`, `v`, a bracket for the weak variance `sigma_*`), evaluates the
//! classical and intrinsic-freeness bounds on their spectra, computes the norm
//! of the associated free model through Lehner's variational formula, and
//! checks everything against exact pair-partition moment formulas and Monte
//! Carlo sampling. Applications cover spiked models (the BBP transition),
//! Kikuchi matrices for tensor PCA, and flattenings of matrix chaoses.
//!
//! Monte Carlo loops and pairing sums run on rayon when the `parallel`
//! feature is enabled (the default). Every random draw is derived from a
//! counter-based hash of the master seed, so results are bit-identical with
//! and without the feature and across thread counts.

pub mod bounds;
pub mod chaos;
pub mod combinatorics;
pub mod error;
pub mod kikuchi;
pub mod lehner;
pub mod linalg;
pub mod model;
pub mod model_io;
pub mod par;
pub mod params;
pub mod rng;
pub mod sampling;
pub mod spiked;

pub use error::{Error, Result};
pub use model::{CoefMatrix, CoefficientModel};
pub use params::ModelParameters;
