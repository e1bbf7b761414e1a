//! Low-rank multi-response binary classification.
//!
//! A `p × q` coefficient matrix `M` maps covariates to `q` binary responses
//! through `sign(XM)`. Coefficients are drawn from a Gibbs pseudo-posterior
//! `exp(-λ r(M)) π(M)`, where `r` is the hinge (or logistic) empirical risk over
//! the observed response entries and `π` is a spectral scaled-Student prior
//! that favours approximately low-rank matrices. Sampling uses unadjusted
//! Langevin Monte Carlo or MALA.
//!
//! Modules:
//! - [`model`]: data types, empirical risks and their (sub)gradients.
//! - [`prior`]: prior log-density, gradient and default scale.
//! - [`sampler`]: Gibbs target, LMC/MALA steps and chains.
//! - [`estimator`]: fitting, misclassification and cross-validation.
//! - [`datagen`]: simulation designs and replicated experiments.
//! - [`bounds`]: explicit finite-sample risk bounds.
//! - [`io`]: CSV formats and configuration files.
//! - [`cli`]: the `binrank` command-line front end.

pub mod bounds;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod io;
pub mod model;
pub mod prior;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{Coefficients, DesignMatrix, ObservationMask, ResponseMatrix};
