//! Gaussian mixture model estimation through a family of generalized EM
//! update maps, plus tools for analysing their convergence.
//!
//! The crate is organised bottom-up:
//!
//! * [`gmm`]: parameter, dataset and responsibility types, densities,
//!   log-likelihood, the Q-function and seeded sampling.
//! * [`em`]: classic EM, shifted-covariance EM, analytic gradients and the
//!   plain gradient-ascent GEM step.
//! * [`dynamics`]: the block preconditioner, the zero-sum projection,
//!   projection-based GEM (PB-GEM), its weighted variant and the iteration
//!   driver.
//! * [`analysis`]: rate bounds, the 2x2 LMI certificate, finite-difference
//!   Jacobians of update maps and empirical contraction factors.
//! * [`io`]: JSON parameter files and CSV datasets.

pub mod analysis;
pub mod dynamics;
pub mod em;
mod error;
pub mod gmm;
pub mod io;

pub use error::{GemError, Result};
pub use gmm::{Dataset, GmmParams, Responsibilities, ThetaLayout, ThetaVector};
