//! Random forests with generalized-least-squares node splitting for binary
//! geospatial data.
//!
//! The pipeline has three stages:
//!
//! 1. [`forest`]: estimate the marginal mean `p(x) = E[Y | X = x]` with an
//!    ensemble of GLS trees whose split criterion uses a nearest-neighbor
//!    working precision matrix ([`nngp`]).
//! 2. [`link`]: recover the covariate effect `m(x) = sqrt(1 + sigma^2) * Phi^-1(p(x))`
//!    under a probit link, and pick the spatial parameters by cross-validation.
//! 3. [`prediction`]: predict `P(Y_new = 1 | data)` at new locations as a ratio
//!    of multivariate normal CDFs evaluated by randomized quasi-Monte Carlo.
//!
//! [`simulate`] reproduces the simulation design and baselines used to
//! benchmark the method.

pub mod covariance;
pub mod error;
pub mod forest;
pub mod gls_tree;
pub mod link;
pub mod model;
pub mod nngp;
pub mod par;
pub mod prediction;
pub mod seed;
pub mod simulate;
pub mod spatial;

pub use error::{Error, Result};
