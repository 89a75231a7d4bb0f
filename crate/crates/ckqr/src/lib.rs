//! Convolution-smoothed quantile regression.
//!
//! Smoothing the quantile-regression objective — convolving the check loss
//! with a scaled kernel — makes it twice differentiable, which buys a Newton
//! solver, sandwich standard errors that capture the variance reduction from
//! smoothing, a differentiable quantile path, and from that a conditional
//! density estimator and a two-stage efficient estimator. The `simlab`
//! module wraps everything in a reproducible Monte Carlo harness.

pub mod bandwidth;
pub mod data;
pub mod density;
pub mod error;
pub mod fmt;
pub mod horowitz;
pub mod inference;
pub mod kernels;
pub mod linalg;
pub mod qr_exact;
pub mod qr_smooth;
pub mod quad;
pub mod rng;
pub mod simlab;
mod solver;
pub mod special;

pub use data::{Dataset, FitResult};
pub use error::{Error, Result};
pub use kernels::Kernel;
pub use qr_smooth::SmoothSpec;
