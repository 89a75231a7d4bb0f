//! Monte Carlo laboratory: data-generating processes with closed-form truth
//! and a deterministic replication engine comparing the exact, smoothed, and
//! efficient estimators across bandwidth grids.

pub mod designs;
pub mod mc;

pub use designs::{Design, DgpSpec, ErrorLaw};
pub use mc::{h_grid_default, run_mc, EstimatorKind, McConfig, McReport};
