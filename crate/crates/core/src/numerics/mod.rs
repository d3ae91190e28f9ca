//! Deterministic scalar and vector kernels shared by the solvers.

mod bisect;
mod box_descent;
mod ellipsoid;
mod golden;

pub use bisect::bisect_root;
pub use box_descent::{minimize_convex_box, minimize_convex_box_from, BoxMinimum};
pub use ellipsoid::{ellipsoid_max, CutOracleResult, EllipsoidOutcome, EllipsoidState};
pub use golden::golden_section_min;

/// Iteration cap for projected-gradient descent.
pub const BOX_DESCENT_MAX_ITER: usize = 10_000;
