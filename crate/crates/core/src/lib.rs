//! Energy-minimal CPU and uplink allocation for federated learning at the
//! network edge.
//!
//! Devices train a shared model over `M` rounds of `N` local steps each and
//! upload their parameters after every round, either all at once over a
//! NOMA uplink or in TDMA slots. The solvers pick CPU frequencies, transmit
//! powers and the split of each round between computing and uploading so
//! that total energy is minimal and training meets its deadline. Every
//! joint solution carries a dual lower bound.
//!
//! ```
//! use fedge::scenario::presets;
//! use fedge::solver_noma::solve_p1;
//!
//! let sol = solve_p1(&presets::desk_a());
//! assert!(sol.duality_gap_rel <= fedge::solution::GAP_TOL);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod error;
pub mod fedsim;
pub mod noma_region;
pub mod numerics;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod solution;
pub mod solver_noma;
pub mod solver_tdma;

pub use error::{Error, Result};
pub use scenario::SystemConfig;
pub use solution::{Protocol, Solution, Status};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub struct Scenarios;
    #[doc = include_str!("../../../book/src/capacity_region.md")]
    pub struct CapacityRegion;
    #[doc = include_str!("../../../book/src/solvers.md")]
    pub struct Solvers;
    #[doc = include_str!("../../../book/src/baselines.md")]
    pub struct Baselines;
    #[doc = include_str!("../../../book/src/checking.md")]
    pub struct Checking;
    #[doc = include_str!("../../../book/src/fedsim.md")]
    pub struct Fedsim;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
