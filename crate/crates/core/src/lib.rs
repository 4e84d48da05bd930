//! Dynamic network loading on LWR links and a fixed-point solver for
//! simultaneous route-and-departure-time dynamic user equilibrium.
//!
//! The pipeline is: [`network::validate_network`] → [`dnl::run_dnl`] →
//! [`delay::effective_delay`] → [`solver::solve_due`]. [`io`] reads and writes the
//! text formats used by the command-line tool.

pub mod delay;
pub mod dnl;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod junction;
pub mod network;
pub mod solver;

pub use delay::{effective_delay, DelayProfile, PenaltyParams};
pub use dnl::{run_dnl, DnlError, DnlResult};
pub use grid::TimeGrid;
pub use junction::{model_by_name, FifoPriority, JunctionModel};
pub use network::{validate_network, LinkId, Network, NetworkError, NodeId, PathId};
pub use solver::{solve_due, SolveReport, SolverConfig, SolverError};
