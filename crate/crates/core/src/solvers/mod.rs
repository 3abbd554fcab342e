//! Convex subproblem solvers used by the pointing optimizers.

pub mod rank_one;
pub mod sca;
pub mod sdp;

pub use rank_one::rank_one_extract;
pub use sca::{solve_sca_subproblem, ScaSubproblem};
pub use sdp::{dual_slack, solve_sdp, SdpProblem, SdpSolution};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub objective: f64,
    pub iterations: usize,
    pub max_violation: f64,
}
