//! One-step advance maps for the nonconserved (`ac`) and conserved (`ch`)
//! flows.
//!
//! Step functions are pure: they consume a space, a configuration and the
//! current state and return the new state plus solver statistics. Runs over
//! different configurations may execute concurrently on a shared space.

pub mod ac;
pub mod ch;

use crate::solvers::{LbfgsConfig, NewtonConfig};

/// Solver parameters shared by the steppers.
#[derive(Debug, Clone, Default)]
pub struct SolverConfig {
    pub newton: NewtonConfig,
    pub lbfgs: LbfgsConfig,
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub newton_iters: usize,
    pub linear_iters: usize,
    pub lbfgs_iters: Option<usize>,
    /// Set when a failed Newton solve was replaced by energy minimization.
    pub fallback_used: bool,
    /// Set when a lumped scheme ran on a mesh violating the Delaunay edge
    /// condition (the maximum-principle hypothesis).
    pub delaunay_warning: bool,
}
