//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (mesh counts, rectangle, scheme parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// A mesh element with non-positive signed area was encountered.
    #[error("degenerate element {element}: signed area {area:.3e}")]
    DegenerateElement { element: usize, area: f64 },

    /// A precondition on an operation's input was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative linear solver failed to reach its tolerance.
    #[error("linear solve failed after {iterations} iterations: relative residual {residual:.3e} > tol {tol:.3e}")]
    LinearSolve {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// CG detected a direction of non-positive curvature.
    #[error("indefinite operator detected at CG iteration {iteration}: p'Ap = {curvature:.3e}")]
    Indefinite { iteration: usize, curvature: f64 },

    /// Newton could not decrease the residual norm along its search direction.
    #[error("nonconvex step: residual norm {residual:.3e} not decreased after {halvings} halvings at Newton iteration {iteration}")]
    NonconvexStep {
        iteration: usize,
        halvings: usize,
        residual: f64,
        /// Last Newton iterate, for diagnostics and restarts.
        last_iterate: Vec<f64>,
    },

    /// Newton ran out of iterations.
    #[error("Newton did not converge: residual {residual:.3e} > tol {tol:.3e} after {iterations} iterations")]
    NewtonMaxIter {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// Line search in a minimizer failed to make progress.
    #[error("line search failed at iteration {iteration}: no decrease along search direction")]
    LineSearch { iteration: usize },

    /// The preconditioner cannot be built for the requested parameters.
    #[error("preconditioner unavailable: gamma = k/eps^2 = {gamma:.3e} >= 1; use an energy-minimization stepper instead")]
    PreconditionerUnavailable { gamma: f64 },

    /// File input/output failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
