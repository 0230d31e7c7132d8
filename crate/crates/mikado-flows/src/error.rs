//! Error taxonomy shared by every module of the toolkit.
//!
//! The variants mirror the failure modes of the construction itself:
//! sampling and resolution problems on the grid, violated zero-mean or
//! solenoidality requirements, structurally invalid parameters, an
//! infeasible exponent system, and a resolution budget that the fast
//! oscillation parameters outgrow.

use thiserror::Error;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An analytic evaluator produced a non-finite value at a node.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// The requested operation is not resolved on the given grid
    /// (off-grid translation without an analytic form, dilation factor
    /// not dividing n, or the 16-nodes-per-feature rule failing).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// An argument lies outside the documented validity range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A field that must have zero grid mean does not.
    #[error("mean error in {context}: |mean| = {mean:.3e} exceeds tolerance {tol:.3e}")]
    Mean {
        /// Which construction required the zero mean.
        context: String,
        /// Measured grid mean.
        mean: f64,
        /// Tolerance that was exceeded.
        tol: f64,
    },

    /// The spectral tail beyond the resolved band carries too much energy.
    #[error("aliasing error: {0}")]
    Aliasing(String),

    /// A structural parameter constraint is violated (for example the very
    /// fast oscillation ν not being a multiple of λ).
    #[error("parameter error: {0}")]
    Param(String),

    /// The exponent inequality system has no solution for these inputs.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The resolution rule demands a finer grid than the configured budget.
    #[error(
        "budget exceeded: needs n ≥ {required_n} but budget is n = {budget_n} ({blocking})"
    )]
    BudgetExceeded {
        /// Smallest number of points per axis that would satisfy the rule.
        required_n: usize,
        /// Configured budget on points per axis.
        budget_n: usize,
        /// The inequality or rule that could not be met.
        blocking: String,
    },

    /// A velocity field that must be divergence-free is not.
    #[error("solenoidality error: {0}")]
    Solenoidality(String),

    /// Underlying I/O failure (field dumps, report files).
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Report (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
