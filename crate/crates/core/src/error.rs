//! Error type shared by the numerical modules.

use crate::charts::ChartId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameter validation failed at construction.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A closed-form object does not exist for the given parameters.
    #[error("existence error: {0}")]
    Existence(String),

    /// A chart change was requested outside the overlap of the two charts.
    #[error("point not in overlap of {from:?} and {to:?}: {condition}")]
    OutOfOverlap {
        from: ChartId,
        to: ChartId,
        condition: String,
    },

    /// A point claimed to lie on the critical manifold does not.
    #[error("point is off the critical manifold (slaving residual {residual:.3e})")]
    OffManifold { residual: f64 },

    /// An iterative solver exhausted its iteration budget.
    #[error("{what} did not converge after {iters} iterations")]
    NonConvergence { what: String, iters: usize },

    /// A scalar root finder was handed an interval without a sign change.
    #[error("root not bracketed for {0}")]
    RootNotBracketed(String),

    /// A stability crossing was real, not a complex pair.
    #[error("crossing eigenvalue is real, not a complex pair")]
    NotAComplexPair,

    /// The requested value sits on a classification boundary.
    #[error("boundary error: {0}")]
    Boundary(String),

    /// Adaptive step size fell below the representable minimum.
    #[error("step size underflow at t = {t:.6e}")]
    StepSizeUnderflow { t: f64 },

    /// The integrator produced a non-finite state.
    #[error("non-finite state at t = {t:.6e}")]
    NonFiniteState { t: f64 },

    /// A piecewise-linear query was made on the wrong side of a parameter boundary.
    #[error("wrong side: {0}")]
    WrongSide(String),

    /// An event landed degenerately on a switching manifold.
    #[error("degenerate switching event at t = {t:.6e}: {what}")]
    DegenerateEvent { t: f64, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
