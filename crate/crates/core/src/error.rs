//! Crate-wide error types.
//!
//! Two layers are distinguished: [`Error`] is a hard failure (invalid
//! configuration, impossible request, numerical breakdown of a whole run),
//! while [`SampleFailure`] tags a single Monte Carlo path as invalid. Invalid
//! paths are counted by the engine and only fail the run when their fraction
//! exceeds the tolerated threshold or an entire batch is lost.

use std::fmt;

use thiserror::Error;

/// Hard errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Catch-all for malformed arguments.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A pivot during diffusion-matrix inversion fell below the singularity
    /// threshold (1e-12 times the max row norm).
    #[error("singular diffusion matrix: pivot magnitude {pivot:.3e} below threshold {threshold:.3e}")]
    SingularDiffusion { pivot: f64, threshold: f64 },
    /// The computed inverse failed the residual check.
    #[error("diffusion inverse failed residual check: ||sigma*inv - I||_inf = {residual:.3e} (limit 1e-10)")]
    IllConditionedDiffusion { residual: f64 },
    /// A problem description failed validation; the message lists violations.
    #[error("problem failed validation: {0}")]
    Validation(String),
    /// A requested step size does not divide the horizon.
    #[error("h must equal T/n for an integer n: h = {h}, T = {horizon}")]
    StepNotDivisor { h: f64, horizon: f64 },
    /// The fine reference grid is not fine enough relative to the ladder.
    #[error("reference step {h_ref} must be at most one eighth of the smallest ladder step {h_min}")]
    ReferenceTooCoarse { h_ref: f64, h_min: f64 },
    /// Too few ladder points rise above the noise floor to fit anything.
    #[error("degenerate ladder: only {usable} usable points (need at least 2)")]
    DegenerateLadder { usable: usize },
    /// Every path in one batch was invalid; the run is aborted.
    #[error("all {size} samples in batch {batch} were invalid (first failure: {first})")]
    AllInvalidBatch { batch: u32, size: u64, first: SampleFailure },
    /// The engine refuses runs that are too small to report a standard error.
    #[error("need at least {min} paths, got {got}")]
    TooFewPaths { got: u64, min: u64 },
    /// Unknown name in the builtin problem catalogue.
    #[error("unknown builtin problem '{0}' (see `list-builtins`)")]
    UnknownBuiltin(String),
    /// Unknown name in the builtin scalar-function registry.
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    /// The requested prediction needs a Holder exponent the drift lacks.
    #[error("missing Holder exponent: {0}")]
    MissingHolderAlpha(String),
    /// Configuration-file problems (parse errors, missing sections, ...).
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Reason a single simulated path was discarded.
///
/// Carried per path so diagnostics can name the first offending step; the
/// Monte Carlo engine aggregates counts and marks estimates failed when the
/// invalid fraction exceeds 1e-4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFailure {
    /// Drift evaluation returned a non-finite component.
    NonFiniteDrift { step: usize },
    /// A state component became non-finite.
    NonFiniteState { step: usize },
    /// The functional evaluated to a non-finite value.
    NonFinitePayoff,
    /// Exponentiating a log-weight overflowed.
    WeightOverflow,
}

impl fmt::Display for SampleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleFailure::NonFiniteDrift { step } => {
                write!(f, "non-finite drift at step {step}")
            }
            SampleFailure::NonFiniteState { step } => {
                write!(f, "non-finite state at step {step}")
            }
            SampleFailure::NonFinitePayoff => write!(f, "non-finite payoff"),
            SampleFailure::WeightOverflow => write!(f, "weight overflow"),
        }
    }
}
