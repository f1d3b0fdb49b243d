//! Monte Carlo weak-approximation toolkit for one- and multi-dimensional SDEs
//! with constant diffusion and irregular (non-smooth, possibly discontinuous)
//! drift, discretized by the Euler-Maruyama scheme on a uniform grid.
//!
//! The crate is organized around a handful of cooperating modules:
//!
//! * [`model`] — problem descriptions: drift with declared regularity
//!   (Holder exponent and/or a monotone/indicator "irregular" class), constant
//!   diffusion matrices with checked inverses, path functionals, domains for
//!   killed diffusions, validation, and predicted weak-convergence exponents.
//! * [`sampling`] — deterministic counter-based random streams plus the exact
//!   joint sampler for a Brownian increment together with the running maximum
//!   of a drifted Brownian motion over a step (used by reflected schemes).
//! * [`em`] — uniform grids, grid paths, Brownian and Euler-Maruyama path
//!   simulation with coupled increments, and functional evaluation.
//! * [`girsanov`] — log-space likelihood-ratio weights turning expectations
//!   under the scheme into weighted expectations of shifted Brownian paths,
//!   coupled coarse/fine weight differences, and weight-moment diagnostics.
//! * [`reflected`] — discrete Skorohod map and the reflected Euler scheme on
//!   the half-line with exact per-step running-maximum sampling.
//! * [`killed`] — discrete exit times, killed payoff estimation, and a
//!   closed-form survival oracle for driftless intervals.
//! * [`mc`] — batch Monte Carlo engine with mergeable sufficient statistics,
//!   weak-error ladders against fine-grid references, and rate fitting.
//! * [`builtins`] — a small catalogue of ready-made drifts and problems.
//! * [`experiment`] — config-file driven pipelines producing CSV/JSON reports.
//!
//! Everything is deterministic given a master seed: each Monte Carlo batch
//! draws from its own stream of a counter-based generator, so results do not
//! depend on worker count or scheduling.

pub mod builtins;
pub mod em;
pub mod error;
pub mod experiment;
pub mod girsanov;
pub mod killed;
pub mod mc;
pub mod model;
pub mod reflected;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result, SampleFailure};
pub use model::{
    ConstantDiffusion, DomainShape, DomainSpec, DriftSpec, GrowthClass, PathFunctional,
    ProblemKind, RatePrediction, SdeProblem,
};
pub use sampling::RngStream;
