//! Structured error type shared by every module of the crate.
//!
//! Numerical routines here refuse bad input loudly instead of silently
//! producing NaNs: dimension mismatches, out-of-range fractional orders,
//! quadrature budgets that cannot reach the requested tolerance, and
//! series truncations that cannot resolve the requested time all map to
//! distinct variants so callers (and the CLI) can report exactly what
//! went wrong.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Grid levels need at least one interior point (n >= 2).
    #[error("grid level n = {n} is too small; need n >= 2")]
    InvalidLevel { n: usize },

    /// Fractional order outside the admissible open interval.
    #[error("fractional order alpha = {alpha} outside the open interval ({lo}, {hi})")]
    AlphaOutOfRange { alpha: f64, lo: f64, hi: f64 },

    /// Grünwald scheme order outside (0, 1); integer orders are out of scope.
    #[error("derivative order r = {r} outside the open interval (0, 1)")]
    OrderOutOfRange { r: f64 },

    /// A numeric input that must be finite was NaN or infinite.
    #[error("non-finite input for {what}")]
    NonFinite { what: &'static str },

    /// Sampling grid too coarse for the requested number of sine modes.
    #[error(
        "aliasing: {modes} sine modes need a grid with at least {required} intervals, got {m}"
    )]
    Aliasing {
        modes: usize,
        required: usize,
        m: usize,
    },

    /// Vector length disagrees with what the operator/grid expects.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Time argument must be positive (semigroups and kernels at t <= 0).
    #[error("time t = {t} must be positive for {what}")]
    NonPositiveTime { t: f64, what: &'static str },

    /// Negative time rejected where t >= 0 is required.
    #[error("time t = {t} must be non-negative")]
    NegativeTime { t: f64 },

    /// Spatial point outside the closed unit interval.
    #[error("point {coord} = {value} outside [0, 1]")]
    OutOfDomain { coord: &'static str, value: f64 },

    /// Adaptive quadrature exhausted its interval budget above tolerance.
    #[error("quadrature failed to meet relative tolerance {requested:e}; achieved {achieved:e}")]
    QuadratureFailure { requested: f64, achieved: f64 },

    /// Series truncation cannot resolve the request (t too small or cap hit).
    #[error("series truncation failure for {what}: {detail}")]
    TruncationFailure { what: &'static str, detail: String },

    /// Grünwald evaluation point must lie on the sample grid j/n.
    #[error("evaluation point x = {x} is not a grid point of the {n}-point lattice")]
    OffGridPoint { x: f64, n: usize },

    /// Not enough function samples for the requested Grünwald sum.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// Noise bundle restriction wider than the parent bundle.
    #[error("cannot restrict a {available}-mode noise bundle to {requested} modes")]
    RestrictionTooWide { requested: usize, available: usize },

    /// Time grids of two paths (or a path and a bundle) disagree.
    #[error("time grids disagree: {detail}")]
    GridMismatch { detail: String },

    /// Invalid time grid parameters.
    #[error("invalid time grid: {detail}")]
    InvalidTimeGrid { detail: String },

    /// Composite experiment configuration failed validation.
    #[error("invalid configuration: {reason}")]
    ConfigInvalid { reason: String },

    /// Rate fitting needs at least three strictly positive error values.
    #[error("rate fit rejected: {reason}")]
    FitRejected { reason: String },

    /// Solver failure inside the Monte-Carlo loop, tagged with its origin.
    #[error("sample {sample}, level n = {level}: {source}")]
    SampleFailure {
        sample: usize,
        level: usize,
        source: Box<Error>,
    },

    /// Background thread pool could not be constructed.
    #[error("thread pool construction failed: {0}")]
    ThreadPool(String),
}
