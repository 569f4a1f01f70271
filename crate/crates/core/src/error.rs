use thiserror::Error;

/// Failure modes surfaced by the library.
///
/// Anything that indicates a caller bug (index out of range, mismatched
/// lengths between paired slices) panics instead, as usual for Rust APIs.
#[derive(Debug, Error)]
pub enum Error {
    /// A model file or dataset violates a structural invariant.
    #[error("invalid model: {0}")]
    Model(String),

    /// A configuration value violates a precondition.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The critical-point solver could not bracket a sign change.
    #[error("no sign change of the mean score on [-{0:e}, {0:e}]")]
    NoBracket(f64),

    /// The critical-point solver stalled before reaching tolerance.
    #[error("critical-point iteration failed to converge ({0} iterations)")]
    NoConvergence(usize),

    /// An iterate left the representable range mid-run.
    #[error("iterate became non-finite at step {step}")]
    Diverged { step: usize },

    /// A requested evaluation is outside the formula's stated validity range.
    #[error("out of validity range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
