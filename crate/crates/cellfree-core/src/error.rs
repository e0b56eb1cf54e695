//! Error taxonomy shared by all simulator stages.

/// Failure modes surfaced by the library.
///
/// The variants are kept coarse on purpose: callers (CLI, tests) only need to
/// distinguish bad inputs from numerical breakdown and from wiring mistakes.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// A configuration value is out of its documented domain.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough data to form a statistical quantity (e.g. moment estimates
    /// requested from fewer than two Monte Carlo samples).
    #[error("statistics error: {0}")]
    Statistics(String),

    /// A linear system could not be solved to the required accuracy, or a
    /// matrix that must be positive definite was not.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A lookup for a quantity outside its declared availability, e.g. a
    /// channel estimate an AP never computed under the active scope. Always a
    /// scheme-wiring bug, never a data problem.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// A message set handed to a master AP is malformed (wrong sender set,
    /// duplicate sender, out-of-order reports).
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
