use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    /// The program is malformed (index out of range, bad bounds, non-finite data).
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A cut returned by a callback references unknown variables or is not finite.
    #[error("malformed cut from callback: {0}")]
    MalformedCut(String),
    /// The simplex failed to converge within its iteration budget.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The cut callback itself reported a failure.
    #[error("cut callback failed: {0}")]
    Callback(String),
}
