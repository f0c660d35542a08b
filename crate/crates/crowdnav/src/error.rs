use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Rejection sampling exhausted its retry budget; the requested density is
    /// too high for a non-overlapping initialization.
    #[error("placement failed after {attempts} attempts with {placed} agents placed")]
    PlacementFailed { placed: usize, attempts: usize },

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mean flow velocity is undefined for an empty crowd")]
    EmptyCrowd,

    #[error("mean flow velocity is undefined for a scenario without a flow direction")]
    NoFlowDirection,

    #[error("empty input: {0}")]
    EmptyInput(String),
}
