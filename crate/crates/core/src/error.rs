//! Error types shared across the crate.

use thiserror::Error;

/// Domain and construction errors for model types and pure evaluations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("endowment must be positive and finite, got {0}")]
    InvalidEndowment(f64),
    #[error("effort must lie in [0, 1), got {0}")]
    EffortOutOfRange(f64),
    #[error("transfer function argument must be non-negative, got {0}")]
    NegativeInvestment(f64),
    #[error("invalid transfer spec: {0}")]
    InvalidTransfer(String),
    #[error("preference odds must be positive and finite, got {0}")]
    InvalidOdds(f64),
    #[error("population must contain at least one agent")]
    EmptyPopulation,
    #[error("endowments must sum to the population size {expected}, got {actual}")]
    UnbalancedEndowments { expected: f64, actual: f64 },
    #[error("grid requires w_min < w_max with w_min > 0, got [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("grid requires at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
}

/// Failures while stepping a population between generations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("total competitiveness is zero: no descendant can be assigned endowment")]
    DegeneratePopulation,
    #[error("endowment of agent {agent} underflowed to zero at generation {generation}")]
    EndowmentUnderflow { agent: usize, generation: usize },
}

/// Precondition failures in the analysis layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("analysis requires a converged equilibrium")]
    NotConverged,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Rejections while reconstructing a transfer function from an effort table.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("effort table must have at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("effort table abscissas must be strictly increasing (row {0})")]
    NonIncreasingW(usize),
    #[error("effort values must lie in [0, 1) (row {0})")]
    EffortOutOfRange(usize),
    #[error("investment w*g decreases at row {0}: effort table violates monotone investment")]
    DecreasingInvestment(usize),
    #[error("anchor abscissa {anchor} lies outside the covered investment range [{lo}, {hi}]")]
    AnchorOutOfRange { anchor: f64, lo: f64, hi: f64 },
    #[error("anchor value must be positive, got {0}")]
    InvalidAnchor(f64),
    #[error("declared jump at w0={0} does not split the table rows")]
    MisplacedJump(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}
