use thiserror::Error;

use crate::Mask;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative mass {value} at mask {mask:#x}")]
    NegativeMass { mask: Mask, value: f64 },

    #[error("measure is not normalized: total mass deviates from 1 by {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("measure has empty support")]
    EmptySupport,

    #[error("conditioning event has zero mass")]
    ZeroMassEvent,

    #[error("state space too large: n = {n} exceeds the limit {limit}")]
    StateSpaceTooLarge { n: usize, limit: usize },

    #[error("kernel is not a projection (residual {residual:e})")]
    NotAProjection { residual: f64 },

    #[error("graph is disconnected")]
    DisconnectedGraph,

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("factors do not decompose the identity (residual {residual:e})")]
    BadDecomposition { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("coordinate {coordinate} splits the state space with an empty part")]
    EmptyPart { coordinate: usize },

    #[error("no coupling for parts ({from}, {to}) with positive projection rate")]
    MissingCoupling { from: usize, to: usize },

    #[error("no coupling exists on the required support (max-flow deficit {deficit:e})")]
    InfeasibleCoupling { deficit: f64 },

    #[error("states are not bitmasks of a single cube of dimension {n}")]
    NotOnCube { n: usize },

    #[error("row {state:#x} sums to {sum:e}, expected 0")]
    RowSumViolation { state: Mask, sum: f64 },

    #[error("detailed balance fails on ({x:#x}, {y:#x}) with relative deviation {deviation:e}")]
    DetailedBalanceViolation { x: Mask, y: Mask, deviation: f64 },

    #[error("negative rate {rate:e} on ({x:#x}, {y:#x})")]
    NegativeRate { x: Mask, y: Mask, rate: f64 },

    #[error("function domain does not match the state space")]
    DomainMismatch,

    #[error("generator is reducible ({components} communicating classes)")]
    Reducible { components: usize },

    #[error("alpha * v^2 = {value} exceeds 1; shrink the function")]
    ScaleViolation { value: f64 },

    #[error("theta^2 * alpha * v^2 = {value} is outside the radius of convergence")]
    OutOfRadius { value: f64 },

    #[error("empty theta grid")]
    EmptyGrid,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NegativeMass { .. } => "NegativeMass",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::EmptySupport => "EmptySupport",
            Error::ZeroMassEvent => "ZeroMassEvent",
            Error::StateSpaceTooLarge { .. } => "StateSpaceTooLarge",
            Error::NotAProjection { .. } => "NotAProjection",
            Error::DisconnectedGraph => "DisconnectedGraph",
            Error::NonFinite => "NonFinite",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::BadDecomposition { .. } => "BadDecomposition",
            Error::NotPsd { .. } => "NotPSD",
            Error::EmptyPart { .. } => "EmptyPart",
            Error::MissingCoupling { .. } => "MissingCoupling",
            Error::InfeasibleCoupling { .. } => "InfeasibleCoupling",
            Error::NotOnCube { .. } => "NotOnCube",
            Error::RowSumViolation { .. } => "RowSumViolation",
            Error::DetailedBalanceViolation { .. } => "DetailedBalanceViolation",
            Error::NegativeRate { .. } => "NegativeRate",
            Error::DomainMismatch => "DomainMismatch",
            Error::Reducible { .. } => "Reducible",
            Error::ScaleViolation { .. } => "ScaleViolation",
            Error::OutOfRadius { .. } => "OutOfRadius",
            Error::EmptyGrid => "EmptyGrid",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }
}
