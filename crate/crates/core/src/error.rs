use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid spacing must be positive and finite, got {0}")]
    NonPositiveSpacing(f64),
    #[error("invalid grid shape: {0}")]
    BadShape(String),
    #[error("weight a must be positive: found {value} at cell {cell}")]
    NonPositiveWeightA { cell: usize, value: f64 },
    #[error("weight a = {value} at cell {cell} is below the declared lower bound mu = {mu}")]
    WeightBelowMu { cell: usize, value: f64, mu: f64 },
    #[error("declared lower bound mu must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("weight b must be nonnegative: found {value} at cell {cell}")]
    NegativeWeightB { cell: usize, value: f64 },
    #[error("weight {field} is not finite at cell {cell}")]
    NonFiniteWeight { field: &'static str, cell: usize },
    #[error("weight b has zero total mass on the domain")]
    ZeroMassB,
    #[error("domain mask selects no cells")]
    EmptyDomain,
    #[error("domain mask is not connected")]
    DisconnectedMask,
    #[error("bad weight expression {expr:?}: {reason}")]
    BadExpression { expr: String, reason: String },
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("field is negative at cell {0}")]
    NegativeField(usize),
    #[error("Rayleigh quotient denominator vanishes")]
    ZeroDenominator,
    #[error("exponent p = {0} is outside (1, 2]")]
    InvalidExponent(f64),
    #[error("weight b vanishes on the domain")]
    DegenerateDomain,
    #[error("eigen solve did not converge")]
    NotConverged,
    #[error("integrability exponent r = {r} must exceed the dimension {dim}")]
    BadExponent { r: f64, dim: usize },
    #[error("parameter t must be nonnegative, got {0}")]
    NegativeT(f64),
    #[error("brute force supports at most {max} cells, domain has {cells}")]
    TooLarge { cells: usize, max: usize },
    #[error("set is empty")]
    EmptySet,
    #[error("set touches the domain boundary")]
    TouchesBoundary,
    #[error("layer width {eps} is thinner than the grid spacing {spacing}")]
    LayerTooThin { eps: f64, spacing: f64 },
    #[error("p schedule is invalid: {0}")]
    BadSchedule(String),
    #[error("not enough converged records: need {need}, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("domains are not comparable: {0}")]
    NotComparable(String),
    #[error("Lipschitz constants must be strictly increasing and >= 1")]
    UnsortedKs,
}

pub type Result<T> = std::result::Result<T, Error>;
