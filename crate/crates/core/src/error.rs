use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("boundary condition covers {got} vertices, graph has {expected} boundary vertices")]
    BoundaryMismatch { expected: usize, got: usize },
    #[error("N*Delta must be even (N={n}, Delta={degree})")]
    Parity { n: usize, degree: usize },
    #[error("configuration model exhausted {attempts} attempts without a simple graph")]
    RetryCapExceeded { attempts: usize },
    #[error("ball of radius {radius} wraps around a torus of side {side}")]
    BallWraps { radius: usize, side: usize },
    #[error("instance too large: {what} is {size}, cap is {cap}")]
    SizeCap { what: &'static str, size: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("support mismatch: {left} vs {right} atoms")]
    SupportMismatch { left: usize, right: usize },
    #[error("chains in a coupling bundle must share graph, parameters and boundary")]
    MixedBundle,
    #[error("coloring mode requires a boundary block in the partition")]
    MissingBoundaryBlock,
    #[error("duplicate seed label {0:?}")]
    DuplicateSeedLabel(String),
    #[error("malformed annulus: inner {inner}, outer {outer}, k {k}")]
    MalformedAnnulus { inner: usize, outer: usize, k: usize },
    #[error("conditional sampler failed: {0}")]
    SamplerFailure(String),
    #[error("estimation budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
