use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("single-atom amplitudes are not normalized: sum |c|^2 = {0}")]
    Unnormalized(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown operator kind `{0}`")]
    UnknownOperator(String),
    #[error("sector n = {n} exceeds the {what} cap of {cap}")]
    SectorCap { n: u32, cap: u32, what: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("atom-number window is empty")]
    EmptyWindow,
    #[error("atom-number window holds only {0} of the Poisson mass")]
    WindowTooNarrow(f64),
    #[error("f*dt = {0} exceeds the single-click limit 0.05")]
    StepTooLarge(f64),
    #[error("click probabilities ({plus}, {minus}) are not a distribution; dt too large")]
    BadClickProbability { plus: f64, minus: f64 },
    #[error("{requested} steps exceed the step budget of {budget}")]
    StepBudget { requested: u64, budget: u64 },
    #[error("trace drifted by {0} between renormalizations; reduce dt")]
    TraceDrift(f64),
    #[error("covariance lost positive semidefiniteness (smallest eigenvalue {0}); reduce dt")]
    CovarianceNotPsd(f64),
    #[error("records do not share a time grid")]
    GridMismatch,
    #[error("noise path has {found} increments, expected {expected}")]
    NoisePathMismatch { expected: usize, found: usize },
    #[error("need at least {needed} records, got {found}")]
    TooFewRecords { needed: usize, found: usize },
}
