use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample count {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("sample count {0} is below the minimum of 16")]
    TooFewSamples(usize),
    #[error("domain length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("probe of width {sigma} is too wide for a domain of length {length}")]
    TruncationRisk { sigma: f64, length: f64 },
    #[error("coefficient is not localized inside the domain (|a| = {edge_value:e} at the boundary)")]
    CoefficientNotLocalized { edge_value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("relative mass drift {drift:e} exceeds {tolerance:e}")]
    MassDrift { drift: f64, tolerance: f64 },
    #[error("data norm {norm:e} is not below the small-data radius {eta:e}")]
    NotSmallData { norm: f64, eta: f64 },
    #[error("no convergence by horizon {horizon}: last gap {gap:e} above tolerance {tol:e}")]
    NoConvergence { horizon: f64, gap: f64, tol: f64 },
    #[error("horizon {horizon} needs a domain of length at least {required}, have {length}")]
    DomainTooSmall { horizon: f64, required: f64, length: f64 },
    #[error("probe set is empty")]
    EmptyProbeSet,
    #[error("lambda(p) has a pole at p = 2; got p = {0}")]
    PoleAtTwo(f64),
    #[error("parameter {name} = {value} outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
    #[error("kernel transform diverges at xi = 0")]
    DivergentAtZero,
    #[error("quadrature exceeded its budget of {budget} evaluations (error estimate {error:e})")]
    QuadratureBudgetExceeded { budget: usize, error: f64 },
    #[error("normalization {0:e} underflows")]
    NormalizationUnderflow(f64),
    #[error("sigma = {0} is too large for the logarithmic normalization")]
    SigmaTooLarge(f64),
    #[error("distance {0} is not small")]
    DistanceNotSmall(f64),
}

impl Error {
    /// Errors caused by the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MassDrift { .. }
                | Error::NoConvergence { .. }
                | Error::QuadratureBudgetExceeded { .. }
                | Error::NormalizationUnderflow(_)
        )
    }
}
