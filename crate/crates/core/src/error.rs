use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Feller condition violated: 2*lambda_y*y_bar = {lhs} must exceed sigma_y^2 = {rhs}")]
    FellerViolation { lhs: f64, rhs: f64 },

    #[error("correlation rho = {0} outside [-1, 0]")]
    CorrelationOutOfRange(f64),

    #[error("parameter `{name}` = {value} must be {requirement}")]
    NonpositiveParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("relative risk aversion gamma = 1 (log utility) is not supported")]
    GammaIsOne,

    #[error("Riccati discriminant D = {0} is not positive")]
    NonpositiveDiscriminant(f64),

    #[error("time {t} outside the horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("grid too coarse: interpolation error estimate {estimate:e} exceeds {tolerance:e}")]
    GridTooCoarse { estimate: f64, tolerance: f64 },

    #[error("ODE integration produced a non-finite state at t = {0}")]
    NonFiniteState(f64),

    #[error("stationary expectation diverges: {0}")]
    DivergentIntegral(String),

    #[error("non-finite Monte Carlo sample at path {0}")]
    NonFiniteSample(u64),

    #[error("time grid too coarse: halving the step moved the pilot estimate by {shift:e} (> {se:e})")]
    StepTooCoarse { shift: f64, se: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Validation failures, as opposed to numerical ones.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::FellerViolation { .. }
                | Error::CorrelationOutOfRange(_)
                | Error::NonpositiveParameter { .. }
                | Error::GammaIsOne
                | Error::TimeOutOfRange { .. }
                | Error::InvalidConfig(_)
        )
    }
}
