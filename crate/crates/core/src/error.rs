use thiserror::Error;

/// Reasons a [`Market`](crate::model::Market) fails validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("payoffs must satisfy v_good > 0 > v_bad (got v_good={v_good}, v_bad={v_bad})")]
    PayoffSign { v_good: f64, v_bad: f64 },
    #[error("prior {prior} must lie in (threshold, 1] with myopic threshold {threshold}")]
    PriorRange { prior: f64, threshold: f64 },
    #[error("prior {prior} is not above the myopic threshold {threshold}")]
    PriorBelowThreshold { prior: f64, threshold: f64 },
    #[error("cohort discounts must be strictly decreasing (cohort {index}: {previous} then {current})")]
    CohortOrder { index: usize, previous: f64, current: f64 },
    #[error("cohort {index} has invalid discount {discount} or mass {mass}")]
    CohortValue { index: usize, discount: f64, mass: f64 },
    #[error("market needs at least one cohort")]
    NoCohorts,
    #[error("evidence rate {name}={value} must be finite and nonnegative")]
    NegativeRate { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("flow rate is unbounded (rate_bad = 0 or belief = 1); treat as an investment atom")]
    RateDegenerate,
    #[error("integration step {step} too large: phase boundary overshoot {overshoot:e}")]
    StepTooLarge { step: f64, overshoot: f64 },
    #[error("unsupported policy: {0}")]
    UnsupportedPolicy(String),
    #[error("construction incomplete at horizon {horizon}")]
    HorizonTooShort { horizon: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("release infeasible for candidate {hat_i}: {value_release} <= {value_now}")]
    InfeasibleRelease { hat_i: usize, value_release: f64, value_now: f64 },
    #[error("relaxed problem constraint violated: {0}")]
    ConstraintViolation(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Invalid(#[from] MarketError),
    #[error("invalid schedule: {0}")]
    Schedule(String),
}

pub type Result<T, E = SolveError> = std::result::Result<T, E>;
