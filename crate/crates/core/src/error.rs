use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("capacity argument {0} is outside the domain of C(x)")]
    CapacityDomain(f64),

    #[error("field `{field}` is not finite ({value})")]
    NonFinite { field: &'static str, value: f64 },

    #[error("power `{field}` must be nonnegative, got {value}")]
    NegativePower { field: &'static str, value: f64 },

    #[error("channel ordering violated: h2^2 = {h2_sq} < h1^2 = {h1_sq}; h2 (user 1, the relaying user) must be the stronger link")]
    Ordering { h1_sq: f64, h2_sq: f64 },

    #[error("invalid time share ({alpha}, {beta}, {gamma}): fractions must lie in [0,1] and sum to 1")]
    TimeShare { alpha: f64, beta: f64, gamma: f64 },

    #[error("infeasible power split: {0}")]
    InfeasibleSplit(String),

    #[error("invalid outer point: {0}")]
    OuterPoint(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid search domain: {0}")]
    Domain(String),

    #[error("objective returned non-finite value {value} at {point:?}")]
    NonFiniteObjective { point: Vec<f64>, value: f64 },
}
