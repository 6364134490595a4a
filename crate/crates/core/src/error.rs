use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration violates one of its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("decoy intensity {mu} must be strictly below signal intensity {mu_prime}")]
    IntensityOrdering { mu: f64, mu_prime: f64 },

    /// The yield constraints admit no solution; `violation` is the amount by
    /// which the closest candidate misses the constraint set.
    #[error("infeasible yield constraints (violation {violation:e})")]
    Infeasible { violation: f64 },

    #[error("no vacuum pulses were observed; use the two-intensity variant")]
    MissingVacuumData,

    #[error("QBER is undefined for a zero counting rate")]
    ZeroYield,

    #[error("single-photon yield bound is zero; no key can be distilled")]
    NoSinglePhotonBound,

    #[error("insufficient statistics for {field}: expected count {expected_count} < 10")]
    InsufficientStatistics {
        field: &'static str,
        expected_count: f64,
    },

    #[error("no key at zero distance; secure distance is undefined")]
    NoSecureDistance,

    #[error("no intensity pair on the grid yields a positive key rate")]
    NoKeyAtAnyIntensity,
}
