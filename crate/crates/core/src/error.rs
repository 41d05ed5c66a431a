use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid STAR coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("receive beamformer is zero")]
    DegenerateReceiver,

    #[error("beampattern is identically zero on the grid")]
    DegeneratePattern,

    #[error("numerical error: {0}")]
    Numerical(String),

    /// No sensing beamformer inside the power budget reaches the SINR threshold.
    #[error(
        "sensing requirement infeasible: needs at least {required_watt:.3e} W, budget is {budget_watt:.3e} W"
    )]
    InfeasibleSensing { required_watt: f64, budget_watt: f64 },

    #[error("STAR coefficient program infeasible: {0}")]
    StarInfeasible(String),

    #[error("conic solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
