use thiserror::Error;

/// Errors raised by the persuasion, equilibrium and branching routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("degenerate prior: effort {lambda} leaves a state with zero probability")]
    DegeneratePrior { lambda: f64 },

    #[error("cost function violates its regularity conditions: {0}")]
    InvalidCost(String),

    #[error("invalid signaling policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid posterior distribution: {0}")]
    InvalidPosterior(String),

    #[error("posterior mean {mean} differs from the prior {lambda} (not Bayes plausible)")]
    NotPlausible { mean: f64, lambda: f64 },

    #[error("effort {lambda} exceeds the maximum implementable effort {lambda_bar}")]
    InfeasibleEffort { lambda: f64, lambda_bar: f64 },

    #[error("no nonnegative posterior distribution meets the constraints at effort {lambda}")]
    NoFeasiblePosterior { lambda: f64 },

    #[error("posterior violates the constraints: plausibility gap {plausibility_gap:e}, IC residual {ic_residual:e}")]
    ConstraintViolation {
        plausibility_gap: f64,
        ic_residual: f64,
    },

    #[error("equilibrium oracle disagrees with the closed form: {0}")]
    OracleMismatch(String),

    #[error("stationary trend undefined for alpha_xx = 1, alpha_yx = 0")]
    DegenerateTrend,

    #[error("mean offspring {m} <= 1: the process is subcritical and has no positive limit population")]
    Subcritical { m: f64 },

    #[error("the branching process is extinct (no comment holders left)")]
    Extinct,

    #[error("invalid branching configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot condition on state {omega}: it has zero probability under the prior")]
    ImpossibleCondition { omega: u8 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}
