use thiserror::Error;

use crate::model::Picos;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency undefined for gated domain {domain}")]
    GatedFrequency { domain: u32 },

    #[error("infeasible state for layer {layer}: {reason}")]
    InfeasibleState { layer: u32, reason: String },

    #[error("deadline violated: inference takes {t_infer} ps but the deadline is {t_max} ps")]
    DeadlineViolated { t_infer: Picos, t_max: Picos },

    #[error("power-down needs {needed} ps of slack, only {slack} ps available")]
    PowerDownInfeasible { needed: Picos, slack: Picos },

    #[error("infeasible instance: minimum achievable latency is {min_latency} ps, deadline is {t_max} ps")]
    Infeasible { min_latency: Picos, t_max: Picos },

    #[error("infeasible at nominal: nominal latency is {t_infer} ps, deadline is {t_max} ps")]
    InfeasibleAtNominal { t_infer: Picos, t_max: Picos },

    #[error("greedy failed to meet deadline: best reachable latency {t_infer} ps, deadline {t_max} ps")]
    GreedyFailed { t_infer: Picos, t_max: Picos },

    #[error("infeasible for all rail sets (fastest schedule needs {min_latency} ps, deadline is {t_max} ps)")]
    NoFeasibleRailSet { min_latency: Picos, t_max: Picos },

    #[error("oracle capacity exceeded: {labels} labels against a cap of {cap}; use the lambda-DP solver")]
    OracleCapacity { labels: u64, cap: u64 },

    #[error("invalid rail set: {0}")]
    RailSet(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
