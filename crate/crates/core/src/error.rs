use thiserror::Error;

use crate::model::{AgentId, TaskId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid amount `{0}`")]
pub struct ParseMoneyError(pub String);

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("unknown task {0}")]
    UnknownTask(TaskId),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("demand of {demand} units cannot be filled from {capacity} units of supply")]
    Unfillable { demand: u64, capacity: u64 },

    #[error("agent {agent} is not a winner of layer {layer}")]
    NotALayerWinner { agent: AgentId, layer: usize },

    #[error("oracle size guard exceeded: {0}")]
    OracleTooLarge(String),

    #[error("no connected graph after {attempts} attempts (n = {n}, prob = {prob})")]
    GraphGeneration { attempts: u64, n: usize, prob: f64 },

    #[error("mechanism `{mechanism}` does not accept {variant} instances")]
    VariantMismatch {
        mechanism: String,
        variant: &'static str,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
