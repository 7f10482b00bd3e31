//! Learners and the hierarchical training loop.
//!
//! The lower layer is trained first with PPO on standalone car-selection
//! episodes and then frozen. The upper layer picks tasks with one of
//! [`Algorithm`]; when an episode completes, its scheme is verified and,
//! if verified, the pattern-match reward is added to the final transition.

mod checkpoint;
mod config;
mod dqn;
mod eval;
mod lower;
mod metrics;
pub mod net;
mod optim;
mod ppo;
mod replay;
mod upper;

use thiserror::Error;

use crate::pattern::PatternError;
use crate::sim::EnvError;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{Algorithm, DqnParams, EpsilonSchedule, LowerConfig, PpoParams, TrainConfig};
pub use dqn::{q_targets, DqnAgent};
pub use eval::{evaluate, EvalResult, FixedTask, RandomTasks};
pub use lower::{evaluate_lower, train_lower, LowerEval, LowerRun, NetLower, RandomLower};
pub use metrics::{read_metrics, read_summaries, write_metrics, write_summaries, EpisodeMetrics, RunSummary};
pub use net::{Activation, DenseNet, Head};
pub use optim::{Adam, Sgd};
pub use ppo::{gae, policy_loss, value_loss, PpoAgent, Rollout};
pub use replay::{ReplayBuffer, Transition};
pub use upper::{train_upper, GateStats, Learner, TaskPolicy, UpperPolicy, UpperRun, UpperTrainer};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what} diverged to {value}{}", step_suffix(.step))]
    Diverged {
        what: &'static str,
        value: f64,
        step: Option<usize>,
    },
    #[error("network shape {found:?} does not fit the scenario (expected {expected:?} inputs/outputs)")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn step_suffix(step: &Option<usize>) -> String {
    step.map(|s| format!(" at step {s}")).unwrap_or_default()
}

impl AgentError {
    pub(crate) fn at_step(self, at: usize) -> Self {
        match self {
            AgentError::Diverged { what, value, .. } => AgentError::Diverged {
                what,
                value,
                step: Some(at),
            },
            other => other,
        }
    }
}
