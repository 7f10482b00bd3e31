//! Training configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::net::Activation;
use crate::sim::RewardConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dqn,
    Ddqn,
    Dueling,
    Ppo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Dqn,
        Algorithm::Ddqn,
        Algorithm::Dueling,
        Algorithm::Ppo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dqn => "dqn",
            Algorithm::Ddqn => "ddqn",
            Algorithm::Dueling => "dueling",
            Algorithm::Ppo => "ppo",
        }
    }

    pub fn is_value_based(self) -> bool {
        self != Algorithm::Ppo
    }

    /// Sigmoid for the value-based learners, tanh for PPO.
    pub fn default_activation(self) -> Activation {
        if self.is_value_based() {
            Activation::Sigmoid
        } else {
            Activation::Tanh
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected dqn, ddqn, dueling or ppo)"))
    }
}

/// Linear decay from `start` to `end` over the first `fraction` of training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            fraction: 0.3,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, step: usize, total: usize) -> f64 {
        let span = (self.fraction * total as f64).max(1.0);
        let k = (step as f64 / span).min(1.0);
        self.start + (self.end - self.start) * k
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnParams {
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_starts: usize,
    pub train_freq: usize,
    /// Steps between hard target-network copies.
    pub target_update: usize,
    pub grad_clip: f64,
}

impl Default for DqnParams {
    fn default() -> Self {
        DqnParams {
            batch_size: 32,
            buffer_size: 50_000,
            learning_starts: 1_000,
            train_freq: 4,
            target_update: 1_000,
            grad_clip: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoParams {
    /// Environment steps per update.
    pub n_steps: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub clip: f64,
    pub lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub grad_clip: f64,
}

impl Default for PpoParams {
    fn default() -> Self {
        PpoParams {
            n_steps: 512,
            epochs: 4,
            minibatch: 64,
            clip: 0.2,
            lambda: 0.95,
            entropy_coef: 0.01,
            value_coef: 0.5,
            grad_clip: 0.5,
        }
    }
}

/// Upper-layer training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub steps: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    /// Defaults to the algorithm's usual activation.
    pub activation: Option<Activation>,
    pub seed: u64,
    pub reward: RewardConfig,
    pub epsilon: EpsilonSchedule,
    pub dqn: DqnParams,
    pub ppo: PpoParams,
    pub lower: LowerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::Dqn,
            steps: 200_000,
            learning_rate: 2e-4,
            gamma: 0.99,
            hidden: vec![64, 64],
            activation: None,
            seed: 0,
            reward: RewardConfig::default(),
            epsilon: EpsilonSchedule::default(),
            dqn: DqnParams::default(),
            ppo: PpoParams::default(),
            lower: LowerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn activation(&self) -> Activation {
        self.activation
            .unwrap_or_else(|| self.algorithm.default_activation())
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if self.steps == 0 {
            return Err("steps must be positive".into());
        }
        if self.dqn.batch_size == 0 || self.dqn.train_freq == 0 || self.dqn.target_update == 0 {
            return Err("dqn batch_size, train_freq and target_update must be positive".into());
        }
        if self.ppo.n_steps == 0 || self.ppo.minibatch == 0 || self.ppo.epochs == 0 {
            return Err("ppo n_steps, minibatch and epochs must be positive".into());
        }
        self.lower.validate()?;
        self.reward.validate()
    }
}

/// Lower-layer (car selection) training; always PPO. `steps = 0` keeps the
/// greedy car choice instead of a learned one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub ppo: PpoParams,
}

impl Default for LowerConfig {
    fn default() -> Self {
        LowerConfig {
            steps: 100_000,
            learning_rate: 2e-4,
            gamma: 0.99,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            ppo: PpoParams::default(),
        }
    }
}

impl LowerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0) {
            return Err(format!("lower learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("lower gamma must be in (0, 1], got {}", self.gamma));
        }
        if self.ppo.n_steps == 0 || self.ppo.minibatch == 0 || self.ppo.epochs == 0 {
            return Err("lower ppo n_steps, minibatch and epochs must be positive".into());
        }
        Ok(())
    }
}
