//! Versioned JSON checkpoints.
//!
//! A checkpoint holds the configuration, the scenario, the step and episode
//! counters, the learner (networks and optimizer moments) and the frozen
//! lower network if one was trained. The replay buffer is not stored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::lower::NetLower;
use super::net::DenseNet;
use super::upper::{GateStats, Learner, UpperTrainer};
use super::AgentError;
use crate::pattern::PriorityPattern;
use crate::scenario::{load_scenario, ScenarioConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    /// Scenario in normal-form TOML.
    pub scenario: String,
    pub step: usize,
    pub episodes: usize,
    pub gate: GateStats,
    pub lower: Option<DenseNet>,
    pub learner: Learner,
}

impl Checkpoint {
    pub fn of(trainer: &UpperTrainer, lower: Option<&NetLower>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: trainer.config().clone(),
            scenario: trainer.scenario().to_toml(),
            step: trainer.step(),
            episodes: trainer.episodes(),
            gate: trainer.gate(),
            lower: lower.map(|l| l.net().clone()),
            learner: trainer.learner().clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                header.version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn scenario(&self) -> Result<ScenarioConfig, AgentError> {
        load_scenario(&self.scenario).map_err(|e| AgentError::Checkpoint(e.to_string()))
    }

    pub fn lower_policy(&self) -> Result<Option<NetLower>, AgentError> {
        let scenario = self.scenario()?;
        self.lower
            .clone()
            .map(|net| NetLower::new(net, &scenario))
            .transpose()
    }

    /// Trainer positioned at the saved step, with an empty replay buffer.
    pub fn resume(&self, historical: Option<PriorityPattern>) -> Result<UpperTrainer, AgentError> {
        let scenario = self.scenario()?;
        self.config.validate().map_err(AgentError::Config)?;
        if let Some(h) = &historical {
            h.check_namespace(&scenario)?;
        }
        Ok(UpperTrainer::assemble(
            &scenario,
            &self.config,
            self.learner.clone(),
            historical,
            self.step,
            self.episodes,
            self.gate,
        ))
    }
}
