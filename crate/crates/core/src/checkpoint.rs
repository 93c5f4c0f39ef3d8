//! JSON checkpoints holding every network of both agents.
//!
//! The on-disk layout is a single object with keys `version`, `config`,
//! `agents`, `episodes_trained` and `seed`. Each agent entry carries its
//! four networks as `shapes` (rows, cols per layer) plus a flat `params`
//! array, weights row-major followed by the bias, layer by layer. Values
//! are written as plain decimals that round-trip 64-bit floats exactly.

use crate::config::ExperimentConfig;
use crate::maddpg::{action_dim, AgentNets, Trainer};
use crate::net::DenseNet;
use crate::world::TaskConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}, this build reads version {CHECKPOINT_VERSION}")]
    UnsupportedVersion(u64),
    #[error("{network}: params length {got} does not match shapes (expected {expected})")]
    ShapeMismatch { network: String, got: usize, expected: usize },
    #[error("checkpoint is incompatible with the requested run: {0}")]
    Incompatible(String),
}

/// One serialized network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDump {
    /// Per-layer (out_dim, in_dim).
    pub shapes: Vec<[usize; 2]>,
    pub params: Vec<f64>,
}

impl NetDump {
    pub fn from_net(net: &DenseNet) -> Self {
        NetDump {
            shapes: net.layers.iter().map(|l| [l.out_dim, l.in_dim]).collect(),
            params: net.flatten_params(),
        }
    }

    /// Rebuild the network, naming it in any shape diagnostics.
    pub fn to_net(&self, network: &str) -> Result<DenseNet, CheckpointError> {
        let expected: usize = self.shapes.iter().map(|s| s[0] * s[1] + s[0]).sum();
        if expected != self.params.len() || self.shapes.is_empty() {
            return Err(CheckpointError::ShapeMismatch {
                network: network.to_string(),
                got: self.params.len(),
                expected,
            });
        }
        let shapes: Vec<(usize, usize)> = self.shapes.iter().map(|s| (s[0], s[1])).collect();
        DenseNet::from_flat(&shapes, &self.params).map_err(|_| CheckpointError::ShapeMismatch {
            network: network.to_string(),
            got: self.params.len(),
            expected,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDump {
    pub actor: NetDump,
    pub critic: NetDump,
    pub target_actor: NetDump,
    pub target_critic: NetDump,
}

impl AgentDump {
    fn from_nets(nets: &AgentNets) -> Self {
        AgentDump {
            actor: NetDump::from_net(&nets.actor),
            critic: NetDump::from_net(&nets.critic),
            target_actor: NetDump::from_net(&nets.target_actor),
            target_critic: NetDump::from_net(&nets.target_critic),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    pub agents: Vec<AgentDump>,
    pub episodes_trained: usize,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer, config: &ExperimentConfig) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: config.resolved(),
            agents: trainer.nets.iter().map(AgentDump::from_nets).collect(),
            episodes_trained: trainer.episodes_done,
            seed: trainer.cfg.seed,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(version) = value.get("version").and_then(|v| v.as_u64()) {
            if version != u64::from(CHECKPOINT_VERSION) {
                return Err(CheckpointError::UnsupportedVersion(version));
            }
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Structural validation: two agents, rebuildable networks.
    pub fn validate(&self) -> Result<(), CheckpointError> {
        if self.agents.len() != 2 {
            return Err(CheckpointError::Incompatible(format!(
                "expected 2 agents, found {}",
                self.agents.len()
            )));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            agent.actor.to_net(&format!("agent {i} actor"))?;
            agent.critic.to_net(&format!("agent {i} critic"))?;
            agent.target_actor.to_net(&format!("agent {i} target_actor"))?;
            agent.target_critic.to_net(&format!("agent {i} target_critic"))?;
        }
        Ok(())
    }

    pub fn actor_net(&self, agent: usize) -> Result<DenseNet, CheckpointError> {
        self.agents[agent].actor.to_net(&format!("agent {agent} actor"))
    }

    /// Rebuild live and target networks with fresh optimizer state.
    pub fn agent_nets(&self) -> Result<[AgentNets; 2], CheckpointError> {
        let build = |i: usize| -> Result<AgentNets, CheckpointError> {
            let a = &self.agents[i];
            Ok(AgentNets::from_nets(
                a.actor.to_net(&format!("agent {i} actor"))?,
                a.critic.to_net(&format!("agent {i} critic"))?,
                a.target_actor.to_net(&format!("agent {i} target_actor"))?,
                a.target_critic.to_net(&format!("agent {i} target_critic"))?,
            ))
        };
        Ok([build(0)?, build(1)?])
    }

    pub fn task_config(&self) -> Result<TaskConfig, CheckpointError> {
        self.config
            .task_config()
            .map_err(|e| CheckpointError::Incompatible(e.to_string()))
    }

    /// Reject the checkpoint before running anything when its actor
    /// dimensions cannot consume observations of `task`.
    pub fn compatible_with(&self, task: &TaskConfig) -> Result<(), CheckpointError> {
        for (i, agent) in self.agents.iter().enumerate() {
            let actor = agent.actor.to_net(&format!("agent {i} actor"))?;
            if actor.input_dim() != task.observation_len() {
                return Err(CheckpointError::Incompatible(format!(
                    "agent {i} actor consumes observations of length {}, task produces {} \
                     (L = {}, k = {})",
                    actor.input_dim(),
                    task.observation_len(),
                    task.landmarks,
                    task.message_bits
                )));
            }
            if actor.output_dim() != action_dim(task.message_bits) {
                return Err(CheckpointError::Incompatible(format!(
                    "agent {i} actor emits {} logits, task needs {} (k = {})",
                    actor.output_dim(),
                    action_dim(task.message_bits),
                    task.message_bits
                )));
            }
        }
        Ok(())
    }
}
