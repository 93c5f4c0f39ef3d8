//! Flat experiment configuration.
//!
//! A config file is a single JSON object whose keys map one-to-one onto the
//! fields below. Every field except `task` may be omitted and falls back to
//! the per-task default; unknown keys are rejected so typos fail loudly
//! instead of silently running the wrong experiment.

use crate::maddpg::TrainConfig;
use crate::world::{RewardModes, Task, TaskConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// One reward term named in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardTerm {
    Distance,
    Instant,
    Time,
}

fn terms_to_modes(terms: &[RewardTerm]) -> RewardModes {
    RewardModes {
        distance: terms.contains(&RewardTerm::Distance),
        instant: terms.contains(&RewardTerm::Instant),
        time: terms.contains(&RewardTerm::Time),
    }
}

fn modes_to_terms(modes: RewardModes) -> Vec<RewardTerm> {
    let mut terms = Vec::new();
    if modes.distance {
        terms.push(RewardTerm::Distance);
    }
    if modes.instant {
        terms.push(RewardTerm::Instant);
    }
    if modes.time {
        terms.push(RewardTerm::Time);
    }
    terms
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touch_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_modes: Option<Vec<RewardTerm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instant_bonus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_soft: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Episodes between periodic checkpoints written during training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_interval: Option<usize>,
}

impl ExperimentConfig {
    /// A config for `task` with every field left to its default.
    pub fn for_task(task: Task) -> Self {
        ExperimentConfig {
            task,
            landmarks: None,
            message_bits: None,
            max_steps: None,
            step_size: None,
            touch_radius: None,
            reward_modes: None,
            instant_bonus: None,
            time_penalty: None,
            episodes: None,
            gamma: None,
            tau_soft: None,
            learning_rate: None,
            batch_size: None,
            buffer_capacity: None,
            update_every: None,
            warmup: None,
            hidden: None,
            seed: None,
            checkpoint_interval: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        // Fail fast on semantic problems, not just syntax.
        cfg.task_config()?;
        cfg.train_config()?;
        Ok(cfg)
    }

    /// The same config with every unset field replaced by its default.
    /// This is the form embedded into checkpoints.
    pub fn resolved(&self) -> ExperimentConfig {
        let base = TaskConfig::for_task(self.task);
        let episodes_default = match self.task {
            Task::Consensus => 120_000,
            _ => 25_000,
        };
        let batch = self.batch_size.unwrap_or(1024);
        ExperimentConfig {
            task: self.task,
            landmarks: Some(self.landmarks.unwrap_or(base.landmarks)),
            message_bits: Some(self.message_bits.unwrap_or(base.message_bits)),
            max_steps: Some(self.max_steps.unwrap_or(base.max_steps)),
            step_size: Some(self.step_size.unwrap_or(base.step_size)),
            touch_radius: Some(self.touch_radius.unwrap_or(base.touch_radius)),
            reward_modes: Some(
                self.reward_modes.clone().unwrap_or_else(|| modes_to_terms(base.rewards)),
            ),
            instant_bonus: Some(self.instant_bonus.unwrap_or(base.instant_bonus)),
            time_penalty: Some(self.time_penalty.unwrap_or(base.time_penalty)),
            episodes: Some(self.episodes.unwrap_or(episodes_default)),
            gamma: Some(self.gamma.unwrap_or(0.95)),
            tau_soft: Some(self.tau_soft.unwrap_or(0.001)),
            learning_rate: Some(self.learning_rate.unwrap_or(0.01)),
            batch_size: Some(batch),
            buffer_capacity: Some(self.buffer_capacity.unwrap_or(1_000_000)),
            update_every: Some(self.update_every.unwrap_or(100)),
            warmup: Some(self.warmup.unwrap_or(batch)),
            hidden: Some(self.hidden.unwrap_or(64)),
            seed: Some(self.seed.unwrap_or(0)),
            checkpoint_interval: Some(self.checkpoint_interval.unwrap_or(5000)),
        }
    }

    pub fn task_config(&self) -> Result<TaskConfig, ConfigError> {
        let r = self.resolved();
        let tc = TaskConfig {
            task: r.task,
            landmarks: r.landmarks.unwrap(),
            message_bits: r.message_bits.unwrap(),
            max_steps: r.max_steps.unwrap(),
            step_size: r.step_size.unwrap(),
            touch_radius: r.touch_radius.unwrap(),
            rewards: terms_to_modes(r.reward_modes.as_ref().unwrap()),
            instant_bonus: r.instant_bonus.unwrap(),
            time_penalty: r.time_penalty.unwrap(),
        };
        tc.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(tc)
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let r = self.resolved();
        let tc = TrainConfig {
            episodes: r.episodes.unwrap(),
            gamma: r.gamma.unwrap(),
            tau_soft: r.tau_soft.unwrap(),
            learning_rate: r.learning_rate.unwrap(),
            batch_size: r.batch_size.unwrap(),
            buffer_capacity: r.buffer_capacity.unwrap(),
            update_every: r.update_every.unwrap(),
            warmup: r.warmup.unwrap(),
            hidden: r.hidden.unwrap(),
            seed: r.seed.unwrap(),
        };
        tc.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(tc)
    }
}
