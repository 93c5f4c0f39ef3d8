//! Frozen-policy evaluation: roll deterministic policies for N episodes and
//! aggregate reach/meet metrics plus vocabulary usage.

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::maddpg::act_deterministic;
use crate::net::{DenseNet, NetError};
use crate::world::{compute_rewards, observe, spawn, step, JointAction, Task, TaskConfig, WorldError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("no episode stats to aggregate")]
    EmptyStats,
}

/// What happened in one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    /// Whether each agent touched the target at some step (spawn included).
    pub reached: [bool; 2],
    /// Whether the agents came within the meet radius of each other.
    pub met: bool,
    pub start_distance: f64,
    /// Total distance actually travelled per agent.
    pub path_length: [f64; 2],
    /// Every word uttered, per agent, in step order.
    pub words: [Vec<Vec<u8>>; 2],
}

/// Aggregated metrics over an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "N")]
    pub episodes: usize,
    pub distinct_words: [usize; 2],
    pub word_histogram: [BTreeMap<String, u64>; 2],
    /// For localization only: total start distance over total path, next to
    /// the per-episode mean reported as M1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled_efficiency: Option<f64>,
}

fn word_key(word: &[u8]) -> String {
    word.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

/// Roll one deterministic episode and record its stats.
pub fn rollout(
    actors: [&DenseNet; 2],
    task: &TaskConfig,
    spawn_seed: u64,
) -> Result<EpisodeStats, EvalError> {
    let mut state = spawn(task, spawn_seed)?;
    let (_, spawn_events) = compute_rewards(&state, task)?;
    let mut stats = EpisodeStats {
        reached: spawn_events.agent_touching,
        met: spawn_events.agents_met,
        start_distance: state.agents_distance(),
        path_length: [0.0, 0.0],
        words: [Vec::new(), Vec::new()],
    };

    while !state.is_terminal(task) {
        let a0 = act_deterministic(actors[0], &observe(&state, 0, task).values)?;
        let a1 = act_deterministic(actors[1], &observe(&state, 1, task).values)?;
        stats.words[0].push(a0.message.clone());
        stats.words[1].push(a1.message.clone());
        let action = JointAction {
            moves: [a0.move_dir, a1.move_dir],
            messages: [a0.message, a1.message],
        };
        let result = step(&state, &action, task)?;
        for i in 0..2 {
            stats.path_length[i] += state.agent_pos[i].dist(result.state.agent_pos[i]);
            stats.reached[i] |= result.events.agent_touching[i];
        }
        stats.met |= result.events.agents_met;
        state = result.state;
    }

    debug_assert!(
        stats.path_length.iter().all(|&p| p <= task.step_size * task.max_steps as f64 + 1e-9),
        "an agent cannot travel farther than one step per step"
    );
    Ok(stats)
}

/// Evaluate frozen actors over `n` episodes with deterministic policies.
pub fn run_eval_with_actors(
    actors: [&DenseNet; 2],
    task: &TaskConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<EpisodeStats>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rollout(actors, task, rng.gen())).collect()
}

/// Evaluate a checkpoint, rejecting it up front if its networks cannot
/// consume this task's observations.
pub fn run_eval(
    ckpt: &Checkpoint,
    task: &TaskConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<EpisodeStats>, EvalError> {
    ckpt.compatible_with(task)?;
    let actors = [ckpt.actor_net(0)?, ckpt.actor_net(1)?];
    run_eval_with_actors([&actors[0], &actors[1]], task, n, seed)
}

/// Word histogram and distinct-word count per agent.
pub fn vocab_histogram(stats: &[EpisodeStats]) -> ([BTreeMap<String, u64>; 2], [usize; 2]) {
    let mut hist: [BTreeMap<String, u64>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for ep in stats {
        for agent in 0..2 {
            for word in &ep.words[agent] {
                *hist[agent].entry(word_key(word)).or_insert(0) += 1;
            }
        }
    }
    let distinct = [hist[0].len(), hist[1].len()];
    (hist, distinct)
}

/// Aggregate a stats list into the final report.
///
/// Target tasks: M1 is the fraction of episodes where at least one agent
/// reached the target, M2 where both did. Localization: M2 is the meet
/// rate and M1 the mean per-episode path efficiency (start distance over
/// total path, zero-path episodes contributing 0).
pub fn metrics(stats: &[EpisodeStats], task: Task) -> Result<MetricsReport, EvalError> {
    if stats.is_empty() {
        return Err(EvalError::EmptyStats);
    }
    let n = stats.len();
    let (m1, m2, pooled) = match task {
        Task::Localization => {
            let met = stats.iter().filter(|s| s.met).count();
            let efficiency: f64 = stats
                .iter()
                .map(|s| {
                    let total = s.path_length[0] + s.path_length[1];
                    if total > 0.0 {
                        s.start_distance / total
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                / n as f64;
            let total_start: f64 = stats.iter().map(|s| s.start_distance).sum();
            let total_path: f64 =
                stats.iter().map(|s| s.path_length[0] + s.path_length[1]).sum();
            let pooled = if total_path > 0.0 { total_start / total_path } else { 0.0 };
            (efficiency, met as f64 / n as f64, Some(pooled))
        }
        _ => {
            let any = stats.iter().filter(|s| s.reached[0] || s.reached[1]).count();
            let both = stats.iter().filter(|s| s.reached[0] && s.reached[1]).count();
            (any as f64 / n as f64, both as f64 / n as f64, None)
        }
    };
    let (word_histogram, distinct_words) = vocab_histogram(stats);
    Ok(MetricsReport {
        task,
        m1,
        m2,
        episodes: n,
        distinct_words,
        word_histogram,
        pooled_efficiency: pooled,
    })
}
