//! Core library for the crosstalk laboratory: a two-dimensional world in which
//! two agents with complementary sensing modalities (one sees landmark colors,
//! the other landmark shapes) learn to cooperate by broadcasting short bit
//! messages to each other.
//!
//! The crate is organised around the experiment pipeline:
//!
//! * [`world`] — the deterministic simulation: spawning, observations,
//!   discrete moves, delayed message delivery, and reward terms.
//! * [`net`] — dense networks with analytic backprop, Adam, and
//!   Gumbel-Softmax sampling with straight-through gradients.
//! * [`maddpg`] — per-agent actors and centralized critics, replay buffer,
//!   target networks, and the training loop.
//! * [`eval`] — frozen-policy evaluation metrics and vocabulary analysis.
//! * [`polmap`] — position sweeps of a learned policy rendered as
//!   color-coded preferred-move maps.
//! * [`config`] / [`checkpoint`] — experiment configuration and parameter
//!   persistence shared by the command-line front end.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod maddpg;
pub mod net;
pub mod polmap;
pub mod world;

pub use checkpoint::Checkpoint;
pub use config::ExperimentConfig;
pub use maddpg::{TrainConfig, Trainer};
pub use world::{Task, TaskConfig, WorldState};
