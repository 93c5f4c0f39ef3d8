//! Episode-driven training loop.

use super::{
    act, update_step, ActMode, AgentNets, ReplayBuffer, TrainConfig, TrainError, Transition,
    UpdateDiagnostics,
};
use crate::world::{observe, spawn, step, JointAction, TaskConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Owns the networks, the replay buffer and the random stream for one
/// training run. Everything is a pure function of (task, cfg), so two
/// trainers built from the same configs replay identically.
pub struct Trainer {
    pub task: TaskConfig,
    pub cfg: TrainConfig,
    pub nets: [AgentNets; 2],
    pub buffer: ReplayBuffer,
    /// Undiscounted shared-reward total per finished episode.
    pub curve: Vec<f64>,
    pub episodes_done: usize,
    env_steps: usize,
    rng: ChaCha8Rng,
    pub last_diagnostics: Option<UpdateDiagnostics>,
}

impl Trainer {
    pub fn new(task: TaskConfig, cfg: TrainConfig) -> Result<Self, TrainError> {
        task.validate()?;
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let obs_len = task.observation_len();
        let k = task.message_bits;
        // Net seeds are drawn in a fixed order so the whole run is a
        // function of cfg.seed alone.
        let seeds: Vec<u64> = (0..4).map(|_| rng.gen()).collect();
        let nets = [
            AgentNets::new(obs_len, k, cfg.hidden, seeds[0], seeds[1])?,
            AgentNets::new(obs_len, k, cfg.hidden, seeds[2], seeds[3])?,
        ];
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        Ok(Trainer {
            task,
            cfg,
            nets,
            buffer,
            curve: Vec::new(),
            episodes_done: 0,
            env_steps: 0,
            rng,
            last_diagnostics: None,
        })
    }

    /// Play one full episode with exploration, pushing every transition and
    /// running gradient updates on schedule. Returns the episode reward.
    pub fn run_episode(&mut self) -> Result<f64, TrainError> {
        let episode_seed = self.rng.gen::<u64>();
        let mut state = spawn(&self.task, episode_seed)?;
        let mut total = 0.0;

        while !state.is_terminal(&self.task) {
            let obs = [
                observe(&state, 0, &self.task).values,
                observe(&state, 1, &self.task).values,
            ];
            let a0 = act(&self.nets[0].actor, &obs[0], ActMode::Explore, &mut self.rng)?;
            let a1 = act(&self.nets[1].actor, &obs[1], ActMode::Explore, &mut self.rng)?;
            let action = JointAction {
                moves: [a0.move_dir, a1.move_dir],
                messages: [a0.message.clone(), a1.message.clone()],
            };
            let result = step(&state, &action, &self.task)?;
            let next_obs = [
                observe(&result.state, 0, &self.task).values,
                observe(&result.state, 1, &self.task).values,
            ];
            self.buffer.push(Transition {
                obs,
                actions: [a0.action, a1.action],
                reward: result.reward[0],
                next_obs,
                done: result.done,
            });
            total += result.reward[0];
            state = result.state;
            self.env_steps += 1;

            if self.env_steps % self.cfg.update_every == 0
                && self.buffer.len() >= self.cfg.min_fill()
            {
                let diag =
                    update_step(&mut self.nets, &self.buffer, &self.cfg, &mut self.rng)?;
                self.last_diagnostics = Some(diag);
            }
        }

        self.episodes_done += 1;
        self.curve.push(total);
        Ok(total)
    }

    /// Run episodes until the configured count is reached.
    pub fn train(&mut self) -> Result<(), TrainError> {
        while self.episodes_done < self.cfg.episodes {
            self.run_episode()?;
        }
        Ok(())
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }
}

/// Convenience wrapper: build a trainer and run it to completion.
pub fn train(task: &TaskConfig, cfg: &TrainConfig) -> Result<Trainer, TrainError> {
    let mut trainer = Trainer::new(task.clone(), cfg.clone())?;
    trainer.train()?;
    Ok(trainer)
}
