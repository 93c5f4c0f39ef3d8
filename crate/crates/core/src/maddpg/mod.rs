//! Multi-agent actor-critic training with centralized critics.
//!
//! Each agent owns an actor mapping its private observation to movement and
//! message logits, and a critic scoring the joint observation-action pair.
//! Critics see everything during training; at execution time an actor only
//! ever reads its own observation. Discrete choices go through
//! Gumbel-Softmax so critic gradients can reach the actor parameters.

mod replay;
mod trainer;

pub use replay::{ReplayBuffer, Transition};
pub use trainer::{train, Trainer};

use crate::net::{
    adam_step, gumbel_backward, gumbel_softmax, sample_gumbel_noise, AdamParams, AdamState,
    DenseNet, ForwardCache, GumbelSample, NetError, NetGrads, SampleMode,
};
use crate::world::{Move, WorldError};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relaxation temperature used for all discrete heads.
pub const GUMBEL_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("replay buffer holds {len} transitions, need {need} before updating")]
    BufferUnderfilled { len: usize, need: usize },
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Critic discount.
    pub gamma: f64,
    /// Target-network blend rate.
    pub tau_soft: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps between gradient updates.
    pub update_every: usize,
    /// Minimum buffer fill before the first update.
    pub warmup: usize,
    /// Width of both hidden layers.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 25_000,
            gamma: 0.95,
            tau_soft: 0.001,
            learning_rate: 0.01,
            batch_size: 1024,
            buffer_capacity: 1_000_000,
            update_every: 100,
            warmup: 1024,
            hidden: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(TrainError::InvalidConfig(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if !(self.tau_soft > 0.0 && self.tau_soft <= 1.0) {
            return Err(TrainError::InvalidConfig(format!(
                "tau_soft {} not in (0, 1]",
                self.tau_soft
            )));
        }
        if self.batch_size == 0 || self.update_every == 0 || self.hidden == 0 {
            return Err(TrainError::InvalidConfig(
                "batch_size, update_every and hidden must be positive".into(),
            ));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(TrainError::InvalidConfig(
                "buffer_capacity must be at least batch_size".into(),
            ));
        }
        Ok(())
    }

    pub fn min_fill(&self) -> usize {
        self.batch_size.max(self.warmup)
    }
}

/// Actor, critic, their target copies, and optimizer state for one agent.
#[derive(Debug, Clone)]
pub struct AgentNets {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub target_actor: DenseNet,
    pub target_critic: DenseNet,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

/// Width of the action vector a critic sees per agent: a 5-way movement
/// one-hot followed by k two-way message groups.
pub fn action_dim(message_bits: usize) -> usize {
    Move::COUNT + 2 * message_bits
}

impl AgentNets {
    pub fn new(
        obs_len: usize,
        message_bits: usize,
        hidden: usize,
        actor_seed: u64,
        critic_seed: u64,
    ) -> Result<Self, NetError> {
        let a_dim = action_dim(message_bits);
        let actor = DenseNet::init(&[obs_len, hidden, hidden, a_dim], actor_seed)?;
        let critic =
            DenseNet::init(&[2 * obs_len + 2 * a_dim, hidden, hidden, 1], critic_seed)?;
        Ok(AgentNets {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            actor,
            critic,
        })
    }

    pub fn from_nets(
        actor: DenseNet,
        critic: DenseNet,
        target_actor: DenseNet,
        target_critic: DenseNet,
    ) -> Self {
        AgentNets {
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            actor,
            critic,
            target_actor,
            target_critic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Explore,
    Deterministic,
}

/// One sampled joint head: the chosen move, the bits to transmit, the hard
/// action vector the environment and critics consume, and everything the
/// actor update needs to push gradients back through the sampling.
#[derive(Debug, Clone)]
pub struct ActionSample {
    pub move_dir: Move,
    pub message: Vec<u8>,
    /// Hard one-hot groups, length `action_dim(k)`.
    pub action: Vec<f64>,
    /// Soft probabilities in the same layout.
    pub relaxed: Vec<f64>,
    pub move_sample: GumbelSample,
    pub message_samples: Vec<GumbelSample>,
    pub cache: ForwardCache,
}

/// Run one actor head. Explore mode draws fresh Gumbel noise per group;
/// deterministic mode injects zero noise, reducing every head to argmax.
pub fn act(
    actor: &DenseNet,
    obs: &[f64],
    mode: ActMode,
    rng: &mut ChaCha8Rng,
) -> Result<ActionSample, NetError> {
    match mode {
        ActMode::Explore => act_with_noise(actor, obs, |n| sample_gumbel_noise(rng, n)),
        ActMode::Deterministic => act_deterministic(actor, obs),
    }
}

/// Argmax policy query: zero noise on every head.
pub fn act_deterministic(actor: &DenseNet, obs: &[f64]) -> Result<ActionSample, NetError> {
    act_with_noise(actor, obs, |n| vec![0.0; n])
}

fn act_with_noise(
    actor: &DenseNet,
    obs: &[f64],
    mut noise_for: impl FnMut(usize) -> Vec<f64>,
) -> Result<ActionSample, NetError> {
    let (logits, cache) = actor.forward(obs)?;
    let k = (logits.len() - Move::COUNT) / 2;
    debug_assert_eq!(logits.len(), action_dim(k));

    let move_noise = noise_for(Move::COUNT);
    let move_sample = gumbel_softmax(
        &logits[..Move::COUNT],
        GUMBEL_TEMPERATURE,
        &move_noise,
        SampleMode::Hard,
    )?;
    let move_dir = Move::from_index(move_sample.argmax()).expect("argmax within move range");

    let mut message = Vec::with_capacity(k);
    let mut message_samples = Vec::with_capacity(k);
    for j in 0..k {
        let base = Move::COUNT + 2 * j;
        let noise = noise_for(2);
        let sample =
            gumbel_softmax(&logits[base..base + 2], GUMBEL_TEMPERATURE, &noise, SampleMode::Hard)?;
        // The transmitted bit is on when the first group component wins.
        message.push(if sample.argmax() == 0 { 1 } else { 0 });
        message_samples.push(sample);
    }

    let mut action = Vec::with_capacity(logits.len());
    let mut relaxed = Vec::with_capacity(logits.len());
    action.extend_from_slice(&move_sample.hard);
    relaxed.extend_from_slice(&move_sample.soft);
    for s in &message_samples {
        action.extend_from_slice(&s.hard);
        relaxed.extend_from_slice(&s.soft);
    }

    Ok(ActionSample { move_dir, message, action, relaxed, move_sample, message_samples, cache })
}

/// Hard action vector from plain argmax heads, skipping the sampling
/// machinery. Matches `act_deterministic(..).action` exactly; used on the
/// TD-target path where only the vector is needed.
fn deterministic_action_vec(actor: &DenseNet, obs: &[f64]) -> Result<Vec<f64>, NetError> {
    let logits = actor.infer(obs)?;
    let mut action = vec![0.0; logits.len()];
    // Ties resolve to the last maximum, matching the sampler's argmax.
    let argmax = |s: &[f64]| -> usize {
        let mut best = 0;
        for (i, &v) in s.iter().enumerate().skip(1) {
            if v >= s[best] {
                best = i;
            }
        }
        best
    };
    action[argmax(&logits[..Move::COUNT])] = 1.0;
    let k = (logits.len() - Move::COUNT) / 2;
    for j in 0..k {
        let base = Move::COUNT + 2 * j;
        action[base + argmax(&logits[base..base + 2])] = 1.0;
    }
    Ok(action)
}

/// Concatenated critic input: both observations then both action vectors.
pub fn critic_input(obs: [&[f64]; 2], actions: [&[f64]; 2]) -> Vec<f64> {
    let mut x =
        Vec::with_capacity(obs[0].len() + obs[1].len() + actions[0].len() + actions[1].len());
    x.extend_from_slice(obs[0]);
    x.extend_from_slice(obs[1]);
    x.extend_from_slice(actions[0]);
    x.extend_from_slice(actions[1]);
    x
}

/// Bootstrapped value target: r + gamma * (1 - done) * Q'(x', a'), with a'
/// produced by the target actors' deterministic heads.
pub fn td_target(
    reward: f64,
    done: bool,
    next_obs: [&[f64]; 2],
    target_actors: [&DenseNet; 2],
    target_critic: &DenseNet,
    gamma: f64,
) -> Result<f64, NetError> {
    if done || gamma == 0.0 {
        return Ok(reward);
    }
    let a0 = deterministic_action_vec(target_actors[0], next_obs[0])?;
    let a1 = deterministic_action_vec(target_actors[1], next_obs[1])?;
    let x = critic_input(next_obs, [&a0, &a1]);
    let q = target_critic.infer(&x)?;
    Ok(reward + gamma * q[0])
}

/// Blend `target` toward `live`: theta' <- tau * theta + (1 - tau) * theta'.
pub fn soft_update(target: &mut DenseNet, live: &DenseNet, tau: f64) {
    for (tl, ll) in target.layers.iter_mut().zip(live.layers.iter()) {
        for (t, l) in tl.weights.iter_mut().zip(ll.weights.iter()) {
            *t = tau * l + (1.0 - tau) * *t;
        }
        for (t, l) in tl.bias.iter_mut().zip(ll.bias.iter()) {
            *t = tau * l + (1.0 - tau) * *t;
        }
    }
}

/// Mean squared TD error and its parameter gradients for one critic over
/// the given batch, with targets held fixed.
fn critic_grads_on_batch(
    critic: &DenseNet,
    buffer: &ReplayBuffer,
    indices: &[usize],
    targets: &[f64],
) -> Result<(NetGrads, f64), NetError> {
    let batch = indices.len() as f64;
    let mut grads = NetGrads::zeros_like(critic);
    let mut loss = 0.0;
    for (&b, &y) in indices.iter().zip(targets.iter()) {
        let tr = buffer.get(b);
        let x = critic_input(
            [&tr.obs[0], &tr.obs[1]],
            [&tr.actions[0], &tr.actions[1]],
        );
        let (q, cache) = critic.forward(&x)?;
        let err = q[0] - y;
        loss += err * err;
        let (g, _) = critic.backward(&cache, &[2.0 * err / batch])?;
        grads.add_assign(&g);
    }
    Ok((grads, loss / batch))
}

/// Gradient of the negated mean critic score with respect to the actor
/// parameters, re-sampling agent `i`'s action with fresh relaxation noise
/// and taking the partner's action from the batch.
#[allow(clippy::too_many_arguments)]
fn actor_grads_on_batch(
    agent: usize,
    actor: &DenseNet,
    critic: &DenseNet,
    buffer: &ReplayBuffer,
    indices: &[usize],
    obs_len: usize,
    a_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(NetGrads, f64), NetError> {
    let batch = indices.len() as f64;
    let mut grads = NetGrads::zeros_like(actor);
    let mut objective = 0.0;
    for &b in indices {
        let tr = buffer.get(b);
        let own = act(actor, &tr.obs[agent], ActMode::Explore, rng)?;
        let actions: [&[f64]; 2] = if agent == 0 {
            [&own.action, &tr.actions[1]]
        } else {
            [&tr.actions[0], &own.action]
        };
        let x = critic_input([&tr.obs[0], &tr.obs[1]], actions);
        let (q, cache) = critic.forward(&x)?;
        objective += q[0];
        // Ascend Q by descending -mean(Q).
        let (_, dx) = critic.backward(&cache, &[-1.0 / batch])?;
        let offset = 2 * obs_len + agent * a_dim;
        let d_action = &dx[offset..offset + a_dim];

        let mut d_logits = Vec::with_capacity(a_dim);
        d_logits.extend(gumbel_backward(&own.move_sample, &d_action[..Move::COUNT]));
        for (j, s) in own.message_samples.iter().enumerate() {
            let base = Move::COUNT + 2 * j;
            d_logits.extend(gumbel_backward(s, &d_action[base..base + 2]));
        }
        let (g, _) = actor.backward(&own.cache, &d_logits)?;
        grads.add_assign(&g);
    }
    Ok((grads, objective / batch))
}

/// Per-update training diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDiagnostics {
    pub critic_loss: [f64; 2],
    pub actor_objective: [f64; 2],
}

/// One gradient update for both agents: critic regression toward the TD
/// target, actor ascent on its critic, then soft target blends.
pub fn update_step(
    nets: &mut [AgentNets; 2],
    buffer: &ReplayBuffer,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateDiagnostics, TrainError> {
    if buffer.len() < cfg.min_fill() {
        return Err(TrainError::BufferUnderfilled { len: buffer.len(), need: cfg.min_fill() });
    }
    let adam = AdamParams::with_lr(cfg.learning_rate);
    let obs_len = buffer.get(0).obs[0].len();
    let a_dim = buffer.get(0).actions[0].len();

    let mut diag =
        UpdateDiagnostics { critic_loss: [0.0; 2], actor_objective: [0.0; 2] };

    for i in 0..2 {
        let indices = buffer.sample_indices(rng, cfg.batch_size);

        let targets: Vec<f64> = {
            let target_actors = [&nets[0].target_actor, &nets[1].target_actor];
            indices
                .iter()
                .map(|&b| {
                    let tr = buffer.get(b);
                    td_target(
                        tr.reward,
                        tr.done,
                        [&tr.next_obs[0], &tr.next_obs[1]],
                        target_actors,
                        &nets[i].target_critic,
                        cfg.gamma,
                    )
                })
                .collect::<Result<_, _>>()?
        };

        let (critic_grads, loss) =
            critic_grads_on_batch(&nets[i].critic, buffer, &indices, &targets)?;
        diag.critic_loss[i] = loss;
        let agent = &mut nets[i];
        adam_step(&mut agent.critic, &critic_grads, &mut agent.critic_opt, &adam)?;

        let (actor_grads, objective) = actor_grads_on_batch(
            i,
            &nets[i].actor,
            &nets[i].critic,
            buffer,
            &indices,
            obs_len,
            a_dim,
            rng,
        )?;
        diag.actor_objective[i] = objective;
        let agent = &mut nets[i];
        adam_step(&mut agent.actor, &actor_grads, &mut agent.actor_opt, &adam)?;
    }

    for agent in nets.iter_mut() {
        soft_update(&mut agent.target_actor, &agent.actor, cfg.tau_soft);
        soft_update(&mut agent.target_critic, &agent.critic, cfg.tau_soft);
    }
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{observe, spawn, Task, TaskConfig, Vec2};
    use rand::SeedableRng;

    fn test_rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Actor whose logits equal a fixed bias vector regardless of input.
    fn biased_actor(obs_len: usize, k: usize, out_bias: Vec<f64>) -> DenseNet {
        let mut net = DenseNet::init(&[obs_len, 4, 4, action_dim(k)], 0).unwrap();
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let last = net.layers.len() - 1;
        net.layers[last].bias = out_bias;
        net
    }

    #[test]
    fn deterministic_act_takes_argmax_heads() {
        let k = 2;
        let mut bias = vec![0.0; action_dim(k)];
        bias[Move::Up.index()] = 2.0;
        // First message group prefers bit 1, second prefers bit 0.
        bias[5] = 3.0;
        bias[6] = -3.0;
        bias[7] = -1.0;
        bias[8] = 1.0;
        let actor = biased_actor(6, k, bias);
        let s = act(&actor, &[0.0; 6], ActMode::Deterministic, &mut test_rng(0)).unwrap();
        assert_eq!(s.move_dir, Move::Up);
        assert_eq!(s.message, vec![1, 0]);
        assert_eq!(s.action[Move::Up.index()], 1.0);
    }

    #[test]
    fn explore_with_flat_logits_is_uniform_over_moves() {
        let k = 1;
        let actor = biased_actor(3, k, vec![0.0; action_dim(k)]);
        let mut rng = test_rng(77);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            let s = act(&actor, &[0.0; 3], ActMode::Explore, &mut rng).unwrap();
            counts[s.move_dir.index()] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.2).abs() < 0.01, "move frequency {freq}");
        }
    }

    #[test]
    fn act_is_insensitive_to_partner_state() {
        let cfg = TaskConfig::for_task(Task::InfoExchange);
        let mut state = spawn(&cfg, 3).unwrap();
        let actor = DenseNet::init(&[cfg.observation_len(), 8, 8, action_dim(4)], 5).unwrap();
        let a = act(
            &actor,
            &observe(&state, 0, &cfg).values,
            ActMode::Deterministic,
            &mut test_rng(0),
        )
        .unwrap();
        state.agent_pos[1] = Vec2::new(-0.7, 0.7);
        let b = act(
            &actor,
            &observe(&state, 0, &cfg).values,
            ActMode::Deterministic,
            &mut test_rng(0),
        )
        .unwrap();
        assert_eq!(a.action, b.action);
    }

    fn tiny_setup(seed: u64) -> ([AgentNets; 2], ReplayBuffer, TrainConfig) {
        let obs_len = 6;
        let k = 2;
        let cfg = TrainConfig {
            batch_size: 4,
            buffer_capacity: 64,
            warmup: 4,
            hidden: 8,
            learning_rate: 0.01,
            seed,
            ..TrainConfig::default()
        };
        let nets = [
            AgentNets::new(obs_len, k, cfg.hidden, seed, seed + 1).unwrap(),
            AgentNets::new(obs_len, k, cfg.hidden, seed + 2, seed + 3).unwrap(),
        ];
        let mut rng = test_rng(seed + 10);
        let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
        use rand::Rng;
        for _ in 0..16 {
            let rand_obs =
                |rng: &mut ChaCha8Rng| (0..obs_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rand_action = |rng: &mut ChaCha8Rng| {
                let mut a = vec![0.0; action_dim(k)];
                let m = rng.gen_range(0..5);
                a[m] = 1.0;
                for j in 0..k {
                    let bit = rng.gen_range(0..2);
                    a[5 + 2 * j + bit] = 1.0;
                }
                a
            };
            buffer.push(Transition {
                obs: [rand_obs(&mut rng), rand_obs(&mut rng)],
                actions: [rand_action(&mut rng), rand_action(&mut rng)],
                reward: rng.gen_range(-2.0..0.0),
                next_obs: [rand_obs(&mut rng), rand_obs(&mut rng)],
                done: rng.gen_bool(0.1),
            });
        }
        (nets, buffer, cfg)
    }

    #[test]
    fn td_target_reduces_to_reward_when_terminal_or_undiscounted() {
        let (nets, buffer, _) = tiny_setup(1);
        let tr = buffer.get(0);
        let next = [tr.next_obs[0].as_slice(), tr.next_obs[1].as_slice()];
        let actors = [&nets[0].target_actor, &nets[1].target_actor];
        let y = td_target(-1.5, true, next, actors, &nets[0].target_critic, 0.95).unwrap();
        assert_eq!(y, -1.5);
        let y = td_target(-1.5, false, next, actors, &nets[0].target_critic, 0.0).unwrap();
        assert_eq!(y, -1.5);
    }

    #[test]
    fn td_target_matches_manual_forward_chain() {
        let (nets, buffer, _) = tiny_setup(2);
        let tr = buffer.get(3);
        let next = [tr.next_obs[0].as_slice(), tr.next_obs[1].as_slice()];
        let actors = [&nets[0].target_actor, &nets[1].target_actor];
        let gamma = 0.95;
        let y = td_target(-0.8, false, next, actors, &nets[1].target_critic, gamma).unwrap();

        // Independent recomputation: argmax heads from raw logits, then one
        // critic pass.
        let head = |actor: &DenseNet, obs: &[f64]| -> Vec<f64> {
            let logits = actor.infer(obs).unwrap();
            let mut a = vec![0.0; logits.len()];
            let argmax = |s: &[f64]| {
                s.iter().enumerate().max_by(|x, y| x.1.partial_cmp(y.1).unwrap()).unwrap().0
            };
            a[argmax(&logits[..5])] = 1.0;
            let k = (logits.len() - 5) / 2;
            for j in 0..k {
                let base = 5 + 2 * j;
                a[base + argmax(&logits[base..base + 2])] = 1.0;
            }
            a
        };
        let a0 = head(actors[0], next[0]);
        let a1 = head(actors[1], next[1]);
        let x = critic_input(next, [&a0, &a1]);
        let q = nets[1].target_critic.infer(&x).unwrap()[0];
        assert!((y - (-0.8 + gamma * q)).abs() < 1e-12);
    }

    #[test]
    fn soft_update_degenerate_blends() {
        let (mut nets, _, _) = tiny_setup(3);
        let live = nets[0].actor.clone();
        soft_update(&mut nets[0].target_actor, &live, 1.0);
        assert_eq!(nets[0].target_actor, live);

        let frozen = nets[1].target_actor.clone();
        soft_update(&mut nets[1].target_actor, &nets[1].actor.clone(), 0.0);
        assert_eq!(nets[1].target_actor, frozen);
    }

    #[test]
    fn soft_update_drift_is_bounded_by_tau() {
        let (mut nets, _, _) = tiny_setup(4);
        let tau = 0.013;
        let old = nets[0].target_critic.clone();
        let live = nets[0].critic.clone();
        soft_update(&mut nets[0].target_critic, &live, tau);
        let inf_norm = |a: &DenseNet, b: &DenseNet| -> f64 {
            a.layers
                .iter()
                .zip(b.layers.iter())
                .flat_map(|(x, y)| {
                    x.weights
                        .iter()
                        .zip(y.weights.iter())
                        .chain(x.bias.iter().zip(y.bias.iter()))
                        .map(|(p, q)| (p - q).abs())
                })
                .fold(0.0, f64::max)
        };
        let drift = inf_norm(&nets[0].target_critic, &old);
        let gap = inf_norm(&live, &old);
        assert!(drift <= tau * gap + 1e-15, "drift {drift} vs bound {}", tau * gap);
    }

    #[test]
    fn update_requires_a_filled_buffer() {
        let (mut nets, _, cfg) = tiny_setup(5);
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        let err = update_step(&mut nets, &buffer, &cfg, &mut test_rng(0)).unwrap_err();
        assert!(matches!(err, TrainError::BufferUnderfilled { .. }));
    }

    #[test]
    fn critic_batch_gradient_matches_finite_differences() {
        let (nets, buffer, cfg) = tiny_setup(6);
        let indices = vec![0, 3, 7, 11];
        let targets: Vec<f64> = {
            let actors = [&nets[0].target_actor, &nets[1].target_actor];
            indices
                .iter()
                .map(|&b| {
                    let tr = buffer.get(b);
                    td_target(
                        tr.reward,
                        tr.done,
                        [&tr.next_obs[0], &tr.next_obs[1]],
                        actors,
                        &nets[0].target_critic,
                        cfg.gamma,
                    )
                    .unwrap()
                })
                .collect()
        };
        let (analytic, _) =
            critic_grads_on_batch(&nets[0].critic, &buffer, &indices, &targets).unwrap();

        let loss_of = |critic: &DenseNet| -> f64 {
            let mut loss = 0.0;
            for (&b, &y) in indices.iter().zip(targets.iter()) {
                let tr = buffer.get(b);
                let x = critic_input(
                    [&tr.obs[0], &tr.obs[1]],
                    [&tr.actions[0], &tr.actions[1]],
                );
                let q = critic.infer(&x).unwrap()[0];
                loss += (q - y) * (q - y);
            }
            loss / indices.len() as f64
        };

        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
        for li in 0..nets[0].critic.layers.len() {
            for wi in (0..nets[0].critic.layers[li].weights.len()).step_by(7) {
                let mut plus = nets[0].critic.clone();
                let mut minus = nets[0].critic.clone();
                plus.layers[li].weights[wi] += h;
                minus.layers[li].weights[wi] -= h;
                let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let analytic_g = analytic.layers[li].d_weights[wi];
                assert!(
                    rel(analytic_g, numeric) < 1e-4,
                    "layer {li} weight {wi}: {analytic_g} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn critic_update_reduces_loss_on_its_own_batch() {
        for trial in 0..20 {
            let (mut nets, buffer, cfg) = tiny_setup(100 + trial);
            let mut rng = test_rng(trial);
            let indices = buffer.sample_indices(&mut rng, 8);
            let targets: Vec<f64> = {
                let actors = [&nets[0].target_actor, &nets[1].target_actor];
                indices
                    .iter()
                    .map(|&b| {
                        let tr = buffer.get(b);
                        td_target(
                            tr.reward,
                            tr.done,
                            [&tr.next_obs[0], &tr.next_obs[1]],
                            actors,
                            &nets[0].target_critic,
                            cfg.gamma,
                        )
                        .unwrap()
                    })
                    .collect()
            };
            let (grads, before) =
                critic_grads_on_batch(&nets[0].critic, &buffer, &indices, &targets).unwrap();
            let agent = &mut nets[0];
            adam_step(&mut agent.critic, &grads, &mut agent.critic_opt, &AdamParams::with_lr(1e-3))
                .unwrap();
            let (_, after) =
                critic_grads_on_batch(&nets[0].critic, &buffer, &indices, &targets).unwrap();
            assert!(after <= before + 1e-12, "trial {trial}: {before} -> {after}");
        }
    }

    #[test]
    fn update_step_runs_and_blends_targets() {
        let (mut nets, buffer, cfg) = tiny_setup(7);
        let before_target = nets[0].target_actor.clone();
        let before_actor = nets[0].actor.clone();
        let diag = update_step(&mut nets, &buffer, &cfg, &mut test_rng(1)).unwrap();
        assert!(diag.critic_loss.iter().all(|l| l.is_finite()));
        assert_ne!(nets[0].actor, before_actor, "actor should move");
        assert_ne!(nets[0].target_actor, before_target, "target should blend");
    }
}
