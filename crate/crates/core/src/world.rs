//! Deterministic two-agent, L-landmark world.
//!
//! Agent 0 is the color agent, agent 1 the shape agent. Both move on the
//! continuous square [-1, 1]^2 in unit steps along the axes and broadcast a
//! k-bit word every step; a word sent at step t is readable by the partner
//! at step t + 1. All randomness comes from an explicit seed, so identical
//! (config, seed, action sequence) triples replay bit-for-bit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// World half-extent: positions live in [-BOUND, BOUND]^2.
pub const BOUND: f64 = 1.0;
/// Agents and landmarks spawn inside [-SPAWN_EXTENT, SPAWN_EXTENT]^2.
pub const SPAWN_EXTENT: f64 = 0.9;
/// Number of distinct values per landmark property (colors, shapes).
pub const PROPERTY_VALUES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid task config: {0}")]
    InvalidConfig(String),
    #[error("step called on a terminal state (step {step} of {max_steps})")]
    SteppedTerminal { step: usize, max_steps: usize },
    #[error("reward mode {0} requires a target landmark but none is set")]
    MissingTarget(&'static str),
    #[error("malformed action: {0}")]
    BadAction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    Blue,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Red, Color::Green, Color::Blue];

    pub fn index(self) -> usize {
        match self {
            Color::Red => 0,
            Color::Green => 1,
            Color::Blue => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Triangle,
    Circle,
    Square,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Triangle, Shape::Circle, Shape::Square];

    pub fn index(self) -> usize {
        match self {
            Shape::Triangle => 0,
            Shape::Circle => 1,
            Shape::Square => 2,
        }
    }
}

/// A 2D position in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dist(self, other: Vec2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    fn clamp_to_bounds(self) -> Self {
        Vec2 {
            x: self.x.clamp(-BOUND, BOUND),
            y: self.y.clamp(-BOUND, BOUND),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub position: Vec2,
    pub color: Color,
    pub shape: Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    InfoExchange,
    Consensus,
    Localization,
}

/// Which reward terms are summed into the shared per-step reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RewardModes {
    pub distance: bool,
    pub instant: bool,
    pub time: bool,
}

impl RewardModes {
    pub fn distance_only() -> Self {
        RewardModes { distance: true, instant: false, time: false }
    }

    pub fn distance_instant() -> Self {
        RewardModes { distance: true, instant: true, time: false }
    }

    pub fn distance_time() -> Self {
        RewardModes { distance: true, instant: false, time: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: Task,
    /// Landmark count L. 3 for info exchange and localization, 6 for consensus.
    pub landmarks: usize,
    /// Message width k in bits.
    pub message_bits: usize,
    pub max_steps: usize,
    /// Displacement per move, world units.
    pub step_size: f64,
    /// Touch and meet radius.
    pub touch_radius: f64,
    pub rewards: RewardModes,
    /// Bonus paid while any agent touches the target.
    pub instant_bonus: f64,
    /// Constant penalty charged per step when the time term is enabled.
    pub time_penalty: f64,
}

impl TaskConfig {
    /// Canonical configuration for a task: landmark count and reward terms
    /// match the task definition, everything else takes the lab defaults.
    pub fn for_task(task: Task) -> Self {
        let (landmarks, message_bits, max_steps, rewards) = match task {
            Task::InfoExchange => (3, 4, 60, RewardModes::distance_only()),
            Task::Consensus => (6, 4, 80, RewardModes::distance_instant()),
            Task::Localization => (3, 3, 60, RewardModes::distance_time()),
        };
        TaskConfig {
            task,
            landmarks,
            message_bits,
            max_steps,
            step_size: 0.1,
            touch_radius: 0.1,
            rewards,
            instant_bonus: 10.0,
            time_penalty: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let expected_l = match self.task {
            Task::InfoExchange | Task::Localization => 3,
            Task::Consensus => 6,
        };
        if self.landmarks != expected_l {
            return Err(WorldError::InvalidConfig(format!(
                "{:?} requires {} landmarks, got {}",
                self.task, expected_l, self.landmarks
            )));
        }
        if self.message_bits == 0 {
            return Err(WorldError::InvalidConfig("message_bits must be >= 1".into()));
        }
        if self.max_steps == 0 {
            return Err(WorldError::InvalidConfig("max_steps must be >= 1".into()));
        }
        if self.step_size <= 0.0 {
            return Err(WorldError::InvalidConfig("step_size must be > 0".into()));
        }
        if self.touch_radius <= 0.0 {
            return Err(WorldError::InvalidConfig("touch_radius must be > 0".into()));
        }
        if self.task == Task::Localization && self.rewards.instant {
            return Err(WorldError::InvalidConfig(
                "instant reward needs a target landmark; localization has none".into(),
            ));
        }
        Ok(())
    }

    /// Observation vector length: 5 values per landmark, k message bits,
    /// and an L-wide goal block.
    pub fn observation_len(&self) -> usize {
        5 * self.landmarks + self.message_bits + self.landmarks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub agent_pos: [Vec2; 2],
    pub landmarks: Vec<Landmark>,
    /// Index of the target landmark; absent for localization.
    pub target: Option<usize>,
    /// Word most recently received by each agent (all zeros before the
    /// first exchange).
    pub inbox: [Vec<u8>; 2],
    pub step: usize,
}

impl WorldState {
    pub fn target_position(&self) -> Option<Vec2> {
        self.target.map(|t| self.landmarks[t].position)
    }

    pub fn agents_distance(&self) -> f64 {
        self.agent_pos[0].dist(self.agent_pos[1])
    }

    /// True when no further step may be taken.
    pub fn is_terminal(&self, config: &TaskConfig) -> bool {
        if self.step >= config.max_steps {
            return true;
        }
        config.task == Task::Localization && self.agents_distance() <= config.touch_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Up, Move::Down, Move::Left, Move::Right, Move::Stay];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        match self {
            Move::Up => 0,
            Move::Down => 1,
            Move::Left => 2,
            Move::Right => 3,
            Move::Stay => 4,
        }
    }

    pub fn from_index(i: usize) -> Option<Move> {
        Move::ALL.get(i).copied()
    }

    pub fn delta(self, step_size: f64) -> Vec2 {
        match self {
            Move::Up => Vec2::new(0.0, step_size),
            Move::Down => Vec2::new(0.0, -step_size),
            Move::Left => Vec2::new(-step_size, 0.0),
            Move::Right => Vec2::new(step_size, 0.0),
            Move::Stay => Vec2::new(0.0, 0.0),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Move::Up => 'U',
            Move::Down => 'D',
            Move::Left => 'L',
            Move::Right => 'R',
            Move::Stay => 'S',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub moves: [Move; 2],
    pub messages: [Vec<u8>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepEvents {
    pub agent_touching: [bool; 2],
    pub agents_met: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: WorldState,
    pub reward: [f64; 2],
    pub done: bool,
    pub events: StepEvents,
}

/// Per-agent observation vector, laid out as L blocks of
/// (dx, dy, property one-hot), then the received word, then the goal block.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
}

fn uniform_coord(rng: &mut ChaCha8Rng) -> f64 {
    -SPAWN_EXTENT + 2.0 * SPAWN_EXTENT * rng.gen::<f64>()
}

/// Create a fresh episode state. Landmark properties are assigned by
/// permutation so the per-task uniqueness constraints hold by construction.
pub fn spawn(config: &TaskConfig, seed: u64) -> Result<WorldState, WorldError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let agent_pos = [
        Vec2::new(uniform_coord(&mut rng), uniform_coord(&mut rng)),
        Vec2::new(uniform_coord(&mut rng), uniform_coord(&mut rng)),
    ];

    let positions: Vec<Vec2> = (0..config.landmarks)
        .map(|_| Vec2::new(uniform_coord(&mut rng), uniform_coord(&mut rng)))
        .collect();

    let landmarks: Vec<Landmark> = match config.task {
        Task::InfoExchange | Task::Localization => {
            // Independent permutations keep all colors distinct and all
            // shapes distinct.
            let mut colors = Color::ALL;
            let mut shapes = Shape::ALL;
            colors.shuffle(&mut rng);
            shapes.shuffle(&mut rng);
            positions
                .iter()
                .zip(colors.iter().zip(shapes.iter()))
                .map(|(&position, (&color, &shape))| Landmark { position, color, shape })
                .collect()
        }
        Task::Consensus => {
            // Six distinct (color, shape) pairs drawn from the nine possible.
            let mut pairs: Vec<(Color, Shape)> = Color::ALL
                .iter()
                .flat_map(|&c| Shape::ALL.iter().map(move |&s| (c, s)))
                .collect();
            pairs.shuffle(&mut rng);
            positions
                .iter()
                .zip(pairs.iter())
                .map(|(&position, &(color, shape))| Landmark { position, color, shape })
                .collect()
        }
    };

    let target = match config.task {
        Task::Localization => None,
        _ => Some(rng.gen_range(0..config.landmarks)),
    };

    Ok(WorldState {
        agent_pos,
        landmarks,
        target,
        inbox: [vec![0; config.message_bits], vec![0; config.message_bits]],
        step: 0,
    })
}

/// Index of the property value that the goal block encodes for `agent`,
/// or None when the task sets no goal.
fn goal_property_index(state: &WorldState, agent: usize, config: &TaskConfig) -> Option<usize> {
    let target = state.target?;
    let lm = &state.landmarks[target];
    match config.task {
        // Cross-modality: the color agent is told the target's shape and
        // cannot see shapes, so the partner has to fill the gap.
        Task::InfoExchange => Some(if agent == 0 { lm.shape.index() } else { lm.color.index() }),
        // Own modality: the hint alone is ambiguous because properties repeat.
        Task::Consensus => Some(if agent == 0 { lm.color.index() } else { lm.shape.index() }),
        Task::Localization => None,
    }
}

/// Build an observation from its raw ingredients. `goal` must already be
/// the L-wide goal block. This is the single place that defines the vector
/// layout; policy-map sweeps reuse it with a caller-chosen word and goal.
pub fn assemble_observation(
    agent: usize,
    pos: Vec2,
    landmarks: &[Landmark],
    word: &[u8],
    goal: &[f64],
) -> Observation {
    assert!(agent < 2, "agent index out of range");
    let mut values = Vec::with_capacity(5 * landmarks.len() + word.len() + goal.len());
    for lm in landmarks {
        values.push(lm.position.x - pos.x);
        values.push(lm.position.y - pos.y);
        let prop = if agent == 0 { lm.color.index() } else { lm.shape.index() };
        for p in 0..PROPERTY_VALUES {
            values.push(if p == prop { 1.0 } else { 0.0 });
        }
    }
    for &bit in word {
        values.push(f64::from(bit));
    }
    values.extend_from_slice(goal);
    Observation { values }
}

/// The L-wide goal block for `agent`: a 3-way property one-hot zero-padded
/// to length L, or all zeros when the task sets no goal.
pub fn goal_block(state: &WorldState, agent: usize, config: &TaskConfig) -> Vec<f64> {
    let goal = goal_property_index(state, agent, config);
    (0..config.landmarks).map(|j| if Some(j) == goal { 1.0 } else { 0.0 }).collect()
}

pub fn observe(state: &WorldState, agent: usize, config: &TaskConfig) -> Observation {
    let goal = goal_block(state, agent, config);
    let obs = assemble_observation(
        agent,
        state.agent_pos[agent],
        &state.landmarks,
        &state.inbox[agent],
        &goal,
    );
    debug_assert_eq!(obs.values.len(), config.observation_len());
    obs
}

/// Shared reward for the given state plus the touch/meet event flags.
pub fn compute_rewards(
    state: &WorldState,
    config: &TaskConfig,
) -> Result<([f64; 2], StepEvents), WorldError> {
    let target_pos = state.target_position();
    let touching = |i: usize| -> bool {
        target_pos.map_or(false, |t| state.agent_pos[i].dist(t) <= config.touch_radius)
    };
    let events = StepEvents {
        agent_touching: [touching(0), touching(1)],
        agents_met: state.agents_distance() <= config.touch_radius,
    };

    let mut reward = 0.0;
    if config.rewards.distance {
        if config.task == Task::Localization {
            reward -= state.agents_distance();
        } else {
            let t = target_pos.ok_or(WorldError::MissingTarget("distance"))?;
            reward -= state.agent_pos[0].dist(t) + state.agent_pos[1].dist(t);
        }
    }
    if config.rewards.instant {
        if target_pos.is_none() {
            return Err(WorldError::MissingTarget("instant"));
        }
        if events.agent_touching[0] || events.agent_touching[1] {
            reward += config.instant_bonus;
        }
    }
    if config.rewards.time {
        reward -= config.time_penalty;
    }

    Ok(([reward, reward], events))
}

/// Advance the world by one step: move both agents, deliver the words they
/// just sent, and score the resulting state.
pub fn step(
    state: &WorldState,
    action: &JointAction,
    config: &TaskConfig,
) -> Result<StepResult, WorldError> {
    if state.is_terminal(config) {
        return Err(WorldError::SteppedTerminal {
            step: state.step,
            max_steps: config.max_steps,
        });
    }
    for msg in &action.messages {
        if msg.len() != config.message_bits {
            return Err(WorldError::BadAction(format!(
                "message has {} bits, expected {}",
                msg.len(),
                config.message_bits
            )));
        }
        if msg.iter().any(|&b| b > 1) {
            return Err(WorldError::BadAction("message bits must be 0 or 1".into()));
        }
    }

    let mut next = state.clone();
    for i in 0..2 {
        let d = action.moves[i].delta(config.step_size);
        next.agent_pos[i] =
            Vec2::new(next.agent_pos[i].x + d.x, next.agent_pos[i].y + d.y).clamp_to_bounds();
    }
    // One-step delay: what an agent sent this step is readable by the
    // partner from the next observation on.
    next.inbox[0] = action.messages[1].clone();
    next.inbox[1] = action.messages[0].clone();
    next.step += 1;

    let (reward, events) = compute_rewards(&next, config)?;
    let done = next.step >= config.max_steps
        || (config.task == Task::Localization && events.agents_met);

    Ok(StepResult { state: next, reward, done, events })
}
