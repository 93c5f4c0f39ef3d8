//! Circular experience store with uniform sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One environment step as seen by both agents. Actions are stored as the
/// concatenated one-hot groups the critics consume (5-way movement plus k
/// two-way message groups per agent).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: [Vec<f64>; 2],
    pub actions: [Vec<f64>; 2],
    pub reward: f64,
    pub next_obs: [Vec<f64>; 2],
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { data: Vec::new(), capacity, cursor: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Insert, overwriting the oldest entry once full.
    pub fn push(&mut self, transition: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(transition);
        } else {
            self.data[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.data[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }

    /// Uniform indices with replacement.
    pub fn sample_indices(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        (0..n).map(|_| rng.gen_range(0..self.data.len())).collect()
    }
}
