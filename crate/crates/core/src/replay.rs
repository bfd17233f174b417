//! Fixed-capacity FIFO experience replay with uniform sampling.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 50_000;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_WARMUP: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only on physical termination; a capped episode still bootstraps.
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    pub fn push(&mut self, t: Transition) {
        debug_assert_eq!(t.state.len(), t.next_state.len());
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    /// `n` transitions drawn uniformly with replacement. Fails only on an
    /// empty buffer or `n == 0`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if n == 0 || self.storage.is_empty() {
            return Err(Error::InsufficientData {
                needed: n.max(1),
                available: self.storage.len(),
            });
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| &self.storage[rng.random_range(0..len)]).collect())
    }

    /// Sample packed into a [`Batch`].
    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        Ok(Batch::from_transitions(&self.sample(n, rng)?))
    }
}

/// Transitions packed row-major for batched network evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        let obs_dim = ts.first().map_or(0, |t| t.state.len());
        let mut b = Batch {
            obs_dim,
            states: Vec::with_capacity(ts.len() * obs_dim),
            actions: Vec::with_capacity(ts.len()),
            rewards: Vec::with_capacity(ts.len()),
            next_states: Vec::with_capacity(ts.len() * obs_dim),
            dones: Vec::with_capacity(ts.len()),
        };
        for t in ts {
            b.states.extend_from_slice(&t.state);
            b.actions.push(t.action);
            b.rewards.push(t.reward);
            b.next_states.extend_from_slice(&t.next_state);
            b.dones.push(t.done);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}
