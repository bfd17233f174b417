//! Deterministic-network agents (DQN, Double DQN), the epsilon-greedy
//! schedule, target blending, and a tabular Q-learning oracle.

mod agent;
pub mod exploration;
pub mod tabular;
pub mod targets;

pub use agent::{train, DeepQAgent};
pub use exploration::{argmax, epsilon_at, epsilon_greedy};
pub use tabular::{learn_chain, TabularQ};
pub use targets::{bellman_loss, ddqn_targets, dqn_targets, sync_target};

use crate::ad::DEFAULT_HIDDEN;
use crate::error::{Error, Result};
use crate::replay::{DEFAULT_BATCH_SIZE, DEFAULT_CAPACITY, DEFAULT_WARMUP};
use crate::train::LoopConfig;

/// Settings shared by all four agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: usize,
    pub tau: f64,
    pub target_sync_interval: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_episodes: 30,
            tau: 1.0,
            target_sync_interval: 100,
            batch_size: DEFAULT_BATCH_SIZE,
            buffer_capacity: DEFAULT_CAPACITY,
            warmup: DEFAULT_WARMUP,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end)
            || !(0.0..=1.0).contains(&self.epsilon_start)
            || self.epsilon_end > self.epsilon_start
        {
            return bad(format!(
                "epsilon schedule must satisfy 0 <= end <= start <= 1, got {} -> {}",
                self.epsilon_start, self.epsilon_end
            ));
        }
        if self.target_sync_interval == 0 || self.batch_size == 0 || self.buffer_capacity == 0 || self.hidden == 0 {
            return bad("sync interval, batch size, buffer capacity and hidden width must be positive".into());
        }
        Ok(())
    }

    pub fn loop_config(&self, episodes: usize, timesteps: usize) -> LoopConfig {
        LoopConfig {
            episodes,
            timesteps,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            warmup: self.warmup,
            target_sync_interval: self.target_sync_interval,
            seed: self.seed,
        }
    }
}
