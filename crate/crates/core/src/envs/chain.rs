//! A linear chain with a rewarding right terminal and an exactly solvable Q*.

use rand::Rng;

use super::{EnvSpec, EnvState, Environment, Episode, Step};
use crate::error::{Error, Result};
use crate::rng::{seeded, Prng};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// States `0..n`; state `n - 1` is terminal and entering it pays 1. Each
/// move goes the intended way with probability `1 - slip` and the opposite
/// way otherwise. Moving left from state 0 stays put. Episodes start in a
/// uniformly drawn non-terminal state; the observation is the state index.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    spec: EnvSpec,
    episode: Episode,
    n_states: usize,
    slip: f64,
    position: usize,
    rng: Prng,
}

pub fn chain_mdp(n_states: usize, slip: f64) -> Result<ChainMdp> {
    ChainMdp::new(n_states, slip)
}

impl ChainMdp {
    pub fn new(n_states: usize, slip: f64) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::InvalidInput(format!("chain needs at least 2 states, got {n_states}")));
        }
        if !(0.0..0.5).contains(&slip) {
            return Err(Error::InvalidInput(format!("slip must lie in [0, 0.5), got {slip}")));
        }
        Ok(Self {
            spec: EnvSpec {
                name: "Chain",
                obs_dim: 1,
                n_actions: 2,
                max_steps: 20 * n_states,
                solved_threshold: None,
            },
            episode: Episode::new(1),
            n_states,
            slip,
            position: 0,
            rng: seeded(0),
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn terminal_state(&self) -> usize {
        self.n_states - 1
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn reset_to(&mut self, position: usize) -> EnvState {
        assert!(position < self.terminal_state(), "start must be non-terminal");
        self.position = position;
        self.episode.begin(vec![position as f64])
    }

    fn shifted(&self, s: usize, dir: usize) -> usize {
        if dir == RIGHT {
            (s + 1).min(self.terminal_state())
        } else {
            s.saturating_sub(1)
        }
    }

    /// `(probability, next_state, reward)` for both possible outcomes.
    pub fn outcomes(&self, s: usize, a: usize) -> [(f64, usize, f64); 2] {
        let reward = |n: usize| if n == self.terminal_state() { 1.0 } else { 0.0 };
        let go = self.shifted(s, a);
        let slip = self.shifted(s, 1 - a);
        [(1.0 - self.slip, go, reward(go)), (self.slip, slip, reward(slip))]
    }

    /// Bellman optimality backup of `q` (indexed `[state][action]`).
    pub fn backup(&self, q: &[[f64; 2]], gamma: f64) -> Vec<[f64; 2]> {
        let v = |s: usize| {
            if s == self.terminal_state() {
                0.0
            } else {
                q[s][0].max(q[s][1])
            }
        };
        (0..self.n_states)
            .map(|s| {
                if s == self.terminal_state() {
                    return [0.0, 0.0];
                }
                std::array::from_fn(|a| {
                    self.outcomes(s, a)
                        .iter()
                        .map(|&(p, n, r)| p * (r + gamma * v(n)))
                        .sum()
                })
            })
            .collect()
    }

    /// Value iteration run until successive iterates differ by at most `tol`.
    /// Row `n - 1` (terminal) is all zeros.
    pub fn optimal_q(&self, gamma: f64, tol: f64) -> Vec<[f64; 2]> {
        let mut q = vec![[0.0; 2]; self.n_states];
        for _ in 0..1_000_000 {
            let next = self.backup(&q, gamma);
            let delta = next
                .iter()
                .zip(&q)
                .flat_map(|(a, b)| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()])
                .fold(0.0, f64::max);
            q = next;
            if delta <= tol {
                break;
            }
        }
        q
    }

    /// Largest absolute Bellman optimality residual over non-terminal states.
    pub fn bellman_residual(&self, q: &[[f64; 2]], gamma: f64) -> f64 {
        self.backup(q, gamma)
            .iter()
            .zip(q)
            .take(self.terminal_state())
            .flat_map(|(a, b)| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()])
            .fold(0.0, f64::max)
    }
}

impl Environment for ChainMdp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn state(&self) -> &EnvState {
        &self.episode.state
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        self.rng = seeded(seed);
        let start = self.rng.random_range(0..self.terminal_state());
        self.reset_to(start)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        self.episode.check_action(&self.spec, action)?;
        let slipped = self.slip > 0.0 && self.rng.random::<f64>() < self.slip;
        let dir = if slipped { 1 - action } else { action };
        self.position = self.shifted(self.position, dir);
        let terminal = self.position == self.terminal_state();
        let reward = if terminal { 1.0 } else { 0.0 };
        Ok(self
            .episode
            .advance(&self.spec, vec![self.position as f64], reward, terminal))
    }
}
