//! Table-based Q-learning, used as a correctness oracle for the deep agents.

use rand::Rng;

use super::exploration::{epsilon_greedy, max_value};
use crate::envs::{ChainMdp, Environment};
use crate::error::{Error, Result};
use crate::rng::Prng;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    n_states: usize,
    n_actions: usize,
    pub alpha: f64,
    table: Vec<f64>,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self {
            n_states,
            n_actions,
            alpha,
            table: vec![0.0; n_states * n_actions],
        })
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.table[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.table[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.table[s * self.n_actions + a] = v;
    }

    /// `Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a'))`;
    /// `next = None` marks a terminal successor (no bootstrap).
    pub fn update(&mut self, s: usize, a: usize, r: f64, next: Option<usize>, gamma: f64) {
        let bootstrap = next.map_or(0.0, |n| max_value(self.row(n)));
        let idx = s * self.n_actions + a;
        self.table[idx] = (1.0 - self.alpha) * self.table[idx] + self.alpha * (r + gamma * bootstrap);
    }

    /// Largest absolute difference from `q` over the first `q.len()` states.
    pub fn sup_distance(&self, q: &[[f64; 2]]) -> f64 {
        q.iter()
            .enumerate()
            .flat_map(|(s, row)| (0..2).map(move |a| (s, a, row[a])))
            .map(|(s, a, v)| (self.get(s, a) - v).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs `updates` epsilon-greedy Q-learning updates on a chain.
pub fn learn_chain(
    chain: &mut ChainMdp,
    q: &mut TabularQ,
    gamma: f64,
    epsilon: f64,
    updates: usize,
    rng: &mut Prng,
) -> Result<()> {
    let mut s = chain.reset(rng.random()).observation[0] as usize;
    for _ in 0..updates {
        let a = epsilon_greedy(q.row(s), epsilon, rng);
        let step = chain.step(a)?;
        let next = step.state.observation[0] as usize;
        q.update(s, a, step.reward, (!step.terminated()).then_some(next), gamma);
        s = if step.done {
            chain.reset(rng.random()).observation[0] as usize
        } else {
            next
        };
    }
    Ok(())
}
