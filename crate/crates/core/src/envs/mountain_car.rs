//! Under-powered car in a valley.

use rand::Rng;

use super::{EnvSpec, EnvState, Environment, Episode, Step};
use crate::error::Result;
use crate::rng::seeded;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

/// Observation: position, velocity. Actions: push left, none, push right.
#[derive(Debug, Clone)]
pub struct MountainCar {
    spec: EnvSpec,
    episode: Episode,
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl MountainCar {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "MountainCar-v0",
                obs_dim: 2,
                n_actions: 3,
                max_steps: 200,
                solved_threshold: Some(-110.0),
            },
            episode: Episode::new(2),
        }
    }

    pub fn reset_to(&mut self, position: f64, velocity: f64) -> EnvState {
        self.episode.begin(vec![position, velocity])
    }

    pub fn dynamics(position: f64, velocity: f64, action: usize) -> (f64, f64) {
        let mut v = velocity + (action as f64 - 1.0) * FORCE - GRAVITY * (3.0 * position).cos();
        v = v.clamp(-MAX_SPEED, MAX_SPEED);
        let mut p = (position + v).clamp(MIN_POSITION, MAX_POSITION);
        if p == MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        if p > MAX_POSITION {
            p = MAX_POSITION;
        }
        (p, v)
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn state(&self) -> &EnvState {
        &self.episode.state
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = seeded(seed);
        let position = rng.random_range(-0.6..-0.4);
        self.episode.begin(vec![position, 0.0])
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        self.episode.check_action(&self.spec, action)?;
        let o = &self.episode.state.observation;
        let (p, v) = Self::dynamics(o[0], o[1], action);
        let terminal = p >= GOAL_POSITION && v >= 0.0;
        Ok(self.episode.advance(&self.spec, vec![p, v], -1.0, terminal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_distribution() {
        let mut env = MountainCar::new();
        for seed in 0..200 {
            let s = env.reset(seed);
            assert!((-0.6..=-0.4).contains(&s.observation[0]));
            assert_eq!(s.observation[1], 0.0);
        }
    }

    #[test]
    fn coasting_step_is_pure_gravity() {
        let mut env = MountainCar::new();
        env.reset_to(-0.5, 0.0);
        let s = env.step(1).unwrap();
        let dv = -0.0025 * (3.0f64 * -0.5).cos();
        assert!((s.state.observation[1] - dv).abs() < 1e-12);
        assert!((s.state.observation[0] - (-0.5 + dv)).abs() < 1e-12);
        assert_eq!(s.reward, -1.0);
    }

    #[test]
    fn left_wall_stops_the_car() {
        let (p, v) = MountainCar::dynamics(-1.19, -0.05, 0);
        assert_eq!((p, v), (MIN_POSITION, 0.0));
    }

    #[test]
    fn position_stays_in_bounds_and_goal_terminates() {
        let mut env = MountainCar::new();
        env.reset(4);
        // Energy pumping: push in the direction of motion.
        let reached;
        loop {
            let v = env.state().observation[1];
            let st = env.step(if v >= 0.0 { 2 } else { 0 }).unwrap();
            let p = st.state.observation[0];
            assert!((MIN_POSITION..=MAX_POSITION).contains(&p));
            if st.done {
                reached = st.terminated();
                break;
            }
        }
        assert!(reached);
    }
}
