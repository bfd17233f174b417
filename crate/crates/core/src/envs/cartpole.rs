//! Cart-pole balancing, Euler-integrated.

use rand::Rng;

use super::{EnvSpec, EnvState, Environment, Episode, Step};
use crate::error::Result;
use crate::rng::seeded;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const X_THRESHOLD: f64 = 2.4;

/// Observation: cart position, cart velocity, pole angle, pole angular velocity.
#[derive(Debug, Clone)]
pub struct CartPole {
    spec: EnvSpec,
    episode: Episode,
}

impl CartPole {
    pub fn v0() -> Self {
        Self::with_spec("CartPole-v0", 200, 195.0)
    }

    pub fn v1() -> Self {
        Self::with_spec("CartPole-v1", 500, 475.0)
    }

    fn with_spec(name: &'static str, max_steps: usize, solved: f64) -> Self {
        Self {
            spec: EnvSpec {
                name,
                obs_dim: 4,
                n_actions: 2,
                max_steps,
                solved_threshold: Some(solved),
            },
            episode: Episode::new(4),
        }
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: [f64; 4]) -> EnvState {
        self.episode.begin(state.to_vec())
    }

    /// One Euler step of the cart-pole equations of motion.
    pub fn dynamics(s: [f64; 4], action: usize) -> [f64; 4] {
        let [x, x_dot, theta, theta_dot] = s;
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ]
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn state(&self) -> &EnvState {
        &self.episode.state
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = seeded(seed);
        let obs = (0..4).map(|_| rng.random_range(-0.05..0.05)).collect();
        self.episode.begin(obs)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        self.episode.check_action(&self.spec, action)?;
        let o = &self.episode.state.observation;
        let next = Self::dynamics([o[0], o[1], o[2], o[3]], action);
        let terminal = next[0].abs() > X_THRESHOLD || next[2].abs() > THETA_THRESHOLD;
        Ok(self.episode.advance(&self.spec, next.to_vec(), 1.0, terminal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_within_published_bounds() {
        let mut env = CartPole::v0();
        for seed in 0..200 {
            let s = env.reset(seed);
            assert!(s.observation.iter().all(|v| (-0.05..=0.05).contains(v)));
            assert_eq!((s.step_count, s.done), (0, false));
        }
        assert_eq!(env.reset(9), env.reset(9));
    }

    #[test]
    fn push_right_from_rest_by_hand() {
        // From the zero state: temp = F/M, theta_acc = -temp / (l (4/3 - m/M)),
        // x_acc = temp - m l theta_acc / M; positions stay 0 after one Euler step.
        let temp: f64 = 10.0 / 1.1;
        let theta_acc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
        let x_acc = temp - 0.05 * theta_acc / 1.1;
        let mut env = CartPole::v0();
        env.reset_to([0.0; 4]);
        let s = env.step(1).unwrap();
        let want = [0.0, 0.02 * x_acc, 0.0, 0.02 * theta_acc];
        for (g, w) in s.state.observation.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
        assert_eq!(s.reward, 1.0);
    }

    #[test]
    fn terminates_past_angle_threshold() {
        let mut env = CartPole::v0();
        env.reset_to([0.0, 0.0, THETA_THRESHOLD - 1e-6, 1.0]);
        let s = env.step(0).unwrap();
        assert!(s.done && s.terminated());
    }

    #[test]
    fn balancing_episode_caps() {
        // A simple angle-feedback controller balances long enough to hit the cap.
        let mut env = CartPole::v0();
        let mut s = env.reset(1);
        let mut steps = 0;
        loop {
            let o = &s.observation;
            let a = usize::from(o[2] + 0.5 * o[3] > 0.0);
            let st = env.step(a).unwrap();
            steps += 1;
            s = st.state.clone();
            if st.done {
                assert!(st.truncated);
                break;
            }
        }
        assert_eq!(steps, 200);
    }
}
