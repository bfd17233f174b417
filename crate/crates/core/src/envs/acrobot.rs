//! Two-link underactuated pendulum, integrated with one RK4 step per action.

use std::f64::consts::PI;

use rand::Rng;

use super::{EnvSpec, EnvState, Environment, Episode, Step};
use crate::error::Result;
use crate::rng::seeded;

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_1: f64 = 0.5;
const LINK_COM_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];

/// Internal state: joint angles and angular velocities. The observation is
/// `[cos t1, sin t1, cos t2, sin t2, dt1, dt2]`.
#[derive(Debug, Clone)]
pub struct Acrobot {
    spec: EnvSpec,
    episode: Episode,
    joints: [f64; 4],
}

impl Default for Acrobot {
    fn default() -> Self {
        Self::new()
    }
}

fn observe(s: &[f64; 4]) -> Vec<f64> {
    vec![s[0].cos(), s[0].sin(), s[1].cos(), s[1].sin(), s[2], s[3]]
}

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    while x > hi {
        x -= span;
    }
    while x < lo {
        x += span;
    }
    x
}

/// Time derivative of `[t1, t2, dt1, dt2]` under torque `a` on the second joint.
fn derivs(s: [f64; 4], a: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2, i1, i2, g) = (
        LINK_MASS_1,
        LINK_MASS_2,
        LINK_LENGTH_1,
        LINK_COM_1,
        LINK_COM_2,
        LINK_MOI,
        LINK_MOI,
        GRAVITY,
    );
    let [t1, t2, dt1, dt2] = s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (t1 + t2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dt2 * dt2 * t2.sin()
        - 2.0 * m2 * l1 * lc2 * dt2 * dt1 * t2.sin()
        + (m1 * lc1 + m2 * l1) * g * (t1 - PI / 2.0).cos()
        + phi2;
    let ddt2 = (a + d2 / d1 * phi1 - m2 * l1 * lc2 * dt1 * dt1 * t2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddt1 = -(d2 * ddt2 + phi1) / d1;
    [dt1, dt2, ddt1, ddt2]
}

fn rk4(s: [f64; 4], a: f64, h: f64) -> [f64; 4] {
    let add = |x: [f64; 4], k: [f64; 4], c: f64| std::array::from_fn(|i| x[i] + c * k[i]);
    let k1 = derivs(s, a);
    let k2 = derivs(add(s, k1, h / 2.0), a);
    let k3 = derivs(add(s, k2, h / 2.0), a);
    let k4 = derivs(add(s, k3, h), a);
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

impl Acrobot {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "Acrobot-v1",
                obs_dim: 6,
                n_actions: 3,
                max_steps: 500,
                solved_threshold: Some(-100.0),
            },
            episode: Episode::new(6),
            joints: [0.0; 4],
        }
    }

    pub fn reset_to(&mut self, joints: [f64; 4]) -> EnvState {
        self.joints = joints;
        self.episode.begin(observe(&joints))
    }

    pub fn joints(&self) -> [f64; 4] {
        self.joints
    }

    pub fn dynamics(joints: [f64; 4], action: usize) -> [f64; 4] {
        let ns = rk4(joints, TORQUES[action], DT);
        [
            wrap(ns[0], -PI, PI),
            wrap(ns[1], -PI, PI),
            ns[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            ns[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ]
    }

    fn at_goal(s: &[f64; 4]) -> bool {
        -s[0].cos() - (s[1] + s[0]).cos() > 1.0
    }
}

impl Environment for Acrobot {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn state(&self) -> &EnvState {
        &self.episode.state
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = seeded(seed);
        let joints = std::array::from_fn(|_| rng.random_range(-0.1..0.1));
        self.reset_to(joints)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        self.episode.check_action(&self.spec, action)?;
        self.joints = Self::dynamics(self.joints, action);
        let terminal = Self::at_goal(&self.joints);
        let reward = if terminal { 0.0 } else { -1.0 };
        Ok(self.episode.advance(&self.spec, observe(&self.joints), reward, terminal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hanging_at_rest_is_an_equilibrium() {
        let s = Acrobot::dynamics([0.0; 4], 1);
        assert!(s.iter().all(|v| v.abs() < 1e-12), "{s:?}");
    }

    #[test]
    fn rk4_conserves_energy_without_torque() {
        // Total mechanical energy of the free double pendulum.
        let energy = |s: [f64; 4]| {
            let [t1, t2, d1, d2] = s;
            let (m1, m2, l1, lc1, lc2, i) = (1.0, 1.0, 1.0, 0.5, 0.5, 1.0);
            let kin = 0.5 * (m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + 2.0 * i) * d1 * d1
                + (m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i) * d1 * d2
                + 0.5 * (m2 * lc2 * lc2 + i) * d2 * d2;
            let pot = -m1 * 9.8 * lc1 * t1.cos() - m2 * 9.8 * (l1 * t1.cos() + lc2 * (t1 + t2).cos());
            kin + pot
        };
        let mut s = [0.3, -0.2, 0.0, 0.0];
        let e0 = energy(s);
        for _ in 0..20 {
            s = rk4(s, 0.0, DT);
        }
        assert!((energy(s) - e0).abs() < 0.05 * e0.abs(), "{} vs {e0}", energy(s));
    }

    #[test]
    fn observation_encoding_and_bounds() {
        let mut env = Acrobot::new();
        let s0 = env.reset(3);
        assert!(env.joints().iter().all(|v| (-0.1..=0.1).contains(v)));
        assert_eq!(s0.observation.len(), 6);
        for t in 0..100 {
            let st = env.step(t % 3).unwrap();
            let o = &st.state.observation;
            assert!((o[0] * o[0] + o[1] * o[1] - 1.0).abs() < 1e-12);
            assert!(o[4].abs() <= MAX_VEL_1 && o[5].abs() <= MAX_VEL_2);
            if st.done {
                break;
            }
        }
    }

    #[test]
    fn wrap_maps_into_interval() {
        assert!((wrap(3.5 * PI, -PI, PI) - (-0.5 * PI)).abs() < 1e-12);
        assert_eq!(wrap(0.25, -PI, PI), 0.25);
    }
}
