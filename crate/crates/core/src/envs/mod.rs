//! Classic-control tasks rebuilt from their public definitions, plus a small
//! chain MDP with a known optimal Q function.
//!
//! Every environment is deterministic given the seed passed to
//! [`Environment::reset`].

mod acrobot;
mod cartpole;
mod chain;
mod mountain_car;

use std::fmt;
use std::str::FromStr;

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use chain::{chain_mdp, ChainMdp, LEFT, RIGHT};
pub use mountain_car::MountainCar;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub max_steps: usize,
    pub solved_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step_count: usize,
    pub done: bool,
}

/// Result of one environment transition.
///
/// `done` is set on physical termination and on the capping step;
/// `truncated` distinguishes the latter so learners do not treat the cap as
/// a terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
}

impl Step {
    pub fn terminated(&self) -> bool {
        self.done && !self.truncated
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    fn state(&self) -> &EnvState;

    fn reset(&mut self, seed: u64) -> EnvState;

    fn step(&mut self, action: usize) -> Result<Step>;
}

/// Shared bookkeeping for step-capped episodic tasks.
#[derive(Debug, Clone)]
pub(crate) struct Episode {
    pub state: EnvState,
}

impl Episode {
    pub fn new(obs_dim: usize) -> Self {
        Self {
            state: EnvState {
                observation: vec![0.0; obs_dim],
                step_count: 0,
                done: true,
            },
        }
    }

    pub fn begin(&mut self, observation: Vec<f64>) -> EnvState {
        self.state = EnvState {
            observation,
            step_count: 0,
            done: false,
        };
        self.state.clone()
    }

    pub fn check_action(&self, spec: &EnvSpec, action: usize) -> Result<()> {
        if self.state.done {
            return Err(Error::ContractViolation(format!(
                "{}: step called on a finished episode; call reset first",
                spec.name
            )));
        }
        if action >= spec.n_actions {
            return Err(Error::InvalidInput(format!(
                "{}: action {action} out of range 0..{}",
                spec.name, spec.n_actions
            )));
        }
        Ok(())
    }

    pub fn advance(&mut self, spec: &EnvSpec, observation: Vec<f64>, reward: f64, terminal: bool) -> Step {
        self.state.step_count += 1;
        let capped = self.state.step_count >= spec.max_steps;
        self.state.observation = observation;
        self.state.done = terminal || capped;
        Step {
            state: self.state.clone(),
            reward,
            done: self.state.done,
            truncated: capped && !terminal,
        }
    }
}

/// The named tasks selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvKind {
    CartPoleV0,
    CartPoleV1,
    MountainCarV0,
    AcrobotV1,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::CartPoleV0,
        EnvKind::CartPoleV1,
        EnvKind::MountainCarV0,
        EnvKind::AcrobotV1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPoleV0 => "CartPole-v0",
            EnvKind::CartPoleV1 => "CartPole-v1",
            EnvKind::MountainCarV0 => "MountainCar-v0",
            EnvKind::AcrobotV1 => "Acrobot-v1",
        }
    }

    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::CartPoleV0 => Box::new(CartPole::v0()),
            EnvKind::CartPoleV1 => Box::new(CartPole::v1()),
            EnvKind::MountainCarV0 => Box::new(MountainCar::new()),
            EnvKind::AcrobotV1 => Box::new(Acrobot::new()),
        }
    }

    pub fn spec(self) -> EnvSpec {
        self.make().spec().clone()
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = EnvKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidInput(format!(
                    "unknown environment `{s}`; expected one of: {}",
                    names.join(", ")
                ))
            })
    }
}

pub fn make(name: &str) -> Result<Box<dyn Environment>> {
    Ok(name.parse::<EnvKind>()?.make())
}
