use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Dqn,
    Ddqn,
    Vdqn,
    Dvdqn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Vdqn, Algorithm::Dvdqn];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dqn => "DQN",
            Algorithm::Ddqn => "DDQN",
            Algorithm::Vdqn => "VDQN",
            Algorithm::Dvdqn => "DVDQN",
        }
    }

    pub fn is_variational(self) -> bool {
        matches!(self, Algorithm::Vdqn | Algorithm::Dvdqn)
    }

    /// Whether target-action selection is decoupled from evaluation.
    pub fn is_double(self) -> bool {
        matches!(self, Algorithm::Ddqn | Algorithm::Dvdqn)
    }

    /// Target blending coefficient used when none is given explicitly.
    pub fn default_tau(self) -> f64 {
        match self {
            Algorithm::Dvdqn => 0.25,
            _ => 1.0,
        }
    }

    /// Adam step size used when none is given explicitly.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            Algorithm::Dqn | Algorithm::Ddqn => 1e-3,
            Algorithm::Vdqn => 2e-3,
            Algorithm::Dvdqn => 5e-4,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown algorithm `{s}`; expected one of: DQN, DDQN, VDQN, DVDQN"
                ))
            })
    }
}
