//! Deterministic and variational deep Q-learning on classic-control tasks.
//!
//! The crate is organised bottom-up: [`ad`] provides a small reverse-mode
//! tape and the fixed two-hidden-layer Q-network, [`envs`] the simulators,
//! [`replay`] the experience buffer, [`qlearn`] DQN and Double DQN,
//! [`varinf`] the Gaussian variational family and its loss, [`vagents`]
//! VDQN and DVDQN, and [`harness`] the run, batch and reporting tools.

pub mod ad;
pub mod algorithm;
pub mod envs;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod qlearn;
pub mod replay;
pub mod rng;
pub mod train;
pub mod vagents;
pub mod varinf;

pub use algorithm::Algorithm;
pub use envs::{EnvKind, Environment};
pub use error::{Error, Result};
pub use metrics::EpisodeMetrics;
