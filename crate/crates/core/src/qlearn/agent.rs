use super::exploration::{epsilon_at, epsilon_greedy};
use super::targets::{bellman_loss, ddqn_targets, dqn_targets, polyak_blend};
use super::AgentConfig;
use crate::ad::{Adam, NetParams, NetShape};
use crate::algorithm::Algorithm;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::metrics::{EpisodeMetrics, MetricsSink};
use crate::replay::Batch;
use crate::rng::{stream, Prng, Stream};
use crate::train::{run_episodes, Learner, StepLoss};

/// DQN, or Double DQN when `double` is set.
#[derive(Debug, Clone)]
pub struct DeepQAgent {
    shape: NetShape,
    cfg: AgentConfig,
    double: bool,
    active: NetParams,
    target: NetParams,
    adam: Adam,
    explore: Prng,
}

impl DeepQAgent {
    pub fn new(shape: NetShape, cfg: AgentConfig, double: bool) -> Result<Self> {
        cfg.validate()?;
        let active = shape.init(&mut stream(cfg.seed, Stream::Init));
        Ok(Self {
            shape,
            double,
            target: active.clone(),
            adam: Adam::new(active.len()),
            active,
            explore: stream(cfg.seed, Stream::Exploration),
            cfg,
        })
    }

    /// Replaces both networks with `params` and resets the optimizer.
    pub fn with_params(mut self, params: NetParams) -> Result<Self> {
        crate::error::ensure_len("parameter vector", self.shape.parameter_count(), params.len())?;
        self.target = params.clone();
        self.adam = Adam::new(params.len());
        self.active = params;
        Ok(self)
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn active(&self) -> &NetParams {
        &self.active
    }

    pub fn target(&self) -> &NetParams {
        &self.target
    }

    pub fn targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        if self.double {
            ddqn_targets(&self.shape, batch, &self.active, &self.target, self.cfg.gamma)
        } else {
            dqn_targets(&self.shape, batch, &self.target, self.cfg.gamma)
        }
    }
}

impl Learner for DeepQAgent {
    fn begin_episode(&mut self, _episode: usize) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, observation: &[f64], episode: usize) -> Result<usize> {
        let q = self.shape.forward(&self.active, observation)?;
        Ok(epsilon_greedy(&q, epsilon_at(episode, &self.cfg), &mut self.explore))
    }

    fn learn(&mut self, batch: &Batch) -> Result<StepLoss> {
        let targets = self.targets(batch)?;
        let (loss, grad) = bellman_loss(&self.shape, batch, &self.active, &targets)?;
        self.adam.step(&mut self.active.values, &grad, self.cfg.learning_rate)?;
        Ok(StepLoss {
            bellman_error: loss,
            vi_loss: None,
        })
    }

    fn evaluate(&mut self, batch: &Batch) -> Result<StepLoss> {
        let targets = self.targets(batch)?;
        let (loss, _) = bellman_loss(&self.shape, batch, &self.active, &targets)?;
        Ok(StepLoss {
            bellman_error: loss,
            vi_loss: None,
        })
    }

    fn sync_target(&mut self) -> Result<()> {
        polyak_blend(&mut self.target.values, &self.active.values, self.cfg.tau)
    }

    fn epsilon(&self, episode: usize) -> Option<f64> {
        Some(epsilon_at(episode, &self.cfg))
    }
}

/// Trains DQN or DDQN on `env`, returning one metrics row per episode.
pub fn train(
    env: &mut dyn Environment,
    algorithm: Algorithm,
    cfg: &AgentConfig,
    episodes: usize,
    timesteps: usize,
    sink: &mut dyn MetricsSink,
) -> Result<Vec<EpisodeMetrics>> {
    if algorithm.is_variational() {
        return Err(Error::InvalidInput(format!(
            "{algorithm} is a variational agent; use vagents::train"
        )));
    }
    let spec = env.spec().clone();
    let shape = NetShape::new(spec.obs_dim, cfg.hidden, spec.n_actions)?;
    let mut agent = DeepQAgent::new(shape, cfg.clone(), algorithm.is_double())?;
    run_episodes(env, &mut agent, &cfg.loop_config(episodes, timesteps), sink)
}
