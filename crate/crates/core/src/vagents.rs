//! Variational agents: VDQN and DVDQN.
//!
//! Both keep an active posterior `phi` and a target posterior `phi_target`.
//! Exploration comes from acting greedily under a parameter sample
//! `theta_episode ~ q_phi` drawn at the start of every episode (or every step,
//! see [`Resample`]). DVDQN differs from VDQN in two independently switchable
//! ways: its bootstrap target decouples action selection (active-posterior
//! sample) from evaluation (target-posterior sample), and its target
//! posterior follows the active one through a damped Polyak blend.

use rand::Rng;

use crate::ad::{clip_global_norm, Adam, NetParams, NetShape};
use crate::algorithm::Algorithm;
use crate::envs::Environment;
use crate::error::{ensure_len, Error, Result};
use crate::metrics::{EpisodeMetrics, MetricsSink};
use crate::qlearn::exploration::{argmax, epsilon_at, epsilon_greedy, max_value};
use crate::qlearn::targets::{polyak_blend, targets_from};
use crate::qlearn::AgentConfig;
use crate::replay::Batch;
use crate::rng::{stream, Prng, Stream};
use crate::train::{run_episodes, Learner, StepLoss};
use crate::varinf::{elbo_loss, sample_theta, LikelihoodConfig, VariationalParams, DEFAULT_RHO_INIT};

pub const DEFAULT_GRAD_CLIP: f64 = 10.0;

/// When the acting parameter sample is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    PerEpisode,
    PerStep,
}

impl Resample {
    pub fn name(self) -> &'static str {
        match self {
            Resample::PerEpisode => "episode",
            Resample::PerStep => "step",
        }
    }
}

impl std::str::FromStr for Resample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "episode" => Ok(Resample::PerEpisode),
            "step" => Ok(Resample::PerStep),
            _ => Err(Error::InvalidInput(format!("unknown resample cadence `{s}` (episode|step)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalConfig {
    pub likelihood: LikelihoodConfig,
    pub rho_init: f64,
    /// Global L2 norm bound on the (mu, rho) gradient.
    pub grad_clip_norm: f64,
    pub resample: Resample,
    /// Select the bootstrap action with an active-posterior sample and
    /// evaluate it with a target-posterior sample.
    pub decoupled_targets: bool,
    /// Mix epsilon-greedy into the Thompson policy (ablations only).
    pub epsilon_greedy: bool,
    /// Keep `rho` fixed at its initial value.
    pub freeze_rho: bool,
}

impl VariationalConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        Self {
            likelihood: LikelihoodConfig::default(),
            rho_init: DEFAULT_RHO_INIT,
            grad_clip_norm: DEFAULT_GRAD_CLIP,
            resample: Resample::PerEpisode,
            decoupled_targets: algorithm == Algorithm::Dvdqn,
            epsilon_greedy: false,
            freeze_rho: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalAgentState {
    pub phi: VariationalParams,
    pub phi_target: VariationalParams,
    pub theta_episode: NetParams,
    pub step_count: usize,
    pub episode_count: usize,
}

/// Greedy action of the current parameter sample.
pub fn act(shape: &NetShape, state: &[f64], agent: &VariationalAgentState) -> Result<usize> {
    Ok(argmax(&shape.forward(&agent.theta_episode, state)?))
}

/// `r + gamma * max_a' Q_{theta-}(s', a')` with one `theta- ~ q_{phi_target}`
/// drawn for the whole batch.
pub fn vdqn_targets<R: Rng + ?Sized>(
    shape: &NetShape,
    batch: &Batch,
    phi_target: &VariationalParams,
    gamma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check(shape, batch, phi_target)?;
    let (theta_minus, _) = sample_theta(phi_target, rng);
    let next_q = shape.forward_batch(&theta_minus, &batch.next_states, batch.len())?;
    let k = shape.output_dim;
    Ok(targets_from(batch, gamma, |j| max_value(&next_q[j * k..(j + 1) * k])))
}

/// Decoupled target: draws `theta- ~ q_{phi_target}` then `theta ~ q_{phi_active}`;
/// `theta` selects the next action and `theta-` evaluates it.
pub fn dvdqn_targets<R: Rng + ?Sized>(
    shape: &NetShape,
    batch: &Batch,
    phi_active: &VariationalParams,
    phi_target: &VariationalParams,
    gamma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check(shape, batch, phi_target)?;
    ensure_len("active posterior", phi_target.dim(), phi_active.dim())?;
    let (theta_minus, _) = sample_theta(phi_target, rng);
    let (theta, _) = sample_theta(phi_active, rng);
    decoupled_targets(shape, batch, &theta, &theta_minus, gamma)
}

/// Double-Q target from explicit parameter samples.
pub fn decoupled_targets(
    shape: &NetShape,
    batch: &Batch,
    select: &NetParams,
    evaluate: &NetParams,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = batch.len();
    let sel = shape.forward_batch(select, &batch.next_states, n)?;
    let ev = shape.forward_batch(evaluate, &batch.next_states, n)?;
    let k = shape.output_dim;
    Ok(targets_from(batch, gamma, |j| ev[j * k + argmax(&sel[j * k..(j + 1) * k])]))
}

fn check(shape: &NetShape, batch: &Batch, phi: &VariationalParams) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    ensure_len("batch observation width", shape.input_dim, batch.obs_dim)?;
    ensure_len("variational dimension", shape.parameter_count(), phi.dim())
}

/// `tau * phi + (1 - tau) * phi_target` on both `mu` and `rho`.
pub fn update_variational_target(
    phi: &VariationalParams,
    phi_target: &VariationalParams,
    tau: f64,
) -> Result<VariationalParams> {
    let mut out = phi_target.clone();
    polyak_blend(&mut out.mu, &phi.mu, tau)?;
    polyak_blend(&mut out.rho, &phi.rho, tau)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct VariationalAgent {
    shape: NetShape,
    cfg: AgentConfig,
    vcfg: VariationalConfig,
    state: VariationalAgentState,
    adam_mu: Adam,
    adam_rho: Adam,
    posterior_rng: Prng,
    explore_rng: Prng,
}

impl VariationalAgent {
    pub fn new(shape: NetShape, cfg: AgentConfig, vcfg: VariationalConfig) -> Result<Self> {
        cfg.validate()?;
        vcfg.likelihood.validate()?;
        if !(vcfg.grad_clip_norm > 0.0) {
            return Err(Error::InvalidInput("gradient clip norm must be positive".into()));
        }
        let phi = VariationalParams::init(&shape, vcfg.rho_init, &mut stream(cfg.seed, Stream::Init));
        Self::from_posterior(shape, cfg, vcfg, phi)
    }

    /// Starts from an explicit posterior (used for both active and target).
    pub fn from_posterior(
        shape: NetShape,
        cfg: AgentConfig,
        vcfg: VariationalConfig,
        phi: VariationalParams,
    ) -> Result<Self> {
        ensure_len("variational dimension", shape.parameter_count(), phi.dim())?;
        let mut explore_rng = stream(cfg.seed, Stream::Exploration);
        let (theta_episode, _) = sample_theta(&phi, &mut explore_rng);
        let n = phi.dim();
        Ok(Self {
            shape,
            state: VariationalAgentState {
                phi_target: phi.clone(),
                phi,
                theta_episode,
                step_count: 0,
                episode_count: 0,
            },
            adam_mu: Adam::new(n),
            adam_rho: Adam::new(n),
            posterior_rng: stream(cfg.seed, Stream::Posterior),
            explore_rng,
            cfg,
            vcfg,
        })
    }

    pub fn state(&self) -> &VariationalAgentState {
        &self.state
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn targets(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let s = &self.state;
        if self.vcfg.decoupled_targets {
            dvdqn_targets(&self.shape, batch, &s.phi, &s.phi_target, self.cfg.gamma, &mut self.posterior_rng)
        } else {
            vdqn_targets(&self.shape, batch, &s.phi_target, self.cfg.gamma, &mut self.posterior_rng)
        }
    }
}

impl Learner for VariationalAgent {
    fn begin_episode(&mut self, episode: usize) -> Result<()> {
        self.state.episode_count = episode;
        if self.vcfg.resample == Resample::PerEpisode {
            self.state.theta_episode = sample_theta(&self.state.phi, &mut self.explore_rng).0;
        }
        Ok(())
    }

    fn act(&mut self, observation: &[f64], episode: usize) -> Result<usize> {
        if self.vcfg.resample == Resample::PerStep {
            self.state.theta_episode = sample_theta(&self.state.phi, &mut self.explore_rng).0;
        }
        self.state.step_count += 1;
        if self.vcfg.epsilon_greedy {
            let q = self.shape.forward(&self.state.theta_episode, observation)?;
            return Ok(epsilon_greedy(&q, epsilon_at(episode, &self.cfg), &mut self.explore_rng));
        }
        act(&self.shape, observation, &self.state)
    }

    fn learn(&mut self, batch: &Batch) -> Result<StepLoss> {
        let targets = self.targets(batch)?;
        let mut out = elbo_loss(
            &self.shape,
            batch,
            &self.state.phi,
            &targets,
            &self.vcfg.likelihood,
            &mut self.posterior_rng,
        )?;
        if self.vcfg.freeze_rho {
            out.grad_rho.iter_mut().for_each(|g| *g = 0.0);
        }
        clip_global_norm(&mut [&mut out.grad_mu, &mut out.grad_rho], self.vcfg.grad_clip_norm);
        let lr = self.cfg.learning_rate;
        self.adam_mu.step(&mut self.state.phi.mu, &out.grad_mu, lr)?;
        if !self.vcfg.freeze_rho {
            self.adam_rho.step(&mut self.state.phi.rho, &out.grad_rho, lr)?;
        }
        if self.state.phi.rho.iter().any(|r| !r.is_finite() || *r > 700.0) {
            return Err(Error::NumericOverflow("posterior scale"));
        }
        Ok(StepLoss {
            bellman_error: out.bellman_error,
            vi_loss: Some(out.loss),
        })
    }

    fn evaluate(&mut self, batch: &Batch) -> Result<StepLoss> {
        let targets = self.targets(batch)?;
        let out = elbo_loss(
            &self.shape,
            batch,
            &self.state.phi,
            &targets,
            &self.vcfg.likelihood,
            &mut self.posterior_rng,
        )?;
        Ok(StepLoss {
            bellman_error: out.bellman_error,
            vi_loss: Some(out.loss),
        })
    }

    fn sync_target(&mut self) -> Result<()> {
        self.state.phi_target = update_variational_target(&self.state.phi, &self.state.phi_target, self.cfg.tau)?;
        Ok(())
    }

    fn epsilon(&self, episode: usize) -> Option<f64> {
        self.vcfg.epsilon_greedy.then(|| epsilon_at(episode, &self.cfg))
    }

    fn posterior_rho_mean(&self) -> Option<f64> {
        Some(self.state.phi.mean_rho())
    }
}

/// Trains VDQN or DVDQN on `env`, returning one metrics row per episode.
pub fn train(
    env: &mut dyn Environment,
    algorithm: Algorithm,
    cfg: &AgentConfig,
    vcfg: &VariationalConfig,
    episodes: usize,
    timesteps: usize,
    sink: &mut dyn MetricsSink,
) -> Result<Vec<EpisodeMetrics>> {
    if !algorithm.is_variational() {
        return Err(Error::InvalidInput(format!(
            "{algorithm} is not a variational agent; use qlearn::train"
        )));
    }
    let spec = env.spec().clone();
    let shape = NetShape::new(spec.obs_dim, cfg.hidden, spec.n_actions)?;
    let mut agent = VariationalAgent::new(shape, cfg.clone(), vcfg.clone())?;
    run_episodes(env, &mut agent, &cfg.loop_config(episodes, timesteps), sink)
}
