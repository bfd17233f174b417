//! The episode loop shared by every agent.

use std::time::Instant;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::metrics::{EpisodeMetrics, MetricsSink};
use crate::replay::{Batch, ReplayBuffer, Transition};
use crate::rng::{child_seed, stream, Stream};

/// Loss values reported by one learning (or evaluation) step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub bellman_error: f64,
    pub vi_loss: Option<f64>,
}

/// An agent driven by [`run_episodes`].
pub trait Learner {
    fn begin_episode(&mut self, episode: usize) -> Result<()>;

    fn act(&mut self, observation: &[f64], episode: usize) -> Result<usize>;

    /// One gradient step on `batch`.
    fn learn(&mut self, batch: &Batch) -> Result<StepLoss>;

    /// Loss values on `batch` without updating anything.
    fn evaluate(&mut self, batch: &Batch) -> Result<StepLoss>;

    fn sync_target(&mut self) -> Result<()>;

    fn epsilon(&self, episode: usize) -> Option<f64>;

    fn posterior_rho_mean(&self) -> Option<f64> {
        None
    }
}

/// Replay and scheduling settings for the episode loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub episodes: usize,
    /// Per-episode step limit (on top of the environment's own cap).
    pub timesteps: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions stored before the first gradient step.
    pub warmup: usize,
    pub target_sync_interval: usize,
    pub seed: u64,
}

/// Runs `cfg.episodes` episodes: act, store the transition, take one
/// gradient step per environment step once the buffer holds `warmup`
/// transitions, and sync the target every `target_sync_interval` steps.
///
/// Each completed episode is passed to `sink` before the next one starts.
/// An episode without any gradient step reports losses evaluated on a
/// sample of what the buffer holds.
pub fn run_episodes(
    env: &mut dyn Environment,
    learner: &mut dyn Learner,
    cfg: &LoopConfig,
    sink: &mut dyn MetricsSink,
) -> Result<Vec<EpisodeMetrics>> {
    if cfg.episodes == 0 || cfg.timesteps == 0 {
        return Err(Error::InvalidInput("episodes and timesteps must be at least 1".into()));
    }
    if cfg.batch_size == 0 || cfg.target_sync_interval == 0 {
        return Err(Error::InvalidInput("batch size and sync interval must be positive".into()));
    }
    let mut env_rng = stream(cfg.seed, Stream::Environment);
    let mut replay_rng = stream(cfg.seed, Stream::Replay);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let learn_after = cfg.warmup.max(cfg.batch_size);
    let mut global_step = 0usize;
    let mut rows = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let started = Instant::now();
        learner.begin_episode(episode)?;
        let mut obs = env.reset(child_seed(&mut env_rng)).observation;
        let (mut total_reward, mut steps) = (0.0, 0usize);
        let (mut bellman_sum, mut vi_sum, mut updates) = (0.0, 0.0, 0usize);

        while steps < cfg.timesteps {
            let action = learner.act(&obs, episode)?;
            let step = env.step(action)?;
            let terminated = step.terminated();
            let done = step.done;
            let next = step.state.observation;
            total_reward += step.reward;
            steps += 1;
            global_step += 1;
            buffer.push(Transition {
                state: std::mem::replace(&mut obs, next.clone()),
                action,
                reward: step.reward,
                next_state: next,
                done: terminated,
            });

            if buffer.len() >= learn_after {
                let batch = buffer.sample_batch(cfg.batch_size, &mut replay_rng)?;
                let loss = learner.learn(&batch)?;
                bellman_sum += loss.bellman_error;
                vi_sum += loss.vi_loss.unwrap_or(0.0);
                updates += 1;
            }
            if global_step % cfg.target_sync_interval == 0 {
                learner.sync_target()?;
            }
            if done {
                break;
            }
        }

        let (bellman_error, vi_loss) = if updates > 0 {
            let n = updates as f64;
            (bellman_sum / n, vi_sum / n)
        } else {
            let n = cfg.batch_size.min(buffer.len());
            let batch = buffer.sample_batch(n, &mut replay_rng)?;
            let loss = learner.evaluate(&batch)?;
            (loss.bellman_error, loss.vi_loss.unwrap_or(0.0))
        };
        let is_variational = learner.posterior_rho_mean().is_some();

        let secs = started.elapsed().as_secs_f64();
        let row = EpisodeMetrics {
            episode,
            total_reward,
            bellman_error,
            vi_loss: is_variational.then_some(vi_loss),
            epsilon: learner.epsilon(episode),
            steps,
            iterations_per_sec: steps as f64 / secs.max(1e-9),
            wall_ms: (secs * 1000.0).round() as u64,
            posterior_rho_mean: learner.posterior_rho_mean(),
        };
        sink.record(&row)?;
        rows.push(row);
    }
    Ok(rows)
}
