//! Run configuration and its flat `key = value` manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::algorithm::Algorithm;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::qlearn::AgentConfig;
use crate::rng::GENERATOR_NAME;
use crate::vagents::VariationalConfig;
use crate::varinf::DEFAULT_VI_WINDOW;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings fixed by this build. Written to every manifest; a manifest that
/// disagrees with any of them is rejected.
pub const FIXED_SETTINGS: [(&str, &str); 12] = [
    ("network", "mlp, two relu hidden layers, linear output"),
    ("init", "normal(0, 1/fan_in) weights, zero biases"),
    ("optimizer", "adam"),
    ("adam_beta1", "0.9"),
    ("adam_beta2", "0.999"),
    ("adam_eps", "1e-8"),
    ("prng", GENERATOR_NAME),
    ("replay_sampling", "uniform with replacement"),
    ("truncation", "bootstrap"),
    ("reward_clipping", "none"),
    ("observation_normalization", "none"),
    ("throughput_concurrency_cap", "1"),
];

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub environment: EnvKind,
    pub episodes: usize,
    pub timesteps: usize,
    pub agent: AgentConfig,
    /// Used by VDQN and DVDQN; recorded for every run.
    pub variational: VariationalConfig,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, environment: EnvKind, episodes: usize, timesteps: usize) -> Self {
        Self {
            algorithm,
            environment,
            episodes,
            timesteps,
            agent: AgentConfig {
                tau: algorithm.default_tau(),
                learning_rate: algorithm.default_learning_rate(),
                ..Default::default()
            },
            variational: VariationalConfig::for_algorithm(algorithm),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.timesteps == 0 {
            return Err(Error::InvalidInput("episodes and timesteps must be at least 1".into()));
        }
        self.agent.validate()?;
        self.variational.likelihood.validate()
    }

    /// Applies one manifest entry. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.agent;
        let v = &mut self.variational;
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "environment" => self.environment = value.parse()?,
            "episodes" => self.episodes = parse(key, value)?,
            "timesteps" => self.timesteps = parse(key, value)?,
            "learning_rate" => a.learning_rate = parse(key, value)?,
            "gamma" => a.gamma = parse(key, value)?,
            "tau" => a.tau = parse(key, value)?,
            "epsilon_start" => a.epsilon_start = parse(key, value)?,
            "epsilon_end" => a.epsilon_end = parse(key, value)?,
            "epsilon_decay_episodes" => a.epsilon_decay_episodes = parse(key, value)?,
            "target_sync_interval" => a.target_sync_interval = parse(key, value)?,
            "batch_size" => a.batch_size = parse(key, value)?,
            "buffer_capacity" => a.buffer_capacity = parse(key, value)?,
            "warmup" => a.warmup = parse(key, value)?,
            "hidden" => a.hidden = parse(key, value)?,
            "seed" => a.seed = parse(key, value)?,
            "lambda_entropy" => v.likelihood.lambda_entropy = parse(key, value)?,
            "sigma_lik" => v.likelihood.sigma_lik = parse(key, value)?,
            "mc_samples" => v.likelihood.mc_samples = parse(key, value)?,
            "rho_init" => v.rho_init = parse(key, value)?,
            "grad_clip_norm" => v.grad_clip_norm = parse(key, value)?,
            "resample" => v.resample = value.parse()?,
            "decoupled_targets" => v.decoupled_targets = parse(key, value)?,
            "variational_epsilon_greedy" => v.epsilon_greedy = parse(key, value)?,
            "freeze_rho" => v.freeze_rho = parse(key, value)?,
            _ => return Err(Error::Parse(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Configurable entries in manifest order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let a = &self.agent;
        let v = &self.variational;
        vec![
            ("algorithm", self.algorithm.to_string()),
            ("environment", self.environment.to_string()),
            ("episodes", self.episodes.to_string()),
            ("timesteps", self.timesteps.to_string()),
            ("learning_rate", a.learning_rate.to_string()),
            ("gamma", a.gamma.to_string()),
            ("tau", a.tau.to_string()),
            ("lambda_entropy", v.likelihood.lambda_entropy.to_string()),
            ("sigma_lik", v.likelihood.sigma_lik.to_string()),
            ("batch_size", a.batch_size.to_string()),
            ("buffer_capacity", a.buffer_capacity.to_string()),
            ("seed", a.seed.to_string()),
            ("warmup", a.warmup.to_string()),
            ("target_sync_interval", a.target_sync_interval.to_string()),
            ("epsilon_start", a.epsilon_start.to_string()),
            ("epsilon_end", a.epsilon_end.to_string()),
            ("epsilon_decay_episodes", a.epsilon_decay_episodes.to_string()),
            ("hidden", a.hidden.to_string()),
            ("mc_samples", v.likelihood.mc_samples.to_string()),
            ("rho_init", v.rho_init.to_string()),
            ("grad_clip_norm", v.grad_clip_norm.to_string()),
            ("resample", v.resample.name().to_string()),
            ("decoupled_targets", v.decoupled_targets.to_string()),
            ("variational_epsilon_greedy", v.epsilon_greedy.to_string()),
            ("freeze_rho", v.freeze_rho.to_string()),
        ]
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Parse(format!("`{key} = {value}`: {e}")))
}

/// A run configuration plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: RunConfig,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        let started_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            config,
            code_version: CODE_VERSION.to_string(),
            started_at,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.config.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        let env = self.config.environment.spec();
        let _ = writeln!(out, "env_max_steps = {}", env.max_steps);
        let _ = writeln!(out, "vi_window = {DEFAULT_VI_WINDOW}");
        for (k, v) in FIXED_SETTINGS {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "code_version = {}", self.code_version);
        let _ = writeln!(out, "started_at = {}", self.started_at);
        out
    }

    /// Parses manifest text. Every configurable key must be present.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("manifest line {}: expected `key = value`", n + 1)))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("manifest repeats `{}`", k.trim())));
            }
        }
        let mut take = |k: &str| map.remove(k).ok_or_else(|| Error::Parse(format!("manifest lacks `{k}`")));
        let algorithm: Algorithm = take("algorithm")?.parse()?;
        let environment: EnvKind = take("environment")?.parse()?;
        let mut config = RunConfig::new(algorithm, environment, 1, 1);
        for (k, _) in config.entries().into_iter().skip(2) {
            let v = take(k)?;
            config.set(k, &v)?;
        }
        let code_version = take("code_version")?;
        let started_at = parse("started_at", &take("started_at")?)?;
        let env_max: usize = parse("env_max_steps", &take("env_max_steps")?)?;
        if env_max != environment.spec().max_steps {
            return Err(Error::Parse(format!("env_max_steps {env_max} does not match {environment}")));
        }
        let window: usize = parse("vi_window", &take("vi_window")?)?;
        if window != DEFAULT_VI_WINDOW {
            return Err(Error::Parse(format!("vi_window {window} is not supported")));
        }
        for (k, expected) in FIXED_SETTINGS {
            let got = take(k)?;
            if got != expected {
                return Err(Error::Parse(format!("`{k} = {got}` differs from this build (`{expected}`)")));
            }
        }
        if let Some(k) = map.keys().next() {
            return Err(Error::Parse(format!("unknown manifest key `{k}`")));
        }
        config.validate()?;
        Ok(Self {
            config,
            code_version,
            started_at,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
