//! Cross-product experiment batches and their summary index.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;

use super::manifest::{RunConfig, RunManifest};
use super::run::{run_single, METRICS_FILE};
use crate::algorithm::Algorithm;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::metrics::{read_metrics, EpisodeMetrics};

pub const INDEX_FILE: &str = "index.csv";
pub const INDEX_HEADER: &str =
    "run_id,algorithm,environment,seed,variant,status,episodes_completed,final_mean_reward,iterations_per_sec,error";
/// Episodes averaged for `final_mean_reward`.
pub const FINAL_WINDOW: usize = 20;

fn default_episodes() -> usize {
    300
}

fn default_timesteps() -> usize {
    1000
}

fn default_concurrency() -> usize {
    1
}

/// A batch file: every combination of algorithm, environment, seed and
/// override table becomes one run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_timesteps")]
    pub timesteps: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Forces one run at a time so iterations/sec are comparable.
    #[serde(default)]
    pub throughput_mode: bool,
    #[serde(default)]
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub environments: Vec<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Manifest settings applied on top of the defaults. An empty list means
    /// a single variant with no overrides.
    #[serde(default)]
    pub overrides: Vec<toml::Table>,
}

impl BatchSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("batch spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// The runs this spec expands to, in index order.
    pub fn expand(&self) -> Result<Vec<PlannedRun>> {
        let algorithms = self
            .algorithms
            .iter()
            .map(|a| a.parse::<Algorithm>())
            .collect::<Result<Vec<_>>>()?;
        let environments = self
            .environments
            .iter()
            .map(|e| e.parse::<EnvKind>())
            .collect::<Result<Vec<_>>>()?;
        let no_override = [toml::Table::new()];
        let variants: &[toml::Table] = if self.overrides.is_empty() {
            &no_override
        } else {
            &self.overrides
        };
        let mut runs = Vec::new();
        for &alg in &algorithms {
            for &env in &environments {
                for &seed in &self.seeds {
                    for (variant, table) in variants.iter().enumerate() {
                        let mut config = RunConfig::new(alg, env, self.episodes, self.timesteps);
                        config.agent.seed = seed;
                        for (key, value) in table {
                            let text = match value {
                                toml::Value::String(s) => s.clone(),
                                other => other.to_string(),
                            };
                            config.set(key, &text)?;
                        }
                        runs.push(PlannedRun {
                            run_id: format!("{}_{}_s{seed}_v{variant}", alg.name().to_lowercase(), env.name().to_lowercase()),
                            variant,
                            config,
                        });
                    }
                }
            }
        }
        Ok(runs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub run_id: String,
    pub variant: usize,
    pub config: RunConfig,
}

/// One line of the summary index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub environment: EnvKind,
    pub seed: u64,
    pub variant: usize,
    pub ok: bool,
    pub episodes_completed: usize,
    pub final_mean_reward: Option<f64>,
    pub iterations_per_sec: Option<f64>,
    pub error: String,
}

impl IndexRow {
    fn new(plan: &PlannedRun, rows: &[EpisodeMetrics], error: Option<Error>) -> Self {
        let tail = &rows[rows.len().saturating_sub(FINAL_WINDOW)..];
        let steps: usize = rows.iter().map(|r| r.steps).sum();
        let secs: f64 = rows
            .iter()
            .filter(|r| r.iterations_per_sec > 0.0)
            .map(|r| r.steps as f64 / r.iterations_per_sec)
            .sum();
        Self {
            run_id: plan.run_id.clone(),
            algorithm: plan.config.algorithm,
            environment: plan.config.environment,
            seed: plan.config.agent.seed,
            variant: plan.variant,
            ok: error.is_none(),
            episodes_completed: rows.len(),
            final_mean_reward: (!tail.is_empty())
                .then(|| tail.iter().map(|r| r.total_reward).sum::<f64>() / tail.len() as f64),
            iterations_per_sec: (secs > 0.0).then(|| steps as f64 / secs),
            error: error.map(|e| e.to_string()).unwrap_or_default(),
        }
    }

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.algorithm,
            self.environment,
            self.seed,
            self.variant,
            if self.ok { "ok" } else { "failed" },
            self.episodes_completed,
            opt(self.final_mean_reward),
            opt(self.iterations_per_sec),
            self.error.replace([',', '\n', '\r'], " ")
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.splitn(10, ',').collect();
        if f.len() != 10 {
            return Err(Error::Parse(format!("expected 10 index columns: {line}")));
        }
        let bad = |what: &str| Error::Parse(format!("index `{what}`: {line}"));
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(s))
            }
        };
        Ok(Self {
            run_id: f[0].to_string(),
            algorithm: f[1].parse()?,
            environment: f[2].parse()?,
            seed: f[3].parse().map_err(|_| bad("seed"))?,
            variant: f[4].parse().map_err(|_| bad("variant"))?,
            ok: match f[5] {
                "ok" => true,
                "failed" => false,
                _ => return Err(bad("status")),
            },
            episodes_completed: f[6].parse().map_err(|_| bad("episodes_completed"))?,
            final_mean_reward: opt(f[7])?,
            iterations_per_sec: opt(f[8])?,
            error: f[9].to_string(),
        })
    }
}

pub fn write_index(path: &Path, rows: &[IndexRow]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{INDEX_HEADER}")?;
    for r in rows {
        writeln!(f, "{}", r.to_csv_row())?;
    }
    Ok(())
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(INDEX_HEADER) {
        return Err(Error::Parse(format!("{}: missing index header", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(IndexRow::from_csv_row)
        .collect()
}

/// Directory holding the files of one run of a batch.
pub fn run_dir(out: &Path, run_id: &str) -> PathBuf {
    out.join("runs").join(run_id)
}

/// Executes every run of `spec` under `out` and writes `out/index.csv`.
///
/// Failed runs are recorded in the index and do not stop the batch. With
/// `throughput_mode` (or `concurrency = 1`) runs execute one at a time.
pub fn run_batch(spec: &BatchSpec, out: &Path) -> Result<Vec<IndexRow>> {
    let plans = spec.expand()?;
    fs::create_dir_all(out)?;
    let workers = if spec.throughput_mode { 1 } else { spec.concurrency.max(1) }.min(plans.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<IndexRow>>> = Mutex::new(vec![None; plans.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(plan) = plans.get(i) else { break };
                let dir = run_dir(out, &plan.run_id);
                let row = match run_single(&RunManifest::new(plan.config.clone()), &dir) {
                    Ok(o) => IndexRow::new(plan, &o.rows, None),
                    Err(e) => {
                        let partial = read_metrics(&dir.join(METRICS_FILE)).unwrap_or_default();
                        IndexRow::new(plan, &partial, Some(e))
                    }
                };
                results.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(row);
            });
        }
    });
    let rows: Vec<IndexRow> = results
        .into_inner()
        .unwrap_or_else(|p| p.into_inner())
        .into_iter()
        .flatten()
        .collect();
    write_index(&out.join(INDEX_FILE), &rows)?;
    Ok(rows)
}
