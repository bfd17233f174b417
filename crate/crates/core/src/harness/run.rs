//! One training run written to disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::manifest::{RunConfig, RunManifest};
use crate::error::{Error, Result};
use crate::metrics::{CsvMetricsWriter, EpisodeMetrics, MetricsSink};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_FILE: &str = "metrics.csv";
/// Per-episode mean `rho` of variational runs.
pub const POSTERIOR_FILE: &str = "posterior.csv";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_CONTRACT: u8 = 4;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Parse(_) => EXIT_USAGE,
        Error::NumericOverflow(_) => EXIT_NUMERIC,
        Error::ContractViolation(_) => EXIT_CONTRACT,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub rows: Vec<EpisodeMetrics>,
}

impl RunOutput {
    pub fn metrics_path(&self) -> PathBuf {
        self.dir.join(METRICS_FILE)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }
}

struct RunSink {
    metrics: CsvMetricsWriter,
    posterior: Option<BufWriter<File>>,
}

impl MetricsSink for RunSink {
    fn record(&mut self, row: &EpisodeMetrics) -> Result<()> {
        self.metrics.record(row)?;
        if let (Some(out), Some(rho)) = (self.posterior.as_mut(), row.posterior_rho_mean) {
            writeln!(out, "{},{rho}", row.episode)?;
            out.flush()?;
        }
        Ok(())
    }
}

/// Trains `manifest.config` and writes the manifest, the metrics file and,
/// for variational runs, the posterior file into `dir`.
///
/// Metrics are flushed after every episode, so a failed run leaves every
/// completed episode on disk.
pub fn run_single(manifest: &RunManifest, dir: &Path) -> Result<RunOutput> {
    let cfg = &manifest.config;
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    manifest.save(&dir.join(MANIFEST_FILE))?;
    let mut sink = RunSink {
        metrics: CsvMetricsWriter::create(&dir.join(METRICS_FILE))?,
        posterior: if cfg.algorithm.is_variational() {
            let mut f = BufWriter::new(File::create(dir.join(POSTERIOR_FILE))?);
            writeln!(f, "episode,rho_mean")?;
            Some(f)
        } else {
            None
        },
    };
    let rows = train(cfg, &mut sink)?;
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        rows,
    })
}

/// Trains `cfg` without touching the filesystem.
pub fn train(cfg: &RunConfig, sink: &mut dyn MetricsSink) -> Result<Vec<EpisodeMetrics>> {
    cfg.validate()?;
    let mut env = cfg.environment.make();
    if cfg.algorithm.is_variational() {
        crate::vagents::train(
            env.as_mut(),
            cfg.algorithm,
            &cfg.agent,
            &cfg.variational,
            cfg.episodes,
            cfg.timesteps,
            sink,
        )
    } else {
        crate::qlearn::train(env.as_mut(), cfg.algorithm, &cfg.agent, cfg.episodes, cfg.timesteps, sink)
    }
}

/// Re-runs the configuration recorded in `manifest_path` into `dir`.
pub fn rerun(manifest_path: &Path, dir: &Path) -> Result<RunOutput> {
    let old = RunManifest::load(manifest_path)?;
    run_single(&RunManifest::new(old.config), dir)
}
