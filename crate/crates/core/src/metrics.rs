//! Per-episode metrics rows and their CSV encoding.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "episode,total_reward,bellman_error,vi_loss,epsilon,steps,iterations_per_sec,wall_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub total_reward: f64,
    /// Mean squared Bellman residual over the episode's training steps.
    pub bellman_error: f64,
    pub vi_loss: Option<f64>,
    pub epsilon: Option<f64>,
    pub steps: usize,
    pub iterations_per_sec: f64,
    pub wall_ms: u64,
    /// Mean `rho` of the active posterior at episode end (variational agents).
    pub posterior_rho_mean: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EpisodeMetrics {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3},{}",
            self.episode,
            self.total_reward,
            self.bellman_error,
            opt(self.vi_loss),
            opt(self.epsilon),
            self.steps,
            self.iterations_per_sec,
            self.wall_ms
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!("expected 8 metrics columns, got {}: {line}", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        };
        let int = |s: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        };
        let optional = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        Ok(Self {
            episode: int(f[0])? as usize,
            total_reward: num(f[1])?,
            bellman_error: num(f[2])?,
            vi_loss: optional(f[3])?,
            epsilon: optional(f[4])?,
            steps: int(f[5])? as usize,
            iterations_per_sec: num(f[6])?,
            wall_ms: int(f[7])?,
            posterior_rho_mean: None,
        })
    }
}

/// Receives metrics rows as episodes complete.
pub trait MetricsSink {
    fn record(&mut self, row: &EpisodeMetrics) -> Result<()>;
}

impl MetricsSink for Vec<EpisodeMetrics> {
    fn record(&mut self, row: &EpisodeMetrics) -> Result<()> {
        self.push(row.clone());
        Ok(())
    }
}

impl MetricsSink for std::sync::mpsc::Sender<EpisodeMetrics> {
    fn record(&mut self, row: &EpisodeMetrics) -> Result<()> {
        self.send(row.clone())
            .map_err(|_| Error::Io("metrics receiver hung up".into()))
    }
}

/// Discards rows.
pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _: &EpisodeMetrics) -> Result<()> {
        Ok(())
    }
}

/// Writes rows to a CSV file, flushing after every episode.
pub struct CsvMetricsWriter {
    out: BufWriter<File>,
}

impl CsvMetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }
}

impl MetricsSink for CsvMetricsWriter {
    fn record(&mut self, row: &EpisodeMetrics) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv_row())?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(METRICS_HEADER) {
        return Err(Error::Parse(format!("{}: missing metrics header", path.display())));
    }
    lines
        .filter_map(|l| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some(other),
        })
        .map(|l| EpisodeMetrics::from_csv_row(&l?))
        .collect()
}

/// Metrics text with the wall-clock columns blanked, for reproducibility
/// comparisons.
pub fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let mut f: Vec<&str> = line.split(',').collect();
            if f.len() == 8 && line != METRICS_HEADER {
                f[6] = "";
                f[7] = "";
            }
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
