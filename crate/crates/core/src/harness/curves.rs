//! Cross-seed learning curves for plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::batch::{read_index, run_dir, INDEX_FILE};
use super::report::mean_std;
use super::run::METRICS_FILE;
use crate::error::{Error, Result};
use crate::metrics::{read_metrics, EpisodeMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CurveMetric {
    TotalReward,
    BellmanError,
    ViLoss,
}

impl CurveMetric {
    pub const ALL: [CurveMetric; 3] = [CurveMetric::TotalReward, CurveMetric::BellmanError, CurveMetric::ViLoss];

    pub fn name(self) -> &'static str {
        match self {
            CurveMetric::TotalReward => "total_reward",
            CurveMetric::BellmanError => "bellman_error",
            CurveMetric::ViLoss => "vi_loss",
        }
    }

    pub fn extract(self, rows: &[EpisodeMetrics]) -> Option<Vec<f64>> {
        rows.iter()
            .map(|r| match self {
                CurveMetric::TotalReward => Some(r.total_reward),
                CurveMetric::BellmanError => Some(r.bellman_error),
                CurveMetric::ViLoss => r.vi_loss,
            })
            .collect()
    }
}

/// Cross-seed statistics per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub mean: Vec<f64>,
    /// Sample standard deviation across seeds; 0 with one seed.
    pub std: Vec<f64>,
    pub seeds: usize,
    pub warnings: Vec<String>,
}

/// Trailing moving average: entry `t` averages `xs[t+1-window ..= t]`
/// (fewer at the start).
pub fn smooth(xs: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for (t, x) in xs.iter().enumerate() {
        sum += x;
        if t >= window {
            sum -= xs[t - window];
        }
        out.push(sum / (t + 1).min(window) as f64);
    }
    out
}

/// Smooths every seed's series, truncates to the shortest, and takes the
/// per-episode mean and sample std across seeds.
pub fn aggregate(series: &[Vec<f64>], window: usize) -> Result<Curve> {
    if window == 0 {
        return Err(Error::InvalidInput("smoothing window must be at least 1".into()));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData { needed: 1, available: 0 });
    }
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    let mut warnings = Vec::new();
    if series.iter().any(|s| s.len() != len) {
        warnings.push(format!("episode counts differ across seeds; truncated to {len}"));
    }
    let smoothed: Vec<Vec<f64>> = series.iter().map(|s| smooth(&s[..len], window)).collect();
    let (mut mean, mut std) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for t in 0..len {
        let column: Vec<f64> = smoothed.iter().map(|s| s[t]).collect();
        let (m, s) = mean_std(&column);
        mean.push(m);
        std.push(s);
    }
    Ok(Curve {
        mean,
        std,
        seeds: series.len(),
        warnings,
    })
}

impl Curve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,mean,std,lower,upper,seeds\n");
        for (t, (m, s)) in self.mean.iter().zip(&self.std).enumerate() {
            let _ = writeln!(out, "{t},{m},{s},{},{},{}", m - s, m + s, self.seeds);
        }
        out
    }
}

/// Writes one curve file per (algorithm, environment, variant, metric) for
/// the successful runs of a batch directory. Returns the files written and
/// any warnings.
pub fn curve_export(batch_dir: &Path, window: usize, out: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let index = read_index(&batch_dir.join(INDEX_FILE))?;
    let mut groups: BTreeMap<String, Vec<Vec<EpisodeMetrics>>> = BTreeMap::new();
    for r in index.iter().filter(|r| r.ok) {
        let rows = read_metrics(&run_dir(batch_dir, &r.run_id).join(METRICS_FILE))?;
        let key = format!("{}_{}_v{}", r.algorithm.name().to_lowercase(), r.environment.name().to_lowercase(), r.variant);
        groups.entry(key).or_default().push(rows);
    }
    fs::create_dir_all(out)?;
    let (mut files, mut warnings) = (Vec::new(), Vec::new());
    for (key, runs) in &groups {
        for metric in CurveMetric::ALL {
            let series: Option<Vec<Vec<f64>>> = runs.iter().map(|rows| metric.extract(rows)).collect();
            let Some(series) = series else { continue };
            let curve = aggregate(&series, window)?;
            warnings.extend(curve.warnings.iter().map(|w| format!("{key}: {w}")));
            let path = out.join(format!("{key}_{}.csv", metric.name()));
            fs::write(&path, curve.to_csv())?;
            files.push(path);
        }
    }
    Ok((files, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_seed_has_zero_band() {
        let c = aggregate(&[vec![3.0, 1.0, 4.0, 1.0, 5.0]], 2).unwrap();
        assert!(c.std.iter().all(|s| *s == 0.0));
        assert_eq!(c.mean, vec![3.0, 2.0, 2.5, 2.5, 3.0]);
    }

    #[test]
    fn two_constant_seeds() {
        let c = aggregate(&[vec![0.0; 6], vec![2.0; 6]], 3).unwrap();
        assert!(c.mean.iter().all(|m| *m == 1.0));
        assert!(c.std.iter().all(|s| *s == 2f64.sqrt()));
    }

    #[test]
    fn unit_window_is_identity() {
        let a = vec![1.0, -2.0, 7.5];
        let b = vec![3.0, 0.0, 0.5];
        let c = aggregate(&[a.clone(), b.clone()], 1).unwrap();
        let expected: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        assert_eq!(c.mean, expected);
    }

    #[test]
    fn mismatched_lengths_truncate_with_warning() {
        let c = aggregate(&[vec![1.0; 5], vec![1.0; 3]], 2).unwrap();
        assert_eq!(c.mean.len(), 3);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn bad_arguments() {
        assert!(aggregate(&[vec![1.0]], 0).is_err());
        assert!(aggregate(&[], 1).is_err());
    }

    #[test]
    fn smoothing_matches_direct_window_means() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64).collect();
        for w in [1, 3, 20, 50] {
            let s = smooth(&xs, w);
            for t in 0..xs.len() {
                let lo = (t + 1).saturating_sub(w);
                let direct = xs[lo..=t].iter().sum::<f64>() / (t + 1 - lo) as f64;
                assert!((s[t] - direct).abs() < 1e-12);
            }
        }
    }
}
