//! Throughput relative to DQN.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::batch::IndexRow;
use crate::algorithm::Algorithm;
use crate::envs::EnvKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub algorithm: Algorithm,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThroughputReport {
    pub rows: Vec<ThroughputRow>,
    pub warnings: Vec<String>,
}

/// Mean and sample standard deviation (0 when fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per algorithm, the mean and sample std of each run's iterations/sec
/// divided by its DQN baseline: the DQN run with the same environment, seed
/// and variant, or failing that the mean of that environment's DQN runs.
/// Environments without a successful DQN run are skipped with a warning.
pub fn throughput_report(index: &[IndexRow]) -> ThroughputReport {
    let usable: Vec<&IndexRow> = index
        .iter()
        .filter(|r| r.ok && r.iterations_per_sec.is_some_and(|x| x > 0.0))
        .collect();
    let mut paired = BTreeMap::new();
    let mut by_env: BTreeMap<EnvKind, Vec<f64>> = BTreeMap::new();
    for r in usable.iter().filter(|r| r.algorithm == Algorithm::Dqn) {
        let ips = r.iterations_per_sec.unwrap_or_default();
        paired.insert((r.environment, r.seed, r.variant), ips);
        by_env.entry(r.environment).or_default().push(ips);
    }
    let mut report = ThroughputReport::default();
    let mut ratios: BTreeMap<Algorithm, Vec<f64>> = BTreeMap::new();
    for r in &usable {
        let baseline = paired
            .get(&(r.environment, r.seed, r.variant))
            .copied()
            .or_else(|| by_env.get(&r.environment).map(|v| mean_std(v).0));
        match baseline {
            Some(b) => ratios.entry(r.algorithm).or_default().push(r.iterations_per_sec.unwrap_or_default() / b),
            None => {
                let w = format!("no DQN baseline for {}; excluded", r.environment);
                if !report.warnings.contains(&w) {
                    report.warnings.push(w);
                }
            }
        }
    }
    for alg in Algorithm::ALL {
        if let Some(xs) = ratios.get(&alg) {
            let (mean, std) = mean_std(xs);
            report.rows.push(ThroughputRow {
                algorithm: alg,
                mean,
                std,
                runs: xs.len(),
            });
        }
    }
    report
}

impl ThroughputReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,relative_iterations_per_sec,std,runs\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.3},{:.3},{}", r.algorithm, r.mean, r.std, r.runs);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("algorithm  relative it/s\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:<9}  {:.3} ± {:.3}  (n={})", r.algorithm.name(), r.mean, r.std, r.runs);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
