//! Experiment runner: single runs, batches, throughput reports and curves.

pub mod batch;
pub mod curves;
pub mod manifest;
pub mod report;
pub mod run;

pub use batch::{read_index, run_batch, BatchSpec, IndexRow};
pub use curves::{aggregate, curve_export, Curve, CurveMetric};
pub use manifest::{RunConfig, RunManifest};
pub use report::{throughput_report, ThroughputReport, ThroughputRow};
pub use run::{exit_code, rerun, run_single, RunOutput};
