use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vdqn_core::harness::run::{exit_code, EXIT_OK, EXIT_USAGE};
use vdqn_core::harness::{self, BatchSpec, RunConfig, RunManifest};
use vdqn_core::{Algorithm, EnvKind, Error};

/// Train DQN, DDQN, VDQN and DVDQN agents on classic-control tasks.
#[derive(Debug, Parser)]
#[command(name = "vdqn", version, args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every experiment listed in a TOML batch spec.
    Batch {
        spec: PathBuf,
        #[arg(long, default_value = "batch")]
        out: PathBuf,
    },
    /// Relative iterations/sec against DQN from a batch index.
    Report {
        index: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Smoothed cross-seed curves from a batch directory.
    Curves {
        batch_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value = "curves")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// DQN, DDQN, VDQN or DVDQN.
    #[arg(long, required_unless_present = "manifest")]
    algorithm: Option<Algorithm>,
    /// CartPole-v0, CartPole-v1, MountainCar-v0 or Acrobot-v1.
    #[arg(long, required_unless_present = "manifest")]
    environment: Option<EnvKind>,
    #[arg(long, default_value_t = 300)]
    episodes: usize,
    /// Per-episode step limit.
    #[arg(long, default_value_t = 1000)]
    timesteps: usize,
    /// Adam learning rate.
    #[arg(long)]
    lossrate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Entropy weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Likelihood standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Replay capacity.
    #[arg(long)]
    buffer: Option<usize>,
    #[arg(long)]
    sync_interval: Option<usize>,
    /// Run directory (default runs/<algorithm>_<environment>_s<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long, conflicts_with_all = ["algorithm", "environment"])]
    manifest: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        if let Some(path) = &self.manifest {
            return Ok(RunManifest::load(path)?.config);
        }
        let (Some(alg), Some(env)) = (self.algorithm, self.environment) else {
            return Err(Error::InvalidInput("--algorithm and --environment are required".into()));
        };
        let mut cfg = RunConfig::new(alg, env, self.episodes, self.timesteps);
        let a = &mut cfg.agent;
        let v = &mut cfg.variational.likelihood;
        if let Some(x) = self.lossrate {
            a.learning_rate = x;
        }
        if let Some(x) = self.seed {
            a.seed = x;
        }
        if let Some(x) = self.gamma {
            a.gamma = x;
        }
        if let Some(x) = self.tau {
            a.tau = x;
        }
        if let Some(x) = self.batch_size {
            a.batch_size = x;
        }
        if let Some(x) = self.buffer {
            a.buffer_capacity = x;
        }
        if let Some(x) = self.sync_interval {
            a.target_sync_interval = x;
        }
        if let Some(x) = self.lambda {
            v.lambda_entropy = x;
        }
        if let Some(x) = self.sigma {
            v.sigma_lik = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        None => {
            let cfg = cli.run.config()?;
            let dir = cli.run.out.clone().unwrap_or_else(|| {
                PathBuf::from("runs").join(format!(
                    "{}_{}_s{}",
                    cfg.algorithm.name().to_lowercase(),
                    cfg.environment.name().to_lowercase(),
                    cfg.agent.seed
                ))
            });
            let out = harness::run_single(&RunManifest::new(cfg), &dir)?;
            let tail = &out.rows[out.rows.len().saturating_sub(20)..];
            let mean = tail.iter().map(|r| r.total_reward).sum::<f64>() / tail.len().max(1) as f64;
            println!("{} episodes, final mean reward {mean:.1}, written to {}", out.rows.len(), dir.display());
        }
        Some(Command::Batch { spec, out }) => {
            let rows = harness::run_batch(&BatchSpec::load(&spec)?, &out)?;
            let failed = rows.iter().filter(|r| !r.ok).count();
            println!("{} runs ({failed} failed), index at {}", rows.len(), out.join(harness::batch::INDEX_FILE).display());
        }
        Some(Command::Report { index, csv }) => {
            let report = harness::throughput_report(&harness::read_index(&index)?);
            print!("{}", report.to_table());
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv())?;
            }
        }
        Some(Command::Curves { batch_dir, window, out }) => {
            let (files, warnings) = harness::curve_export(&batch_dir, window, &out)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            println!("{} curve files in {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
