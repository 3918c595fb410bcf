use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use safeq::config::{parse_config, render_config};
use safeq::harness::{compare_baseline, run_episode, sweep_ksb, ExperimentConfig};
use safeq::report::{emit_csv, emit_summary, render_metrics, render_oracle};
use safeq::riccati::solve_care;
use safeq::verify::{run_suite, Fault, VerifyOptions, SWEEP_KSB};

#[derive(Parser)]
#[command(
    name = "safeq",
    version,
    about = "Safe continuous-time Q-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its trajectory.
    Run {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Run one episode per safety gain and write the summary table.
    Sweep {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_KSB.to_vec())]
        ksb: Vec<f64>,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Run the configured controller next to the k_sb = 0 baseline.
    Compare {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Print the Riccati solution and ideal weights.
    Oracle {
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Run the property suite.
    Verify {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Corrupt one input on purpose to confirm the suite catches it.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    /// Perturb the Riccati solution before its residual check.
    Are,
}

fn load(config: Option<&Path>) -> Result<ExperimentConfig> {
    match config {
        Some(path) => {
            parse_config(path).with_context(|| format!("reading config {}", path.display()))
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn prepare(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.txt"), render_config(cfg))?;
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output } => {
            let cfg = load(config.as_deref())?;
            prepare(&output, &cfg)?;
            let ep = run_episode(&cfg)?;
            emit_csv(&ep.log, output.join("trajectory.csv"))?;
            let table = render_metrics(&[("run", &ep.metrics)]);
            std::fs::write(output.join("metrics.csv"), &table)?;
            print!("{table}");
            if let Some(b) = ep.breach {
                println!("left the safe set at t = {} (|x| = {})", b.t, b.norm);
            }
        }
        Command::Sweep {
            config,
            ksb,
            output,
        } => {
            let cfg = load(config.as_deref())?;
            prepare(&output, &cfg)?;
            let rows = sweep_ksb(&cfg, &ksb)?;
            emit_summary(&rows, output.join("summary.csv"))?;
            print!("{}", std::fs::read_to_string(output.join("summary.csv"))?);
        }
        Command::Compare { config, output } => {
            let cfg = load(config.as_deref())?;
            prepare(&output, &cfg)?;
            let (proposed, baseline) = compare_baseline(&cfg)?;
            emit_csv(&proposed.log, output.join("proposed.csv"))?;
            emit_csv(&baseline.log, output.join("baseline.csv"))?;
            let table = render_metrics(&[
                ("proposed", &proposed.metrics),
                ("baseline", &baseline.metrics),
            ]);
            std::fs::write(output.join("compare.csv"), &table)?;
            print!("{table}");
        }
        Command::Oracle { config } => {
            let cfg = load(config.as_deref())?;
            print!("{}", render_oracle(&solve_care(&cfg.sys)?));
        }
        Command::Verify {
            config,
            inject_fault,
        } => {
            let cfg = load(config.as_deref())?;
            let opts = VerifyOptions {
                fault: inject_fault.map(|FaultArg::Are| Fault::PerturbedRiccati),
            };
            let report = run_suite(&cfg, opts)?;
            println!("{report}");
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
