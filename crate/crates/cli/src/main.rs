use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mimo_gcnn_cli::{report, report_from_raw, run_experiment, ExperimentConfig, SummaryRow};

#[derive(Parser)]
#[command(name = "mimo-gcnn", version, about = "Source-localization experiments with structured graph-filter networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a config and write the CSV reports.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(short, long, default_value = "results")]
        out: PathBuf,
        /// Worker threads (default: one per core).
        #[arg(short, long)]
        jobs: Option<usize>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Recompute results_summary.csv from a raw results file.
    Report { raw: PathBuf },
}

fn print_summary(rows: &[SummaryRow]) {
    println!("{:<10} {:>12} {:>6} {:>10} {:>10}", "arch", "sweep", "runs", "mean acc", "var/4");
    for r in rows {
        let sweep = match (&r.sweep_param, r.sweep_value) {
            (Some(p), Some(v)) => format!("{p}={v}"),
            _ => "-".into(),
        };
        println!(
            "{:<10} {:>12} {:>6} {:>10.4} {:>10.6}",
            r.label, sweep, r.realizations, r.mean_accuracy, r.variance_over_4
        );
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            if let Some(n) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("configuring worker pool")?;
            }
            let results = run_experiment(&cfg)?;
            let paths = report(&results, &out)?;
            let summary = mimo_gcnn_cli::read_raw(&paths.raw).and_then(|r| mimo_gcnn_cli::summarize(&r))?;
            print_summary(&summary);
            println!("wrote {}", out.display());
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let cells = cfg.realizations * cfg.architectures.len() * cfg.sweep_points().len();
            println!("{}: ok, {cells} cells", config.display());
        }
        Command::Report { raw } => {
            let out = report_from_raw(&raw)?;
            let rows = mimo_gcnn_cli::read_raw(&raw).and_then(|r| mimo_gcnn_cli::summarize(&r))?;
            print_summary(&rows);
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
