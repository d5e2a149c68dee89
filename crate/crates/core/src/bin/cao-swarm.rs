use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cao_swarm::harness::config::{Mode, ScenarioConfig};
use cao_swarm::harness::output::{write_artifacts, NumericTable};
use cao_swarm::harness::study::{parse_seeds, run_study, study_csv, Sweep};
use cao_swarm::harness::{plot, run_scenario};
use cao_swarm::Error;

/// Distributed multi-robot optimization: seeded runs, multi-seed studies and plots.
///
/// Log verbosity follows RUST_LOG (error, warn, info, debug).
#[derive(Parser)]
#[command(name = "cao-swarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's mode (distributed or centralized).
        #[arg(long)]
        mode: Option<Mode>,
        /// Output directory.
        #[arg(long, default_value = "run-output")]
        out: PathBuf,
    },
    /// Run a scenario over several seeds and a grid of overrides.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Seed range, `A..B` (half-open) or `A..=B`.
        #[arg(long)]
        seeds: String,
        /// `key=v1,v2`; repeat for a grid. Keys are dotted paths such as `optimizer.M`.
        #[arg(long)]
        sweep: Vec<Sweep>,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render cost.svg and trajectories.svg from a metrics file.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        /// Output directory; defaults to the metrics file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invariant_breach() { 3 } else { 2 })
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, seed, mode, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            let artifacts = run_scenario(&cfg)?;
            write_artifacts(&artifacts, &out)?;
            let s = &artifacts.summary;
            println!(
                "{} {} N={} seed={}: initial {} final {} sum {} ({:.2}s) -> {}",
                s.testbed,
                s.mode,
                s.robots,
                s.seed,
                s.initial_cost,
                s.final_cost,
                s.sum_cost,
                s.wall_seconds,
                out.display()
            );
            Ok(())
        }
        Command::Study { config, seeds, sweep, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let template: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
            let rows = run_study(&template, &parse_seeds(&seeds)?, &sweep)?;
            let table = study_csv(&rows)?;
            print!("{table}");
            if let Some(out) = out {
                std::fs::write(out, table)?;
            }
            Ok(())
        }
        Command::Plot { metrics, out } => {
            let table = NumericTable::load(&metrics)?;
            let dir = out.unwrap_or_else(|| metrics.parent().map(PathBuf::from).unwrap_or_default());
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("cost.svg"), plot::cost_svg(&table)?)?;
            match plot::trajectory_svg(&table) {
                Ok(svg) => std::fs::write(dir.join("trajectories.svg"), svg)?,
                Err(e) => log::warn!("no trajectory plot: {e}"),
            }
            println!("plots written to {}", dir.display());
            Ok(())
        }
    }
}
