use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fcifem::experiments::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fcifem", version, about = "Field-aligned B-spline finite element experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Output directory (default: results/<label>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a config entry, e.g. `tokamak.n_r=50`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Seed for randomly placed test points.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Run {
        config,
        out,
        mut overrides,
        threads,
        seed,
    } = Cli::parse().command;
    if let Some(n) = threads {
        fcifem::par::set_threads(n);
    }
    if let Some(s) = seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = match ExperimentConfig::load(&config).and_then(|c| c.with_overrides(&overrides)) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let dir = out.unwrap_or_else(|| PathBuf::from("results").join(cfg.label()));
    match experiments::run(&cfg, Some(&dir)) {
        Ok(res) => {
            let failed = res.checks.iter().filter(|c| !c.pass).count();
            println!(
                "{}: {} checks, {failed} failed; results in {}",
                res.label,
                res.checks.len(),
                dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
