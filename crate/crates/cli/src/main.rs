//! vmpforge: compile plate-notation model definitions into message
//! passing graphs and run variational message passing over them.
//!
//! Exit codes: 0 on success, 1 on model/domain errors, 2 on I/O or usage
//! errors.

mod commands;
mod data;
mod error;
mod opts;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(
    name = "vmpforge",
    version,
    about = "Variational message passing over plate-notation Bayesian networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type-check a model definition.
    Check {
        /// Path to a .ispk model file.
        model: std::path::PathBuf,
    },
    /// Bind data and print the vertex layout and edge counts.
    Graph {
        #[command(flatten)]
        config: opts::RunConfig,
        /// Emit a DOT rendering of the plate tree instead of the summary.
        #[arg(long)]
        dot: bool,
    },
    /// Run inference and write the posterior set as JSON.
    Infer {
        #[command(flatten)]
        config: opts::RunConfig,
        /// Stop when the relative ELBO improvement drops below this value.
        #[arg(long, value_name = "REL")]
        stop_rel_elbo: Option<f64>,
        /// Append iteration,elbo lines to this CSV file.
        #[arg(long, value_name = "FILE")]
        emit_elbo_csv: Option<std::path::PathBuf>,
        /// Resume from a posterior-state snapshot.
        #[arg(long, value_name = "FILE")]
        resume: Option<std::path::PathBuf>,
    },
    /// Replication statistics of the partition strategies, as CSV.
    #[command(name = "partition-stats")]
    PartitionStats {
        #[command(flatten)]
        config: opts::RunConfig,
        /// Synthetic mixture graph `N,D,K` instead of a model file.
        #[arg(long, value_name = "N,D,K", conflicts_with = "model")]
        mixture: Option<String>,
        /// Seeds to sweep per strategy.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Count replicas at both edge ends instead of destinations only.
        #[arg(long)]
        both_ends: bool,
    },
    /// Exact enumeration oracle; writes log evidence and marginals as JSON.
    Oracle {
        #[command(flatten)]
        config: opts::RunConfig,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { model } => commands::check::run(&model),
        Command::Graph { config, dot } => commands::graph::run(&config, dot),
        Command::Infer {
            config,
            stop_rel_elbo,
            emit_elbo_csv,
            resume,
        } => commands::infer::run(&config, stop_rel_elbo, emit_elbo_csv.as_deref(), resume.as_deref()),
        Command::PartitionStats {
            config,
            mixture,
            seeds,
            both_ends,
        } => commands::stats::run(&config, mixture.as_deref(), seeds, both_ends),
        Command::Oracle { config } => commands::oracle::run(&config),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
