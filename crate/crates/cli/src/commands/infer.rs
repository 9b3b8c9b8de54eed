//! `infer`: run VMP and write the posterior set as versioned JSON.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use vmpforge_core::engine::{relative_elbo_stop, InferOptions, VmpEngine};
use vmpforge_core::mpg::{build_graph, partition};

use crate::error::CliError;
use crate::opts::RunConfig;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct InferOutput {
    schema_version: u32,
    model: String,
    seed: u64,
    iterations: u64,
    elbo_trace: Vec<(u64, f64)>,
    posteriors: std::collections::BTreeMap<String, Vec<Vec<f64>>>,
}

pub fn run(
    config: &RunConfig,
    stop_rel_elbo: Option<f64>,
    emit_elbo_csv: Option<&Path>,
    resume: Option<&Path>,
) -> Result<(), CliError> {
    let (model_name, net) = config.ground()?;
    let graph = Arc::new(build_graph(Arc::new(net)));
    let assignment = partition(&graph, config.strategy, config.partitions, config.seed)
        .map_err(CliError::domain)?;
    let options = InferOptions {
        workers: config.workers(),
        zero_noise: config.zero_noise,
        snapshot_every: config.snapshot_every,
        snapshot_path: config.snapshot_path.clone(),
    };
    let mut engine = VmpEngine::new(graph, assignment, config.seed, options)
        .map_err(|e| CliError::Domain(format!("initialization failed: {e}")))?;
    if let Some(path) = resume {
        engine.load_snapshot(path).map_err(CliError::domain)?;
    }

    let posteriors = match stop_rel_elbo {
        Some(threshold) => engine.infer(config.iterations, relative_elbo_stop(threshold)),
        None => engine.infer(config.iterations, |_, _| true),
    }
    .map_err(|e| CliError::Domain(format!("inference aborted: {e}")))?;

    if let Some(path) = emit_elbo_csv {
        let mut csv = String::from("iteration,elbo\n");
        for (it, elbo) in &posteriors.elbo_trace {
            csv.push_str(&format!("{it},{elbo}\n"));
        }
        std::fs::write(path, csv).map_err(CliError::io)?;
    }

    let output = InferOutput {
        schema_version: OUTPUT_SCHEMA_VERSION,
        model: model_name,
        seed: config.seed,
        iterations: posteriors.iterations_run,
        elbo_trace: posteriors.elbo_trace.clone(),
        posteriors: posteriors.per_variable.clone(),
    };
    let json = serde_json::to_string_pretty(&output).map_err(CliError::io)?;
    match &config.output {
        Some(path) => {
            std::fs::write(path, json).map_err(CliError::io)?;
            println!("final ELBO: {}", posteriors.final_elbo());
        }
        None => {
            println!("{json}");
            eprintln!("final ELBO: {}", posteriors.final_elbo());
        }
    }
    Ok(())
}
