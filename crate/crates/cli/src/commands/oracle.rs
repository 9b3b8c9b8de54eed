//! `oracle`: exact enumeration of a desk-scale instance, as JSON.

use serde::Serialize;

use vmpforge_core::oracle::{enumerate_discrete, ExactResult};

use crate::error::CliError;
use crate::opts::RunConfig;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OracleOutput {
    schema_version: u32,
    log_evidence: f64,
    marginals: std::collections::BTreeMap<String, Vec<Vec<f64>>>,
    posterior_params: std::collections::BTreeMap<String, Vec<Vec<f64>>>,
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let (_, net) = config.ground()?;
    let ExactResult {
        log_evidence,
        marginals,
        posterior_params,
    } = enumerate_discrete(&net).map_err(CliError::domain)?;
    let output = OracleOutput {
        schema_version: 1,
        log_evidence,
        marginals,
        posterior_params,
    };
    let json = serde_json::to_string_pretty(&output).map_err(CliError::io)?;
    match &config.output {
        Some(path) => std::fs::write(path, json).map_err(CliError::io)?,
        None => println!("{json}"),
    }
    Ok(())
}
