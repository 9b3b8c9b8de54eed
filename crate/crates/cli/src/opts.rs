//! Shared run configuration flags and the model-loading pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use vmpforge_core::bn::GroundNetwork;
use vmpforge_core::dsl::{check_types, parse_model, TypedModel};
use vmpforge_core::mpg::PartitionStrategy;

use crate::data;
use crate::error::CliError;

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Path to a .ispk model file.
    pub model: Option<PathBuf>,

    /// Observation file: .txt (newline-delimited integers) or .json
    /// (nested arrays).
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,

    /// Variable receiving the observations (default: the model's last
    /// binding).
    #[arg(long, value_name = "NAME")]
    pub observe: Option<String>,

    /// Model parameter values, e.g. -P alpha=1.0 (repeatable).
    #[arg(short = 'P', long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,

    /// Explicit size for a `?` plate, keyed by a variable inside it or by
    /// the plate's own binding, e.g. --plate z=10 (repeatable).
    #[arg(long = "plate", value_name = "NAME=VALUE")]
    pub plate_sizes: Vec<String>,

    /// Full VMP iterations to run.
    #[arg(long, short = 'n', default_value_t = 10)]
    pub iterations: u64,

    /// Seed for initialization noise and hash partitioning.
    #[arg(long, env = "VMPFORGE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Number of logical partitions.
    #[arg(long, short = 'M', default_value_t = 1)]
    pub partitions: u32,

    /// Partition strategy: EdgePartition1D, EdgePartition2D,
    /// RandomVertexCut, CanonicalRandomVertexCut or InferSparkRange.
    #[arg(long, default_value = "InferSparkRange")]
    pub strategy: PartitionStrategy,

    /// Write a state snapshot every K iterations.
    #[arg(long, value_name = "K")]
    pub snapshot_every: Option<u64>,

    /// Snapshot file path (with --snapshot-every).
    #[arg(long, value_name = "FILE")]
    pub snapshot_path: Option<PathBuf>,

    /// Output file (default: stdout).
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// Worker threads for partition folding (default: available cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,

    /// Start categorical responsibilities exactly uniform, without
    /// initialization noise.
    #[arg(long)]
    pub zero_noise: bool,
}

impl RunConfig {
    pub fn parsed_params(&self) -> Result<BTreeMap<String, f64>, CliError> {
        parse_pairs(&self.params, |v| {
            v.parse::<f64>().map_err(|e| format!("{e}"))
        })
    }

    pub fn parsed_plate_sizes(&self) -> Result<BTreeMap<String, u64>, CliError> {
        parse_pairs(&self.plate_sizes, |v| {
            v.parse::<u64>().map_err(|e| format!("{e}"))
        })
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }

    pub fn load_model(&self) -> Result<TypedModel, CliError> {
        let path = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Io("a model file is required".into()))?;
        load_model_at(path)
    }

    /// Full front half of the pipeline: parse, check, bind, lay out IDs.
    /// Returns the model name alongside the ground network.
    pub fn ground(&self) -> Result<(String, GroundNetwork), CliError> {
        let model = self.load_model()?;
        let params = self.parsed_params()?;
        let plates = self.parsed_plate_sizes()?;
        let mut observations = BTreeMap::new();
        if let Some(data_path) = &self.data {
            let obs = data::load_observations(data_path)?;
            let target = match &self.observe {
                Some(name) => name.clone(),
                None => model
                    .ast
                    .stmts
                    .last()
                    .map(|s| s.name.clone())
                    .ok_or_else(|| CliError::Domain("the model has no bindings".into()))?,
            };
            observations.insert(target, obs);
        }
        let net = model
            .bind(&params, &observations, &plates)
            .map_err(CliError::domain)?;
        Ok((model.ast.name.clone(), net.assign_vertex_ids()))
    }
}

pub fn load_model_at(path: &std::path::Path) -> Result<TypedModel, CliError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let ast = parse_model(&source).map_err(|e| {
        CliError::Domain(format!("{}:{}: ParseError: {}", path.display(), e.loc, e.message))
    })?;
    check_types(&ast).map_err(|errs| {
        let lines: Vec<String> = errs
            .iter()
            .map(|e| {
                format!(
                    "{}:{}: {}: {}",
                    path.display(),
                    e.location,
                    e.kind,
                    e.message
                )
            })
            .collect();
        CliError::Domain(lines.join("\n"))
    })
}

fn parse_pairs<T>(
    pairs: &[String],
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<BTreeMap<String, T>, CliError> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Io(format!("expected NAME=VALUE, got `{pair}`")))?;
        let parsed =
            parse(value).map_err(|e| CliError::Io(format!("bad value in `{pair}`: {e}")))?;
        out.insert(name.to_string(), parsed);
    }
    Ok(out)
}
