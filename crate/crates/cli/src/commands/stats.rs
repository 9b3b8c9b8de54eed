//! `partition-stats`: sweep the partition strategies over seeds and emit
//! replication statistics as CSV.
//!
//! The graph comes either from a model and its data, or from a synthetic
//! mixture (`--mixture N,D,K`): the standard topology with N observations,
//! D document-level Dirichlets and K shared components.

use std::sync::Arc;

use vmpforge_core::bn::ParentRef;
use vmpforge_core::mpg::{
    build_graph, partition, replication_stats, synthetic_mixture, MessagePassingGraph,
    PartitionStrategy, ReplicationConvention,
};

use crate::error::CliError;
use crate::opts::RunConfig;

pub fn run(
    config: &RunConfig,
    mixture: Option<&str>,
    seeds: u64,
    both_ends: bool,
) -> Result<(), CliError> {
    let (graph, shape) = match mixture {
        Some(spec) => {
            let dims: Vec<u64> = spec
                .split(',')
                .map(|p| p.trim().parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Io(format!("bad --mixture `{spec}`: {e}")))?;
            let [n, d, k] = dims[..] else {
                return Err(CliError::Io(format!(
                    "--mixture takes N,D,K, got `{spec}`"
                )));
            };
            let graph = synthetic_mixture(n, d, k);
            (graph, (n, d, k))
        }
        None => {
            let (_, net) = config.ground()?;
            let graph = build_graph(Arc::new(net));
            let shape = mixture_shape(&graph);
            (graph, shape)
        }
    };
    let (n, d, k) = shape;
    let x = graph
        .net()
        .rv_by_name("x")
        .or_else(|| observed_var(&graph))
        .ok_or_else(|| CliError::Domain("the graph has no observed variable".into()))?;
    let convention = if both_ends {
        ReplicationConvention::BothEnds
    } else {
        ReplicationConvention::DestinationOnly
    };

    let mut csv = String::from("strategy,M,K,N,D,seed,meanReplX,maxPartVerts,edgeBalance\n");
    let m = config.partitions;
    for strategy in PartitionStrategy::ALL {
        for seed_offset in 0..seeds.max(1) {
            let seed = config.seed + seed_offset;
            let assignment = match partition(&graph, strategy, m, seed) {
                Ok(a) => a,
                Err(e) if strategy == PartitionStrategy::EdgePartition2D => {
                    eprintln!("skipping {strategy}: {e}");
                    break;
                }
                Err(e) => return Err(CliError::domain(e)),
            };
            let stats = replication_stats(&graph, &assignment, convention);
            csv.push_str(&format!(
                "{strategy},{m},{k},{n},{d},{seed},{},{},{}\n",
                stats.mean_replication_by_var[x],
                stats.max_partition_vertices,
                stats.edge_balance(),
            ));
        }
    }
    match &config.output {
        Some(path) => std::fs::write(path, csv).map_err(CliError::io)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn observed_var(graph: &MessagePassingGraph) -> Option<usize> {
    let net = graph.net();
    (0..net.n_vars()).find(|&rv| net.var(rv).observed.is_some())
}

/// Derive (N, D, K) from an arbitrary graph: the first observed mixture
/// child gives N and K; its selector's parent count gives D.
fn mixture_shape(graph: &MessagePassingGraph) -> (u64, u64, u64) {
    let net = graph.net();
    for rv in 0..net.n_vars() {
        if net.var(rv).observed.is_none() {
            continue;
        }
        let n = net.var(rv).flat;
        if let Some(ParentRef::Mixture {
            component,
            selector,
        }) = net.tree().rv(rv).parent_ref()
        {
            let k = if net.var(component).flat > 0 {
                net.component_block(rv, 0, component).1
            } else {
                0
            };
            let d = match net.tree().rv(selector).parent_ref() {
                Some(ParentRef::Direct { rv: theta }) => net.var(theta).flat,
                _ => 1,
            };
            return (n, d, k);
        }
        return (n, 1, 0);
    }
    (0, 0, 0)
}
