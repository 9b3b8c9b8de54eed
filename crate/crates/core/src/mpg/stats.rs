//! Replication analysis of a partition assignment.
//!
//! A vertex is replicated into every partition that holds an edge
//! requiring it. Only the destination end of an edge pulls its source, so
//! by default a vertex is counted in the partitions holding its inbound
//! edges; `BothEnds` is available for sensitivity studies.

use super::{MessagePassingGraph, PartitionAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplicationConvention {
    #[default]
    DestinationOnly,
    BothEnds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    /// Number of distinct partitions containing each vertex.
    pub per_vertex_replicas: Vec<u32>,
    /// Largest number of distinct vertices held by one partition.
    pub max_partition_vertices: u64,
    /// Mean replica count per variable (0 for variables with no vertices).
    pub mean_replication_by_var: Vec<f64>,
    /// Edges per partition.
    pub edge_counts: Vec<u64>,
}

impl ReplicationStats {
    /// max/mean of the per-partition edge counts.
    pub fn edge_balance(&self) -> f64 {
        let max = self.edge_counts.iter().copied().max().unwrap_or(0) as f64;
        let mean =
            self.edge_counts.iter().sum::<u64>() as f64 / self.edge_counts.len().max(1) as f64;
        if mean == 0.0 {
            0.0
        } else {
            max / mean
        }
    }
}

pub fn replication_stats(
    graph: &MessagePassingGraph,
    assignment: &PartitionAssignment,
    convention: ReplicationConvention,
) -> ReplicationStats {
    let m = assignment.m as usize;
    let words = m.div_ceil(64);
    let total = graph.vertex_count() as usize;
    let mut masks = vec![0u64; total * words];
    let mut mark = |v: u64, p: u32| {
        let w = v as usize * words + (p as usize >> 6);
        masks[w] |= 1u64 << (p as usize & 63);
    };
    for (e, &p) in graph.edges().iter().zip(&assignment.edge_to_part) {
        mark(e.dst, p);
        if convention == ReplicationConvention::BothEnds {
            mark(e.src, p);
        }
    }

    let net = graph.net();
    let mut per_vertex_replicas = vec![0u32; total];
    let mut partition_vertices = vec![0u64; m];
    for v in 0..total {
        let mut count = 0u32;
        for w in 0..words {
            let mut bits = masks[v * words + w];
            count += bits.count_ones();
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                partition_vertices[(w << 6) + b] += 1;
                bits &= bits - 1;
            }
        }
        per_vertex_replicas[v] = count;
    }

    let mut mean_replication_by_var = vec![0.0f64; net.n_vars()];
    for rv in 0..net.n_vars() {
        let iv = net.interval(rv);
        if iv.is_empty() {
            continue;
        }
        let sum: u64 = (iv.lo..iv.hi)
            .map(|v| per_vertex_replicas[v as usize] as u64)
            .sum();
        mean_replication_by_var[rv] = sum as f64 / iv.len() as f64;
    }

    ReplicationStats {
        per_vertex_replicas,
        max_partition_vertices: partition_vertices.iter().copied().max().unwrap_or(0),
        mean_replication_by_var,
        edge_counts: assignment.edge_counts(),
    }
}

/// Closed-form expected replication of a mixture observation under the
/// uniform-hash strategies: `M (1 - (1 - 1/M)^(K+1))`.
pub fn expected_replication_uniform(m: u32, k: u64) -> f64 {
    let m = m as f64;
    m * (1.0 - (1.0 - 1.0 / m).powi(k as i32 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpg::{partition, synthetic_mixture, PartitionStrategy};

    #[test]
    fn range_strategy_has_unit_replication_for_observations() {
        let g = synthetic_mixture(1000, 10, 4);
        let a = partition(&g, PartitionStrategy::InferSparkRange, 8, 0).unwrap();
        let stats = replication_stats(&g, &a, ReplicationConvention::DestinationOnly);
        let x = g.net().rv_by_name("x").unwrap();
        let z = g.net().rv_by_name("z").unwrap();
        assert_eq!(stats.mean_replication_by_var[x], 1.0);
        assert_eq!(stats.mean_replication_by_var[z], 1.0);
    }

    #[test]
    fn range_strategy_bounds_partition_size()  {
        let (n, d, k, m) = (5000u64, 100u64, 6u64, 8u32);
        let g = synthetic_mixture(n, d, k);
        let a = partition(&g, PartitionStrategy::InferSparkRange, m, 0).unwrap();
        let stats = replication_stats(&g, &a, ReplicationConvention::DestinationOnly);
        let bound = 3 * n.div_ceil(m as u64) + k + d.div_ceil(m as u64);
        assert!(
            stats.max_partition_vertices <= bound,
            "{} > {bound}",
            stats.max_partition_vertices
        );
    }

    #[test]
    fn one_d_replication_tracks_the_closed_form() {
        let (n, d, k, m) = (20_000u64, 50u64, 4u64, 4u32);
        let g = synthetic_mixture(n, d, k);
        let x = g.net().rv_by_name("x").unwrap();
        let mut acc = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let a = partition(&g, PartitionStrategy::EdgePartition1D, m, seed).unwrap();
            let stats = replication_stats(&g, &a, ReplicationConvention::DestinationOnly);
            acc += stats.mean_replication_by_var[x];
        }
        let got = acc / seeds as f64;
        let want = expected_replication_uniform(m, k);
        assert!(
            (got - want).abs() / want < 0.05,
            "mean replication {got} vs closed form {want}"
        );
    }

    #[test]
    fn two_d_replication_respects_min_bound() {
        let (n, d, k, m) = (5000u64, 20u64, 6u64, 16u32);
        let g = synthetic_mixture(n, d, k);
        let x = g.net().rv_by_name("x").unwrap();
        let iv = g.net().interval(x);
        let a = partition(&g, PartitionStrategy::EdgePartition2D, m, 3).unwrap();
        let stats = replication_stats(&g, &a, ReplicationConvention::DestinationOnly);
        let bound = (k + 1).min((m as f64).sqrt() as u64) as u32;
        for v in iv.lo..iv.hi {
            assert!(stats.per_vertex_replicas[v as usize] <= bound);
        }
    }

    #[test]
    fn replica_counts_are_positive_for_connected_vertices() {
        let g = synthetic_mixture(100, 4, 3);
        let a = partition(&g, PartitionStrategy::RandomVertexCut, 4, 5).unwrap();
        let stats = replication_stats(&g, &a, ReplicationConvention::DestinationOnly);
        for v in 0..g.vertex_count() {
            if !g.inbound(v).is_empty() {
                assert!(stats.per_vertex_replicas[v as usize] >= 1);
            }
        }
        assert!(stats.max_partition_vertices <= g.vertex_count());
    }
}
