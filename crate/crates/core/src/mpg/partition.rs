//! Edge-to-partition assignment under the four general vertex-cut
//! strategies plus the range strategy tailored to message passing graphs.
//!
//! Hash-based strategies use a fixed splitmix64 finalizer over the edge
//! endpoints and the seed, so assignments are reproducible across
//! implementations. The range strategy is deterministic and
//! seed-independent.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::MessagePassingGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum PartitionStrategy {
    EdgePartition1D,
    EdgePartition2D,
    RandomVertexCut,
    CanonicalRandomVertexCut,
    InferSparkRange,
}

impl PartitionStrategy {
    pub const ALL: [PartitionStrategy; 5] = [
        PartitionStrategy::EdgePartition1D,
        PartitionStrategy::EdgePartition2D,
        PartitionStrategy::RandomVertexCut,
        PartitionStrategy::CanonicalRandomVertexCut,
        PartitionStrategy::InferSparkRange,
    ];
}

impl fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PartitionStrategy::EdgePartition1D => "EdgePartition1D",
            PartitionStrategy::EdgePartition2D => "EdgePartition2D",
            PartitionStrategy::RandomVertexCut => "RandomVertexCut",
            PartitionStrategy::CanonicalRandomVertexCut => "CanonicalRandomVertexCut",
            PartitionStrategy::InferSparkRange => "InferSparkRange",
        };
        write!(f, "{s}")
    }
}

impl FromStr for PartitionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EdgePartition1D" | "1d" => Ok(PartitionStrategy::EdgePartition1D),
            "EdgePartition2D" | "2d" => Ok(PartitionStrategy::EdgePartition2D),
            "RandomVertexCut" | "rvc" => Ok(PartitionStrategy::RandomVertexCut),
            "CanonicalRandomVertexCut" | "crvc" => {
                Ok(PartitionStrategy::CanonicalRandomVertexCut)
            }
            "InferSparkRange" | "range" => Ok(PartitionStrategy::InferSparkRange),
            other => Err(format!(
                "unknown partition strategy `{other}` (expected EdgePartition1D, \
                 EdgePartition2D, RandomVertexCut, CanonicalRandomVertexCut or \
                 InferSparkRange)"
            )),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("partition count must be at least 1, got {0}")]
    ZeroPartitions(u32),
    #[error("EdgePartition2D requires a perfect-square partition count, got {0}")]
    NotASquare(u32),
}

/// splitmix64 finalizer; full-avalanche 64-bit mixer.
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    x
}

fn hash1(v: u64, seed: u64) -> u64 {
    mix64(v ^ mix64(seed ^ 0x9e3779b97f4a7c15))
}

fn hash2(a: u64, b: u64, seed: u64) -> u64 {
    mix64(a ^ mix64(b ^ mix64(seed ^ 0x9e3779b97f4a7c15)))
}

/// A total edge-to-partition assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAssignment {
    pub strategy: PartitionStrategy,
    pub m: u32,
    pub seed: u64,
    /// Parallel to `graph.edges()`.
    pub edge_to_part: Vec<u32>,
}

impl PartitionAssignment {
    /// Edge count per partition.
    pub fn edge_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.m as usize];
        for &p in &self.edge_to_part {
            counts[p as usize] += 1;
        }
        counts
    }
}

/// Assign every edge of the graph to one of `m` partitions.
pub fn partition(
    graph: &MessagePassingGraph,
    strategy: PartitionStrategy,
    m: u32,
    seed: u64,
) -> Result<PartitionAssignment, PartitionError> {
    if m == 0 {
        return Err(PartitionError::ZeroPartitions(m));
    }
    let sqrt_m = (m as f64).sqrt().round() as u32;
    if strategy == PartitionStrategy::EdgePartition2D && sqrt_m * sqrt_m != m {
        return Err(PartitionError::NotASquare(m));
    }
    let net = graph.net();
    let edge_to_part = graph
        .edges()
        .iter()
        .map(|e| match strategy {
            PartitionStrategy::EdgePartition1D => (hash1(e.src, seed) % m as u64) as u32,
            PartitionStrategy::EdgePartition2D => {
                // Divide the adjacency matrix into a sqrt(M) x sqrt(M) grid.
                let col = (hash1(e.src, seed) % sqrt_m as u64) as u32;
                let row = (hash1(e.dst, seed) % sqrt_m as u64) as u32;
                col * sqrt_m + row
            }
            PartitionStrategy::RandomVertexCut => (hash2(e.src, e.dst, seed) % m as u64) as u32,
            PartitionStrategy::CanonicalRandomVertexCut => {
                let (a, b) = if e.src <= e.dst {
                    (e.src, e.dst)
                } else {
                    (e.dst, e.src)
                };
                (hash2(a, b, seed) % m as u64) as u32
            }
            PartitionStrategy::InferSparkRange => {
                // Pick the endpoint whose variable has the larger instance
                // count (smaller interval start on ties) and locate its ID
                // within the variable's range.
                let si = net.interval(e.src_var);
                let di = net.interval(e.dst_var);
                let range = if si.len() > di.len() || (si.len() == di.len() && si.lo <= di.lo) {
                    (e.src, si)
                } else {
                    (e.dst, di)
                };
                let (id, iv) = range;
                ((id - iv.lo) as u128 * m as u128 / iv.len() as u128) as u32
            }
        })
        .collect();
    Ok(PartitionAssignment {
        strategy,
        m,
        seed,
        edge_to_part,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpg::synthetic_mixture;

    #[test]
    fn every_strategy_is_total_for_any_m_and_seed() {
        let g = synthetic_mixture(60, 4, 3);
        for strategy in PartitionStrategy::ALL {
            for (m, seed) in [(1u32, 0u64), (4, 1), (9, 42), (16, 7)] {
                let a = partition(&g, strategy, m, seed).unwrap();
                assert_eq!(a.edge_to_part.len(), g.edge_count());
                assert!(a.edge_to_part.iter().all(|&p| p < m));
                assert_eq!(a.edge_counts().iter().sum::<u64>(), g.edge_count() as u64);
            }
        }
    }

    #[test]
    fn m_equals_one_puts_everything_in_partition_zero() {
        let g = synthetic_mixture(20, 2, 2);
        for strategy in PartitionStrategy::ALL {
            let a = partition(&g, strategy, 1, 123).unwrap();
            assert!(a.edge_to_part.iter().all(|&p| p == 0));
        }
    }

    #[test]
    fn edge_partition_2d_rejects_non_squares() {
        let g = synthetic_mixture(10, 2, 2);
        assert_eq!(
            partition(&g, PartitionStrategy::EdgePartition2D, 8, 0),
            Err(PartitionError::NotASquare(8))
        );
        assert!(partition(&g, PartitionStrategy::EdgePartition2D, 16, 0).is_ok());
    }

    #[test]
    fn crvc_colocates_opposite_directions() {
        let g = synthetic_mixture(50, 5, 4);
        let a = partition(&g, PartitionStrategy::CanonicalRandomVertexCut, 8, 9).unwrap();
        let mut by_pair = std::collections::HashMap::new();
        for (e, &p) in g.edges().iter().zip(&a.edge_to_part) {
            let key = (e.src.min(e.dst), e.src.max(e.dst));
            let prev = by_pair.insert(key, p);
            if let Some(prev) = prev {
                assert_eq!(prev, p, "opposite edges split across partitions");
            }
        }
    }

    #[test]
    fn range_strategy_is_seed_independent_and_local() {
        let g = synthetic_mixture(40, 4, 3);
        let a = partition(&g, PartitionStrategy::InferSparkRange, 4, 1).unwrap();
        let b = partition(&g, PartitionStrategy::InferSparkRange, 4, 999).unwrap();
        assert_eq!(a.edge_to_part, b.edge_to_part);

        // All edges incident to (z_i, x_i) with the same i share a partition.
        let net = g.net();
        let z = net.rv_by_name("z").unwrap();
        let x = net.rv_by_name("x").unwrap();
        let n = net.var(x).flat;
        for i in 0..n {
            let zi = net.interval(z).lo + i;
            let xi = net.interval(x).lo + i;
            let mut parts = std::collections::HashSet::new();
            for (e, &p) in g.edges().iter().zip(&a.edge_to_part) {
                if e.src == zi || e.dst == zi || e.src == xi || e.dst == xi {
                    parts.insert(p);
                }
            }
            assert_eq!(parts.len(), 1, "word {i} spans {parts:?}");
        }
    }

    #[test]
    fn hash_assignments_are_deterministic() {
        let g = synthetic_mixture(30, 3, 2);
        for strategy in PartitionStrategy::ALL {
            let a = partition(&g, strategy, 4, 77).unwrap();
            let b = partition(&g, strategy, 4, 77).unwrap();
            assert_eq!(a, b);
        }
        // Different seeds move hash-based assignments.
        let a = partition(&g, PartitionStrategy::RandomVertexCut, 4, 1).unwrap();
        let b = partition(&g, PartitionStrategy::RandomVertexCut, 4, 2).unwrap();
        assert_ne!(a.edge_to_part, b.edge_to_part);
    }
}
