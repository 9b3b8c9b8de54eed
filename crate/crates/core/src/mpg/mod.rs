//! Message passing graph: the instance-level expansion of a ground
//! network, with destination-indexed edges and partition assignment.
//!
//! Every conditional dependency contributes edges in both directions, so
//! the three dependency roles (direct parent, mixture component, mixture
//! selector) expand into six edge kinds. A mixture child is connected to
//! every candidate component of its matched repetition, which is what
//! makes the complete bipartite blocks between components and
//! observations.

pub mod partition;
pub mod stats;

use std::sync::Arc;

use crate::bn::{GroundNetwork, NetworkBuilder, ParentRef, RvId, TOPLEVEL};

pub use partition::{mix64, partition, PartitionAssignment, PartitionError, PartitionStrategy};
pub use stats::{replication_stats, ReplicationConvention, ReplicationStats};

/// Message flow role of a directed edge, named from the receiver's side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Dirichlet <- categorical child whose parent it is by plate position.
    DirectChild,
    /// Categorical <- its plate-position Dirichlet parent.
    DirectParent,
    /// Mixture component (Dirichlet) <- categorical child.
    MixtureChild,
    /// Categorical mixture child <- one candidate component.
    MixtureComponent,
    /// Selector <- the mixture child it indexes.
    SelectorChild,
    /// Mixture child <- its selector.
    SelectorParent,
}

impl EdgeKind {
    /// Does the edge point in the Bayesian-network direction
    /// (parent to child)?
    pub fn is_parent_to_child(self) -> bool {
        matches!(
            self,
            EdgeKind::DirectParent | EdgeKind::MixtureComponent | EdgeKind::SelectorParent
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MpgEdge {
    pub src: u64,
    pub dst: u64,
    pub kind: EdgeKind,
    pub src_var: RvId,
    pub dst_var: RvId,
}

/// A vertex view: its variable, and the observed category when the
/// variable is observed. Variational state lives in the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MpgVertex {
    pub id: u64,
    pub var: RvId,
    pub instance: u64,
    pub observed_value: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct MessagePassingGraph {
    net: Arc<GroundNetwork>,
    /// Sorted by (dst, src); together with `dst_offsets` this is a
    /// destination-indexed adjacency structure.
    edges: Vec<MpgEdge>,
    /// `dst_offsets[v]..dst_offsets[v+1]` is the inbound edge range of
    /// vertex `v`.
    dst_offsets: Vec<usize>,
}

/// Instantiate the message passing graph of a ground network with an
/// assigned vertex layout.
pub fn build_graph(net: Arc<GroundNetwork>) -> MessagePassingGraph {
    assert!(net.layout_assigned(), "assign vertex ids before building");
    let mut edges = Vec::new();
    let mut push = |src: u64, dst: u64, kind: EdgeKind, src_var: RvId, dst_var: RvId| {
        edges.push(MpgEdge {
            src,
            dst,
            kind,
            src_var,
            dst_var,
        });
    };
    for c in 0..net.n_vars() {
        let Some(parent) = net.tree().rv(c).parent_ref() else {
            continue;
        };
        let c_lo = net.interval(c).lo;
        match parent {
            ParentRef::Direct { rv: p } => {
                let p_lo = net.interval(p).lo;
                for i in 0..net.var(c).flat {
                    let c_id = c_lo + i;
                    let p_id = p_lo + net.ancestor_instance(c, i, p);
                    push(p_id, c_id, EdgeKind::DirectParent, p, c);
                    push(c_id, p_id, EdgeKind::DirectChild, c, p);
                }
            }
            ParentRef::Mixture {
                component,
                selector,
            } => {
                let s_lo = net.interval(selector).lo;
                let f_lo = net.interval(component).lo;
                for i in 0..net.var(c).flat {
                    let c_id = c_lo + i;
                    let s_id = s_lo + net.ancestor_instance(c, i, selector);
                    push(s_id, c_id, EdgeKind::SelectorParent, selector, c);
                    push(c_id, s_id, EdgeKind::SelectorChild, c, selector);
                    let (base, k) = net.component_block(c, i, component);
                    for t in 0..k {
                        let f_id = f_lo + base + t;
                        push(f_id, c_id, EdgeKind::MixtureComponent, component, c);
                        push(c_id, f_id, EdgeKind::MixtureChild, c, component);
                    }
                }
            }
        }
    }
    edges.sort_unstable_by_key(|e| (e.dst, e.src));

    let total = net.total_vertices() as usize;
    let mut dst_offsets = vec![0usize; total + 1];
    for e in &edges {
        dst_offsets[e.dst as usize + 1] += 1;
    }
    for v in 0..total {
        dst_offsets[v + 1] += dst_offsets[v];
    }
    MessagePassingGraph {
        net,
        edges,
        dst_offsets,
    }
}

impl MessagePassingGraph {
    pub fn net(&self) -> &Arc<GroundNetwork> {
        &self.net
    }

    pub fn edges(&self) -> &[MpgEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> u64 {
        self.net.total_vertices()
    }

    /// Inbound edges of vertex `v` in ascending source order.
    pub fn inbound(&self, v: u64) -> &[MpgEdge] {
        &self.edges[self.dst_offsets[v as usize]..self.dst_offsets[v as usize + 1]]
    }

    /// Inbound edge index range of a whole variable (its instances are
    /// contiguous in the destination order).
    pub fn inbound_range_of_var(&self, rv: RvId) -> std::ops::Range<usize> {
        let iv = self.net.interval(rv);
        self.dst_offsets[iv.lo as usize]..self.dst_offsets[iv.hi as usize]
    }

    pub fn vertex(&self, id: u64) -> MpgVertex {
        let var = self.net.owner_of(id);
        let instance = id - self.net.interval(var).lo;
        let observed_value = self
            .net
            .var(var)
            .observed
            .as_ref()
            .map(|obs| obs[instance as usize]);
        MpgVertex {
            id,
            var,
            instance,
            observed_value,
        }
    }
}

/// The standard mixture-model graph used for partition analysis: `d`
/// documents each with a document-level Dirichlet, `n` words spread as
/// evenly as possible across documents, `k` shared components in a
/// complete bipartite block with every word.
pub fn synthetic_mixture(n_words: u64, n_docs: u64, k: u64) -> MessagePassingGraph {
    assert!(n_docs >= 1 && k >= 2, "need at least one document and two components");
    let mut b = NetworkBuilder::new();
    let kp = b.plate(TOPLEVEL, k);
    let phi = b.dirichlet("phi", kp, vec![1.0, 1.0]);
    let dp = b.plate(TOPLEVEL, n_docs);
    let theta = b.dirichlet("theta", dp, vec![1.0; k as usize]);
    let base = n_words / n_docs;
    let extra = (n_words % n_docs) as usize;
    let reps: Vec<u64> = (0..n_docs as usize)
        .map(|i| base + (i < extra) as u64)
        .collect();
    let wp = b.ragged_plate(dp, reps);
    let z = b.categorical("z", wp, theta);
    let x = b.mixture("x", wp, phi, z);
    b.observe(x, vec![0; n_words as usize]);
    let net = b.build(&std::collections::BTreeMap::new()).expect("synthetic mixture");
    build_graph(Arc::new(net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::ObsData;
    use crate::dsl::{check_types, parse_model};
    use std::collections::BTreeMap;

    fn two_coins_graph(n: usize) -> MessagePassingGraph {
        let model = check_types(
            &parse_model(&std::fs::read_to_string(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../models/two_coins.ispk"
            )).unwrap())
            .unwrap(),
        )
        .unwrap();
        let mut observations = BTreeMap::new();
        observations.insert(
            "x".to_string(),
            ObsData::Values((0..n).map(|i| (i % 2) as u32).collect()),
        );
        let params: BTreeMap<String, f64> =
            [("alpha".to_string(), 1.0), ("beta".to_string(), 1.0)].into();
        let net = model
            .bind(&params, &observations, &BTreeMap::new())
            .unwrap()
            .assign_vertex_ids();
        build_graph(Arc::new(net))
    }

    #[test]
    fn two_coins_n2_has_the_six_edge_kinds() {
        let g = two_coins_graph(2);
        // pi, phi1, phi2, z1, z2, x1, x2
        assert_eq!(g.vertex_count(), 7);
        // Per observation: 2 pi<->z + 2 z<->x + 2K phi<->x with K=2.
        assert_eq!(g.edge_count(), 2 * (2 + 2 + 4));
        use EdgeKind::*;
        for kind in [
            DirectChild,
            DirectParent,
            MixtureChild,
            MixtureComponent,
            SelectorChild,
            SelectorParent,
        ] {
            assert!(
                g.edges().iter().any(|e| e.kind == kind),
                "missing edge kind {kind:?}"
            );
        }
        // x_0 pulls from z_0 and both phi instances.
        let net = g.net();
        let x = net.rv_by_name("x").unwrap();
        let z = net.rv_by_name("z").unwrap();
        let phi = net.rv_by_name("phi").unwrap();
        let x0 = net.interval(x).lo;
        let inbound: Vec<_> = g.inbound(x0).iter().map(|e| e.src_var).collect();
        assert_eq!(inbound.iter().filter(|&&v| v == phi).count(), 2);
        assert_eq!(inbound.iter().filter(|&&v| v == z).count(), 1);
    }

    #[test]
    fn lda_unit_graph_connectivity() {
        let model = check_types(
            &parse_model(&std::fs::read_to_string(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../models/lda.ispk"
            )).unwrap())
            .unwrap(),
        )
        .unwrap();
        let mut observations = BTreeMap::new();
        observations.insert("x".to_string(), ObsData::Groups(vec![ObsData::Values(vec![0])]));
        let params: BTreeMap<String, f64> = [
            ("K".to_string(), 2.0),
            ("V".to_string(), 3.0),
            ("alpha".to_string(), 1.0),
            ("beta".to_string(), 1.0),
        ]
        .into();
        let net = model
            .bind(&params, &observations, &BTreeMap::new())
            .unwrap()
            .assign_vertex_ids();
        let g = build_graph(Arc::new(net));
        let net = g.net();
        let (x, z, theta, phi) = (
            net.rv_by_name("x").unwrap(),
            net.rv_by_name("z").unwrap(),
            net.rv_by_name("theta").unwrap(),
            net.rv_by_name("phi").unwrap(),
        );
        let x0 = net.interval(x).lo;
        let srcs: Vec<_> = g.inbound(x0).iter().map(|e| e.src_var).collect();
        assert_eq!(srcs.iter().filter(|&&v| v == phi).count(), 2);
        assert_eq!(srcs.iter().filter(|&&v| v == z).count(), 1);
        let z0 = net.interval(z).lo;
        let srcs: Vec<_> = g.inbound(z0).iter().map(|e| e.src_var).collect();
        assert!(srcs.contains(&theta));
        assert!(srcs.contains(&x));
    }

    #[test]
    fn empty_observed_plate_gives_no_edges() {
        let g = two_coins_graph(0);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.vertex_count(), 3);
    }

    #[test]
    fn synthetic_mixture_shape() {
        let g = synthetic_mixture(10, 3, 4);
        // x, z: 10 each; theta: 3; phi: 4.
        assert_eq!(g.vertex_count(), 27);
        // Per word: 2 theta<->z + 2 z<->x + 2K phi<->x.
        assert_eq!(g.edge_count(), 10 * 2 * (4 + 2));
        // Words spread 4,3,3.
        let net = g.net();
        let z = net.rv_by_name("z").unwrap();
        let wp = net.tree().rv(z).plate;
        assert_eq!(net.plate_instances(wp).rep_sizes, vec![4, 3, 3]);
    }

    #[test]
    fn inbound_edges_are_sorted_by_source() {
        let g = two_coins_graph(5);
        for v in 0..g.vertex_count() {
            let inb = g.inbound(v);
            assert!(inb.windows(2).all(|w| w[0].src < w[1].src));
            assert!(inb.iter().all(|e| e.dst == v));
        }
    }
}
