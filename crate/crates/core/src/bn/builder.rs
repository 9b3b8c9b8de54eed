//! Programmatic network construction, bypassing the model language.
//!
//! Used for networks the language fragment cannot express (asymmetric
//! priors) and for generating synthetic graphs with a known shape.

use std::collections::BTreeMap;

use super::ground::{BindError, GroundNetwork, ObsData};
use super::template::{DistSpec, ParentRef, PlateId, PlateTree, PriorSpec, RvId, SizeSpec};
use crate::dsl::Binding;

pub use super::template::TOPLEVEL;

#[derive(Debug, Default)]
pub struct NetworkBuilder {
    tree: PlateTree,
    names: BTreeMap<String, Binding>,
    observations: BTreeMap<RvId, ObsData>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self {
            tree: PlateTree::new(),
            names: BTreeMap::new(),
            observations: BTreeMap::new(),
        }
    }

    /// A plate with the same size in every repetition of its parent.
    pub fn plate(&mut self, parent: PlateId, size: u64) -> PlateId {
        self.tree.add_plate(parent, SizeSpec::Fixed(size))
    }

    /// A plate with explicit per-repetition sizes (one entry per flattened
    /// repetition of the parent).
    pub fn ragged_plate(&mut self, parent: PlateId, rep_sizes: Vec<u64>) -> PlateId {
        self.tree.add_plate(parent, SizeSpec::Ragged(rep_sizes))
    }

    /// A Dirichlet (or Beta, when `prior.len() == 2`) variable with an
    /// explicit prior pseudo-count vector.
    pub fn dirichlet(&mut self, name: &str, plate: PlateId, prior: Vec<f64>) -> RvId {
        let rv = self.tree.add_rv(
            plate,
            DistSpec::Dirichlet {
                prior: PriorSpec::Explicit(prior),
            },
        );
        self.names.insert(name.to_string(), Binding::Rv(rv));
        rv
    }

    /// A latent categorical with a plate-position-determined parent.
    pub fn categorical(&mut self, name: &str, plate: PlateId, parent: RvId) -> RvId {
        let rv = self.tree.add_rv(
            plate,
            DistSpec::Categorical {
                parent: ParentRef::Direct { rv: parent },
            },
        );
        self.names.insert(name.to_string(), Binding::Rv(rv));
        rv
    }

    /// A categorical whose parent is `component(selector)`.
    pub fn mixture(&mut self, name: &str, plate: PlateId, component: RvId, selector: RvId) -> RvId {
        let rv = self.tree.add_rv(
            plate,
            DistSpec::Categorical {
                parent: ParentRef::Mixture {
                    component,
                    selector,
                },
            },
        );
        self.names.insert(name.to_string(), Binding::Rv(rv));
        rv
    }

    /// Mark a categorical variable as observed with flattened category
    /// indices (one value per instance, in plate order).
    pub fn observe(&mut self, rv: RvId, values: Vec<u32>) {
        self.observations.insert(rv, nest(&self.tree, rv, values));
    }

    pub fn build(self, params: &BTreeMap<String, f64>) -> Result<GroundNetwork, BindError> {
        let net = GroundNetwork::bind(
            &self.tree,
            &self.names,
            &BTreeMap::new(),
            params,
            &self.observations,
            &BTreeMap::new(),
        )?;
        Ok(net.assign_vertex_ids())
    }
}

/// Re-nest a flat observation vector to the plate structure of `rv`.
/// Builder plates have explicit sizes, so the nesting is mechanical.
fn nest(tree: &PlateTree, rv: RvId, values: Vec<u32>) -> ObsData {
    let axes = tree.axes(rv);
    if axes.len() <= 1 {
        return ObsData::Values(values);
    }
    // Per-axis repetition lists in flattened parent order.
    let mut reps_full: Vec<Vec<u64>> = Vec::with_capacity(axes.len());
    let mut parent_flat = 1u64;
    for &axis in &axes {
        let reps = match &tree.plate(axis).size {
            SizeSpec::Fixed(s) => vec![*s; parent_flat as usize],
            SizeSpec::Ragged(v) => v.clone(),
            _ => panic!("builder plates have explicit sizes"),
        };
        parent_flat = reps.iter().sum();
        reps_full.push(reps);
    }

    struct Cursors<'a> {
        reps_full: &'a [Vec<u64>],
        rep_pos: Vec<usize>,
        values: std::slice::Iter<'a, u32>,
    }
    fn build(c: &mut Cursors<'_>, level: usize) -> ObsData {
        let r = c.reps_full[level][c.rep_pos[level]];
        c.rep_pos[level] += 1;
        if level == c.reps_full.len() - 1 {
            ObsData::Values(c.values.by_ref().take(r as usize).copied().collect())
        } else {
            ObsData::Groups((0..r).map(|_| build(c, level + 1)).collect())
        }
    }
    let mut cursors = Cursors {
        reps_full: &reps_full,
        rep_pos: vec![0; axes.len()],
        values: values.iter(),
    };
    build(&mut cursors, 0)
}
