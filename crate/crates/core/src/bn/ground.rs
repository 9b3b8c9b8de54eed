//! Grounding: bind runtime metadata (parameter values, observations,
//! plate sizes) to a plate-tree template and lay out vertex IDs.
//!
//! Unknown (`?`) plate sizes are inferred by counting observation elements;
//! nested ragged plates take their per-repetition sizes from the nested
//! observation structure. Repetition sizes are kept as prefix-sum arrays so
//! instance-to-repetition projection is a binary search.

use std::collections::BTreeMap;

use thiserror::Error;

use super::template::{
    DimSpec, DistSpec, ParentRef, PlateId, PlateTree, PriorSpec, RvId, SizeSpec, SymbolId,
};
use crate::dsl::{Binding, TypedModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BindError {
    #[error("missing value for model parameter `{0}`")]
    MissingParam(String),
    #[error("`{0}` is not a parameter of this model")]
    UnknownParam(String),
    #[error("unresolved plate: {0}")]
    UnresolvedPlate(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{0}` cannot be observed: only categorical variables take observations")]
    NotObservable(String),
}

/// Observation data with the nesting structure of the observed variable's
/// plates: `Values` at the innermost level, one `Groups` level per
/// enclosing plate above it.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsData {
    Values(Vec<u32>),
    Groups(Vec<ObsData>),
}

impl ObsData {
    pub fn flat_len(&self) -> usize {
        match self {
            ObsData::Values(v) => v.len(),
            ObsData::Groups(g) => g.iter().map(|c| c.flat_len()).sum(),
        }
    }
}

/// Flattened repetition structure of one plate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateInstances {
    /// One entry per repetition of the parent plate.
    pub rep_sizes: Vec<u64>,
    /// Prefix sums of `rep_sizes`; `prefix.len() == rep_sizes.len() + 1`.
    pub prefix: Vec<u64>,
}

impl PlateInstances {
    fn from_reps(rep_sizes: Vec<u64>) -> Self {
        let mut prefix = Vec::with_capacity(rep_sizes.len() + 1);
        let mut acc = 0u64;
        prefix.push(0);
        for &s in &rep_sizes {
            acc += s;
            prefix.push(acc);
        }
        Self { rep_sizes, prefix }
    }

    /// Flattened size: the sum of the per-repetition sizes.
    pub fn flat(&self) -> u64 {
        *self.prefix.last().expect("non-empty prefix")
    }

    /// The repetition (parent instance index) containing flattened index `i`.
    pub fn rep_of(&self, i: u64) -> u64 {
        debug_assert!(i < self.flat());
        (self.prefix.partition_point(|&p| p <= i) - 1) as u64
    }
}

/// Per-variable ground data.
#[derive(Debug, Clone)]
pub struct GroundVariable {
    pub rv: RvId,
    /// Display name: the first identifier bound to this variable, falling
    /// back to the internal name.
    pub name: String,
    /// Dirichlet dimension, or the number of categories of a categorical.
    pub dim: usize,
    /// Prior pseudo-counts (Dirichlet variables only).
    pub prior: Option<Vec<f64>>,
    /// Flattened observed category indices (observed variables only).
    pub observed: Option<Vec<u32>>,
    /// Instance count: the flattened size of the innermost plate.
    pub flat: u64,
}

/// Half-open vertex-ID interval of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdRange {
    pub lo: u64,
    pub hi: u64,
}

impl IdRange {
    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, id: u64) -> bool {
        self.lo <= id && id < self.hi
    }
}

/// A plate tree with every size resolved, parameter values and
/// observations bound, and (after [`GroundNetwork::assign_vertex_ids`])
/// a vertex-ID layout. Immutable once built; safe to share across threads.
#[derive(Debug, Clone)]
pub struct GroundNetwork {
    tree: PlateTree,
    pub param_values: BTreeMap<String, f64>,
    sizes: Vec<PlateInstances>,
    vars: Vec<GroundVariable>,
    names: BTreeMap<String, Binding>,
    layout: Vec<IdRange>,
    /// (interval start, variable) sorted by start, for owner lookup.
    interval_starts: Vec<(u64, RvId)>,
    total_vertices: u64,
}

impl GroundNetwork {
    /// Bind runtime metadata to a template. Observations and plate-size
    /// overrides are keyed by variable / symbol; use
    /// [`TypedModel::bind`](crate::dsl::TypedModel) for name-keyed access.
    pub fn bind(
        tree: &PlateTree,
        names: &BTreeMap<String, Binding>,
        declared_params: &BTreeMap<String, crate::dsl::ScalarKind>,
        param_values: &BTreeMap<String, f64>,
        observations: &BTreeMap<RvId, ObsData>,
        plate_overrides: &BTreeMap<SymbolId, u64>,
    ) -> Result<Self, BindError> {
        for name in declared_params.keys() {
            if !param_values.contains_key(name) {
                return Err(BindError::MissingParam(name.clone()));
            }
        }
        for name in param_values.keys() {
            if !declared_params.contains_key(name) {
                return Err(BindError::UnknownParam(name.clone()));
            }
        }

        let mut tree = tree.clone();

        // Walk the observation structure, collecting per-plate repetition
        // sizes and the flattened values.
        let mut constraints: BTreeMap<PlateId, Vec<u64>> = BTreeMap::new();
        let mut flat_obs: BTreeMap<RvId, Vec<u32>> = BTreeMap::new();
        for (&rv, data) in observations {
            if rv >= tree.n_rvs() {
                return Err(BindError::UnknownVariable(format!("rv {rv}")));
            }
            if tree.rv(rv).is_dirichlet() {
                return Err(BindError::NotObservable(tree.rv(rv).internal_name.clone()));
            }
            let axes = tree.axes(rv);
            let mut per_var: BTreeMap<PlateId, Vec<u64>> = BTreeMap::new();
            let mut flat = Vec::new();
            let name = tree.rv(rv).internal_name.clone();
            let top_len = walk_obs(data, 0, &axes, &mut per_var, &mut flat, &name)?;
            if let Some(&first) = axes.first() {
                per_var.entry(first).or_default().push(top_len);
            } else if flat.len() != 1 {
                return Err(BindError::ShapeMismatch(format!(
                    "`{name}` is unplated and takes exactly one observed value"
                )));
            }
            for (plate, reps) in per_var {
                match constraints.get(&plate) {
                    Some(existing) if *existing != reps => {
                        return Err(BindError::ShapeMismatch(format!(
                            "observations disagree on the sizes of a shared plate \
                             (`{name}` vs an earlier variable)"
                        )));
                    }
                    Some(_) => {}
                    None => {
                        constraints.insert(plate, reps);
                    }
                }
            }
            flat_obs.insert(rv, flat);
            tree.rv_mut(rv).observed = true;
        }

        // Resolve plate sizes parent-first (plate ids are created in
        // descent order, so id order is topological).
        let mut sizes: Vec<PlateInstances> = Vec::with_capacity(tree.n_plates());
        for plate in tree.plate_ids() {
            let parent_flat = match tree.plate(plate).parent {
                None => {
                    sizes.push(PlateInstances::from_reps(vec![1]));
                    continue;
                }
                Some(p) => sizes[p].flat(),
            };
            let node = tree.plate(plate);
            let constraint = constraints.get(&plate);
            let resolved = match &node.size {
                SizeSpec::Fixed(s) => PlateInstances::from_reps(vec![*s; parent_flat as usize]),
                SizeSpec::Ragged(reps) => {
                    if reps.len() as u64 != parent_flat {
                        return Err(BindError::ShapeMismatch(format!(
                            "ragged plate lists {} repetition sizes but repeats {} times",
                            reps.len(),
                            parent_flat
                        )));
                    }
                    PlateInstances::from_reps(reps.clone())
                }
                SizeSpec::Range { lo, hi, inclusive } => {
                    let l = eval_index(lo, param_values, "plate bound")?;
                    let h = eval_index(hi, param_values, "plate bound")?;
                    let size = if *inclusive {
                        (h + 1).saturating_sub(l)
                    } else {
                        h.saturating_sub(l)
                    };
                    PlateInstances::from_reps(vec![size; parent_flat as usize])
                }
                SizeSpec::Unknown(sym) => match (constraint, plate_overrides.get(sym)) {
                    (Some(reps), Some(&v)) => {
                        if reps.iter().any(|&r| r != v) {
                            return Err(BindError::ShapeMismatch(format!(
                                "plate size override {v} conflicts with observed sizes"
                            )));
                        }
                        PlateInstances::from_reps(reps.clone())
                    }
                    (Some(reps), None) => PlateInstances::from_reps(reps.clone()),
                    (None, Some(&v)) => {
                        PlateInstances::from_reps(vec![v; parent_flat as usize])
                    }
                    (None, None) => {
                        return Err(BindError::UnresolvedPlate(format!(
                            "a `?` plate has no observation to infer its size from \
                             and no explicit size (symbol {sym})"
                        )))
                    }
                },
            };
            if let Some(reps) = constraint {
                if reps.len() as u64 != parent_flat {
                    return Err(BindError::ShapeMismatch(format!(
                        "observation lists {} repetitions of a plate that repeats {} times",
                        reps.len(),
                        parent_flat
                    )));
                }
                if *reps != resolved.rep_sizes {
                    return Err(BindError::ShapeMismatch(
                        "observation length conflicts with the explicit plate size".into(),
                    ));
                }
            }
            sizes.push(resolved);
        }

        // Display names: the first identifier bound to each variable.
        let mut display: Vec<Option<String>> = vec![None; tree.n_rvs()];
        for (name, b) in names {
            if let Binding::Rv(rv) = b {
                let slot = &mut display[*rv];
                if slot.is_none() {
                    *slot = Some(name.clone());
                }
            }
        }

        // Dimensions and priors, in creation order (dependencies precede
        // dependents).
        let mut vars: Vec<GroundVariable> = Vec::with_capacity(tree.n_rvs());
        for rv in tree.rv_ids() {
            let node = tree.rv(rv);
            let flat = sizes[node.plate].flat();
            let (dim, prior) = match &node.dist {
                DistSpec::Dirichlet { prior } => match prior {
                    PriorSpec::Symmetric { concentration, dim } => {
                        let c = concentration.eval(param_values).ok_or_else(|| {
                            BindError::DomainError("unresolved prior concentration".into())
                        })?;
                        if !c.is_finite() || c <= 0.0 {
                            return Err(BindError::DomainError(format!(
                                "prior concentration must be positive and finite, got {c}"
                            )));
                        }
                        let d = match dim {
                            DimSpec::Fixed(d) => *d as u64,
                            DimSpec::Expr(e) => eval_index(e, param_values, "dimension")?,
                        };
                        if d < 2 {
                            return Err(BindError::DomainError(format!(
                                "a Dirichlet dimension must be at least 2, got {d}"
                            )));
                        }
                        (d as usize, Some(vec![c; d as usize]))
                    }
                    PriorSpec::Explicit(v) => {
                        if v.len() < 2 || v.iter().any(|a| !a.is_finite() || *a <= 0.0) {
                            return Err(BindError::DomainError(
                                "explicit prior must have >= 2 positive finite pseudo-counts"
                                    .into(),
                            ));
                        }
                        (v.len(), Some(v.clone()))
                    }
                },
                DistSpec::Categorical { parent } => {
                    let dim = match parent {
                        ParentRef::Direct { rv: p } => vars[*p].dim,
                        ParentRef::Mixture {
                            component,
                            selector,
                        } => {
                            let axis = tree.rv(*component).plate;
                            let reps = &sizes[axis].rep_sizes;
                            let k = *reps.first().ok_or_else(|| {
                                BindError::DomainError("empty mixture axis".into())
                            })?;
                            if reps.iter().any(|&r| r != k) {
                                return Err(BindError::DomainError(
                                    "a mixture axis must have a uniform size".into(),
                                ));
                            }
                            if vars[*selector].dim as u64 != k {
                                return Err(BindError::DomainError(format!(
                                    "mixture has {k} components but its selector ranges over {}",
                                    vars[*selector].dim
                                )));
                            }
                            vars[*component].dim
                        }
                    };
                    (dim, None)
                }
            };
            let observed = flat_obs.remove(&rv);
            if let Some(obs) = &observed {
                if obs.len() as u64 != flat {
                    return Err(BindError::ShapeMismatch(format!(
                        "{} observed values for {} instances of `{}`",
                        obs.len(),
                        flat,
                        node.internal_name
                    )));
                }
                if let Some(&bad) = obs.iter().find(|&&v| v as usize >= dim) {
                    return Err(BindError::DomainError(format!(
                        "observed category index {bad} is out of range for dimension {dim}"
                    )));
                }
            }
            vars.push(GroundVariable {
                rv,
                name: display[rv]
                    .clone()
                    .unwrap_or_else(|| node.internal_name.clone()),
                dim,
                prior,
                observed,
                flat,
            });
        }

        Ok(Self {
            tree,
            param_values: param_values.clone(),
            sizes,
            vars,
            names: names.clone(),
            layout: Vec::new(),
            interval_starts: Vec::new(),
            total_vertices: 0,
        })
    }

    /// Assign consecutive vertex-ID intervals per variable, in reverse
    /// binding order so the data variables start at ID 0. Instances of a
    /// variable are contiguous, and co-plated variables end up at a
    /// constant offset from their companions.
    pub fn assign_vertex_ids(mut self) -> Self {
        let n = self.vars.len();
        self.layout = vec![IdRange { lo: 0, hi: 0 }; n];
        let mut cursor = 0u64;
        for rv in (0..n).rev() {
            let flat = self.vars[rv].flat;
            self.layout[rv] = IdRange {
                lo: cursor,
                hi: cursor + flat,
            };
            cursor += flat;
        }
        self.total_vertices = cursor;
        self.interval_starts = self
            .layout
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(rv, r)| (r.lo, rv))
            .collect();
        self.interval_starts.sort_unstable();
        self
    }

    pub fn tree(&self) -> &PlateTree {
        &self.tree
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, rv: RvId) -> &GroundVariable {
        &self.vars[rv]
    }

    pub fn vars(&self) -> &[GroundVariable] {
        &self.vars
    }

    pub fn plate_instances(&self, plate: PlateId) -> &PlateInstances {
        &self.sizes[plate]
    }

    pub fn bindings(&self) -> &BTreeMap<String, Binding> {
        &self.names
    }

    /// Resolve a user-facing variable name to its id.
    pub fn rv_by_name(&self, name: &str) -> Option<RvId> {
        match self.names.get(name) {
            Some(Binding::Rv(rv)) => Some(*rv),
            _ => self.vars.iter().position(|v| v.name == name),
        }
    }

    pub fn layout_assigned(&self) -> bool {
        !self.layout.is_empty()
    }

    pub fn interval(&self, rv: RvId) -> IdRange {
        assert!(self.layout_assigned(), "call assign_vertex_ids first");
        self.layout[rv]
    }

    pub fn total_vertices(&self) -> u64 {
        assert!(self.layout_assigned(), "call assign_vertex_ids first");
        self.total_vertices
    }

    /// Which variable owns a vertex ID (binary search over interval starts).
    pub fn owner_of(&self, id: u64) -> RvId {
        assert!(id < self.total_vertices, "vertex id out of range");
        let pos = self.interval_starts.partition_point(|&(lo, _)| lo <= id);
        self.interval_starts[pos - 1].1
    }

    /// The companion of `id` in a co-plated variable: the instance of
    /// `target` with the same plate position.
    pub fn companion(&self, id: u64, target: RvId) -> u64 {
        let owner = self.owner_of(id);
        debug_assert_eq!(
            self.tree.rv(owner).plate,
            self.tree.rv(target).plate,
            "companion lookup requires co-plated variables"
        );
        self.layout[target].lo + (id - self.layout[owner].lo)
    }

    /// Project a flattened instance index at `from` onto an ancestor plate
    /// `to` (each step is a prefix-sum binary search).
    pub fn project(&self, mut idx: u64, from: PlateId, to: PlateId) -> u64 {
        let mut cur = from;
        while cur != to {
            idx = self.sizes[cur].rep_of(idx);
            cur = self
                .tree
                .plate(cur)
                .parent
                .expect("projection target must be an ancestor plate");
        }
        idx
    }

    /// For instance `i` of a categorical variable, the instance index of a
    /// direct parent (or the selector of a mixture).
    pub fn ancestor_instance(&self, child: RvId, i: u64, parent: RvId) -> u64 {
        self.project(i, self.tree.rv(child).plate, self.tree.rv(parent).plate)
    }

    /// For instance `i` of a mixture child, the flat index of component 0
    /// of the matched repetition, plus the (uniform) component count.
    pub fn component_block(&self, child: RvId, i: u64, component: RvId) -> (u64, u64) {
        let axis = self.tree.rv(component).plate;
        let axis_parent = self.tree.plate(axis).parent.expect("axis below TOPLEVEL");
        let rep = self.project(i, self.tree.rv(child).plate, axis_parent);
        let inst = &self.sizes[axis];
        (inst.prefix[rep as usize], inst.rep_sizes[rep as usize])
    }

    /// Component ordinal of a component-variable instance within its
    /// mixture axis repetition.
    pub fn component_ordinal(&self, component: RvId, j: u64) -> u64 {
        let axis = self.tree.rv(component).plate;
        let inst = &self.sizes[axis];
        j - inst.prefix[inst.rep_of(j) as usize]
    }
}

fn eval_index(
    e: &super::template::DetExpr,
    params: &BTreeMap<String, f64>,
    what: &str,
) -> Result<u64, BindError> {
    let v = e
        .eval(params)
        .ok_or_else(|| BindError::DomainError(format!("unresolved {what}")))?;
    if !v.is_finite() || v.fract() != 0.0 {
        return Err(BindError::DomainError(format!(
            "{what} must be an integer, got {v}"
        )));
    }
    if v < 0.0 {
        return Err(BindError::DomainError(format!(
            "{what} must be non-negative, got {v}"
        )));
    }
    Ok(v as u64)
}

fn walk_obs(
    node: &ObsData,
    level: usize,
    axes: &[PlateId],
    constraints: &mut BTreeMap<PlateId, Vec<u64>>,
    flat: &mut Vec<u32>,
    name: &str,
) -> Result<u64, BindError> {
    let depth = axes.len();
    match node {
        ObsData::Values(v) if depth == 0 || level == depth - 1 => {
            flat.extend_from_slice(v);
            Ok(v.len() as u64)
        }
        ObsData::Groups(g) if level + 1 < depth => {
            for child in g {
                let len = walk_obs(child, level + 1, axes, constraints, flat, name)?;
                constraints.entry(axes[level + 1]).or_default().push(len);
            }
            Ok(g.len() as u64)
        }
        ObsData::Values(_) => Err(BindError::ShapeMismatch(format!(
            "observations for `{name}` are nested {} levels deep but a plain list \
             appears at level {level}",
            depth
        ))),
        ObsData::Groups(_) => Err(BindError::ShapeMismatch(format!(
            "observations for `{name}` must be nested exactly {} levels deep",
            depth
        ))),
    }
}

impl TypedModel {
    /// Name-keyed convenience wrapper over [`GroundNetwork::bind`].
    pub fn bind(
        &self,
        param_values: &BTreeMap<String, f64>,
        observations: &BTreeMap<String, ObsData>,
        plate_overrides: &BTreeMap<String, u64>,
    ) -> Result<GroundNetwork, BindError> {
        let mut obs_by_rv = BTreeMap::new();
        for (name, data) in observations {
            match self.bindings.get(name) {
                Some(Binding::Rv(rv)) => {
                    obs_by_rv.insert(*rv, data.clone());
                }
                Some(_) => return Err(BindError::NotObservable(name.clone())),
                None => return Err(BindError::UnknownVariable(name.clone())),
            }
        }
        let mut overrides_by_sym = BTreeMap::new();
        for (name, &size) in plate_overrides {
            let sym = match self.bindings.get(name) {
                Some(Binding::UnknownPlate(s)) => *s,
                Some(Binding::Rv(rv)) => {
                    match &self.tree.plate(self.tree.rv(*rv).plate).size {
                        SizeSpec::Unknown(s) => *s,
                        _ => {
                            return Err(BindError::ShapeMismatch(format!(
                                "`{name}` is not inside a `?` plate; its size is fixed"
                            )))
                        }
                    }
                }
                Some(_) => {
                    return Err(BindError::ShapeMismatch(format!(
                        "`{name}` does not name a plate or a plated variable"
                    )))
                }
                None => return Err(BindError::UnknownVariable(name.clone())),
            };
            overrides_by_sym.insert(sym, size);
        }
        GroundNetwork::bind(
            &self.tree,
            &self.bindings,
            &self.param_kinds,
            param_values,
            &obs_by_rv,
            &overrides_by_sym,
        )
    }
}
