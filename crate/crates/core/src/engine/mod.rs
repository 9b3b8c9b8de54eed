//! The variational message passing engine.
//!
//! The engine owns the mutable variational state of a message passing
//! graph and advances it through the substeps of a derived schedule.
//! Latent Dirichlet vertices hold pseudo-count posteriors, latent
//! categorical vertices hold responsibility vectors, and observed
//! vertices hold cached outgoing messages that are recomputed in refresh
//! substeps.
//!
//! Aggregation is partition-local: every substep first folds each logical
//! partition's inbound messages into a partial sum (messages in ascending
//! source order), then combines the partials in ascending partition
//! order. Partitions may be folded concurrently; the combination order is
//! fixed, so a parallel run reproduces the single-threaded result bit for
//! bit.

pub mod schedule;
pub mod snapshot;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bn::{GroundNetwork, ParentRef, RvId};
use crate::expfam::{
    digamma, elbo_categorical_terms, ln_beta, update_categorical, CategoricalPosterior,
    DirichletParams, ElboAccumulator, NumericError,
};
use crate::mpg::{EdgeKind, MessagePassingGraph, MpgEdge, PartitionAssignment};

pub use schedule::{derive_schedule, Substep, UpdateSchedule};
pub use snapshot::Snapshot;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("non-finite message at iteration {iteration}, variable `{variable}`: {detail}")]
    NonFiniteMessage {
        iteration: u64,
        variable: String,
        detail: String,
    },
    #[error("model has a dependency cycle")]
    CyclicModel,
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{0}` is observed and has no posterior")]
    ObservedVariable(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

/// Dense per-variable state: `flat` rows of `dim` components.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct VarMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl VarMatrix {
    fn zeros(flat: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; flat * dim],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }
}

/// Deterministic 64-bit generator (splitmix64) used for initialization
/// noise.
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        crate::mpg::mix64(self.state)
    }

    /// Uniform in [0, 1).
    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone)]
pub struct InferOptions {
    /// Worker threads for partition folding; 1 runs fully sequentially.
    pub workers: usize,
    /// Skip initialization noise: categorical posteriors start exactly
    /// uniform.
    pub zero_noise: bool,
    /// Write a state snapshot every `k` iterations.
    pub snapshot_every: Option<u64>,
    pub snapshot_path: Option<std::path::PathBuf>,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            zero_noise: false,
            snapshot_every: None,
            snapshot_path: None,
        }
    }
}

/// Approximate marginal posteriors plus the ELBO trace of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSet {
    /// Latent variables only: per instance, the Dirichlet pseudo-counts or
    /// the categorical probabilities.
    pub per_variable: BTreeMap<String, Vec<Vec<f64>>>,
    /// Observed variable names (they have no posterior).
    pub observed: BTreeSet<String>,
    /// (iteration, elbo), starting with the post-initialization entry.
    pub elbo_trace: Vec<(u64, f64)>,
    pub iterations_run: u64,
}

impl PosteriorSet {
    /// Posterior parameters of a latent variable, ordered by instance.
    pub fn get_result(&self, name: &str) -> Result<&Vec<Vec<f64>>, EngineError> {
        if let Some(rows) = self.per_variable.get(name) {
            return Ok(rows);
        }
        if self.observed.contains(name) {
            return Err(EngineError::ObservedVariable(name.to_string()));
        }
        Err(EngineError::UnknownVariable(name.to_string()))
    }

    pub fn final_elbo(&self) -> f64 {
        self.elbo_trace.last().map(|&(_, e)| e).unwrap_or(f64::NAN)
    }
}

/// The built-in stopping rule: stop once the relative ELBO improvement
/// falls below `threshold`.
pub fn relative_elbo_stop(threshold: f64) -> impl FnMut(u64, f64) -> bool {
    let mut last: Option<f64> = None;
    move |_iteration, elbo| {
        let go = match last {
            Some(prev) => (elbo - prev).abs() >= (threshold * prev).abs(),
            None => true,
        };
        last = Some(elbo);
        go
    }
}

pub struct VmpEngine {
    graph: Arc<MessagePassingGraph>,
    assignment: PartitionAssignment,
    schedule: UpdateSchedule,
    pool: Option<rayon::ThreadPool>,
    seed: u64,
    iteration: u64,
    elbo_trace: Vec<(u64, f64)>,
    options: InferOptions,

    dirichlet_post: Vec<Option<VarMatrix>>,
    exp_log: Vec<Option<VarMatrix>>,
    cat_q: Vec<Option<VarMatrix>>,
    /// Observed mixture children: message to the selector, one row per
    /// instance, `selector dim` wide.
    cache_to_selector: Vec<Option<VarMatrix>>,
    /// Observed mixture children: copy of the selector's responsibilities.
    cache_resp: Vec<Option<VarMatrix>>,
    /// Inbound edge indices per latent variable per partition.
    var_part_edges: Vec<Vec<Vec<u32>>>,
}

impl VmpEngine {
    pub fn new(
        graph: Arc<MessagePassingGraph>,
        assignment: PartitionAssignment,
        seed: u64,
        options: InferOptions,
    ) -> Result<Self, EngineError> {
        assert_eq!(
            assignment.edge_to_part.len(),
            graph.edge_count(),
            "assignment does not cover this graph"
        );
        let net = graph.net().clone();
        let schedule = derive_schedule(&net)?;
        let n = net.n_vars();

        let mut var_part_edges = vec![Vec::new(); n];
        for rv in 0..n {
            if net.var(rv).observed.is_some() {
                continue;
            }
            let mut per_part = vec![Vec::new(); assignment.m as usize];
            for idx in graph.inbound_range_of_var(rv) {
                per_part[assignment.edge_to_part[idx] as usize].push(idx as u32);
            }
            var_part_edges[rv] = per_part;
        }

        let pool = if options.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(options.workers)
                    .build()
                    .expect("worker pool"),
            )
        } else {
            None
        };

        let mut engine = Self {
            graph,
            assignment,
            schedule,
            pool,
            seed,
            iteration: 0,
            elbo_trace: Vec::new(),
            options,
            dirichlet_post: vec![None; n],
            exp_log: vec![None; n],
            cat_q: vec![None; n],
            cache_to_selector: vec![None; n],
            cache_resp: vec![None; n],
            var_part_edges,
        };
        engine.init_state();
        let elbo = engine.compute_elbo()?;
        engine.elbo_trace.push((0, elbo));
        Ok(engine)
    }

    fn net(&self) -> &GroundNetwork {
        self.graph.net()
    }

    /// Set Dirichlet posteriors to their priors and categorical
    /// responsibilities to a uniform vector perturbed by multiplicative
    /// noise `exp(eps)`, `eps ~ U(-0.01, 0.01)` from the seeded generator,
    /// then renormalized. Vertices are visited in variable order, then
    /// instance order, then component order.
    fn init_state(&mut self) {
        let net = self.net().clone();
        let mut rng = SplitMix64::new(self.seed);
        for rv in 0..net.n_vars() {
            let var = net.var(rv);
            if var.observed.is_some() {
                continue;
            }
            let flat = var.flat as usize;
            if let Some(prior) = &var.prior {
                let mut m = VarMatrix::zeros(flat, var.dim);
                for i in 0..flat {
                    m.row_mut(i).copy_from_slice(prior);
                }
                self.dirichlet_post[rv] = Some(m);
                self.refresh_exp_log(rv);
            } else {
                let mut m = VarMatrix::zeros(flat, var.dim);
                let base = 1.0 / var.dim as f64;
                for i in 0..flat {
                    let row = m.row_mut(i);
                    let mut total = 0.0;
                    for c in row.iter_mut() {
                        let eps = if self.options.zero_noise {
                            0.0
                        } else {
                            (rng.next_f64() * 2.0 - 1.0) * 0.01
                        };
                        *c = base * eps.exp();
                        total += *c;
                    }
                    for c in row.iter_mut() {
                        *c /= total;
                    }
                }
                self.cat_q[rv] = Some(m);
            }
        }
        self.refresh_observed_caches();
    }

    fn refresh_exp_log(&mut self, rv: RvId) {
        let post = self.dirichlet_post[rv].as_ref().expect("dirichlet state");
        let mut out = VarMatrix::zeros(post.rows(), post.dim);
        for i in 0..post.rows() {
            let row = post.row(i);
            let total: f64 = row.iter().sum();
            let psi_total = digamma(total).expect("positive pseudo-counts");
            let dst = out.row_mut(i);
            for (d, &a) in dst.iter_mut().zip(row) {
                *d = digamma(a).expect("positive pseudo-counts") - psi_total;
            }
        }
        self.exp_log[rv] = Some(out);
    }

    /// Recompute the cached outgoing messages of every observed vertex:
    /// the expected log-likelihood per candidate component (message to the
    /// selector) and a copy of the selector's responsibilities.
    fn refresh_observed_caches(&mut self) {
        let net = self.net().clone();
        for rv in 0..net.n_vars() {
            let var = net.var(rv);
            let Some(obs) = &var.observed else { continue };
            let Some(ParentRef::Mixture {
                component,
                selector,
            }) = net.tree().rv(rv).parent_ref()
            else {
                continue;
            };
            let k = net.var(selector).dim;
            let flat = var.flat as usize;
            let mut to_sel = VarMatrix::zeros(flat, k);
            let mut resp = VarMatrix::zeros(flat, k);
            let comp_exp_log = self.exp_log[component].as_ref().expect("component state");
            for i in 0..flat {
                let (base, arity) = net.component_block(rv, i as u64, component);
                debug_assert_eq!(arity as usize, k);
                let val = obs[i] as usize;
                let row = to_sel.row_mut(i);
                for (t, slot) in row.iter_mut().enumerate() {
                    *slot = comp_exp_log.row(base as usize + t)[val];
                }
                let sel_inst = net.ancestor_instance(rv, i as u64, selector) as usize;
                let resp_row = resp.row_mut(i);
                match &net.var(selector).observed {
                    Some(sel_obs) => resp_row[sel_obs[sel_inst] as usize] = 1.0,
                    None => resp_row.copy_from_slice(
                        self.cat_q[selector].as_ref().expect("selector state").row(sel_inst),
                    ),
                }
            }
            self.cache_to_selector[rv] = Some(to_sel);
            self.cache_resp[rv] = Some(resp);
        }
    }

    /// Fold one partition's inbound messages for variable `rv` into a
    /// dense partial sum, in ascending source order.
    fn partial_for(&self, rv: RvId, edge_indices: &[u32]) -> VarMatrix {
        let net = self.net();
        let var = net.var(rv);
        let lo = net.interval(rv).lo;
        let mut partial = VarMatrix::zeros(var.flat as usize, var.dim);
        for &idx in edge_indices {
            let e = &self.graph.edges()[idx as usize];
            let row = partial.row_mut((e.dst - lo) as usize);
            self.accumulate_edge(e, row);
        }
        partial
    }

    fn accumulate_edge(&self, e: &MpgEdge, out: &mut [f64]) {
        let net = self.net();
        let src_inst = (e.src - net.interval(e.src_var).lo) as usize;
        let dst_inst = (e.dst - net.interval(e.dst_var).lo) as usize;
        match e.kind {
            EdgeKind::DirectChild => match &net.var(e.src_var).observed {
                Some(obs) => out[obs[src_inst] as usize] += 1.0,
                None => {
                    let q = self.cat_q[e.src_var].as_ref().expect("child state").row(src_inst);
                    for (o, &v) in out.iter_mut().zip(q) {
                        *o += v;
                    }
                }
            },
            EdgeKind::MixtureChild => {
                let ord = net.component_ordinal(e.dst_var, dst_inst as u64) as usize;
                match &net.var(e.src_var).observed {
                    Some(obs) => {
                        let resp = self.cache_resp[e.src_var]
                            .as_ref()
                            .expect("observed cache")
                            .row(src_inst)[ord];
                        out[obs[src_inst] as usize] += resp;
                    }
                    None => {
                        let Some(ParentRef::Mixture { selector, .. }) =
                            net.tree().rv(e.src_var).parent_ref()
                        else {
                            unreachable!("mixture child has a mixture parent");
                        };
                        let sel_inst =
                            net.ancestor_instance(e.src_var, src_inst as u64, selector) as usize;
                        let w = self.cat_q[selector]
                            .as_ref()
                            .expect("selector state")
                            .row(sel_inst)[ord];
                        let q = self.cat_q[e.src_var].as_ref().expect("child state").row(src_inst);
                        for (o, &v) in out.iter_mut().zip(q) {
                            *o += w * v;
                        }
                    }
                }
            }
            EdgeKind::DirectParent => {
                let el = self.exp_log[e.src_var].as_ref().expect("parent state").row(src_inst);
                for (o, &v) in out.iter_mut().zip(el) {
                    *o += v;
                }
            }
            EdgeKind::MixtureComponent => {
                let Some(ParentRef::Mixture { selector, .. }) =
                    net.tree().rv(e.dst_var).parent_ref()
                else {
                    unreachable!("mixture component edge points at a mixture child");
                };
                let ord = net.component_ordinal(e.src_var, src_inst as u64) as usize;
                let sel_inst = net.ancestor_instance(e.dst_var, dst_inst as u64, selector) as usize;
                let w = self.cat_q[selector].as_ref().expect("selector state").row(sel_inst)[ord];
                let el = self.exp_log[e.src_var].as_ref().expect("component state").row(src_inst);
                for (o, &v) in out.iter_mut().zip(el) {
                    *o += w * v;
                }
            }
            EdgeKind::SelectorChild => match self.cache_to_selector[e.src_var].as_ref() {
                Some(cache) => {
                    for (o, &v) in out.iter_mut().zip(cache.row(src_inst)) {
                        *o += v;
                    }
                }
                None => {
                    // Latent mixture child: expected log-likelihood of its
                    // value distribution under each candidate component.
                    let Some(ParentRef::Mixture { component, .. }) =
                        net.tree().rv(e.src_var).parent_ref()
                    else {
                        unreachable!("selector edge from a mixture child");
                    };
                    let (base, k) = net.component_block(e.src_var, src_inst as u64, component);
                    let q = self.cat_q[e.src_var].as_ref().expect("child state").row(src_inst);
                    let comp = self.exp_log[component].as_ref().expect("component state");
                    for (j, o) in out.iter_mut().enumerate().take(k as usize) {
                        let el = comp.row(base as usize + j);
                        *o += q.iter().zip(el).map(|(&a, &b)| a * b).sum::<f64>();
                    }
                }
            },
            EdgeKind::SelectorParent => {
                // The selector's influence on a mixture child enters as the
                // weights of the component messages; no separate payload.
            }
        }
    }

    /// Aggregate and apply one update substep variable.
    fn update_var(&mut self, rv: RvId) -> Result<(), EngineError> {
        let net = self.net().clone();
        let var = net.var(rv).clone();
        let per_part = &self.var_part_edges[rv];
        let flat = var.flat as usize;
        let mut acc = VarMatrix::zeros(flat, var.dim);

        let partials: Vec<Option<VarMatrix>> = match &self.pool {
            Some(pool) => pool.install(|| {
                per_part
                    .par_iter()
                    .map(|edges| {
                        if edges.is_empty() {
                            None
                        } else {
                            Some(self.partial_for(rv, edges))
                        }
                    })
                    .collect()
            }),
            None => per_part
                .iter()
                .map(|edges| {
                    if edges.is_empty() {
                        None
                    } else {
                        Some(self.partial_for(rv, edges))
                    }
                })
                .collect(),
        };
        // Combine partial sums in ascending partition order.
        for partial in partials.into_iter().flatten() {
            for (a, b) in acc.data.iter_mut().zip(&partial.data) {
                *a += b;
            }
        }

        let non_finite = |detail: String| EngineError::NonFiniteMessage {
            iteration: self.iteration + 1,
            variable: var.name.clone(),
            detail,
        };

        if let Some(prior) = &var.prior {
            let mut post = acc;
            for i in 0..flat {
                let row = post.row_mut(i);
                for (p, &pr) in row.iter_mut().zip(prior) {
                    *p += pr;
                }
                if row.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(non_finite(format!("pseudo-counts {row:?}")));
                }
            }
            self.dirichlet_post[rv] = Some(post);
            self.refresh_exp_log(rv);
        } else {
            let mut q = VarMatrix::zeros(flat, var.dim);
            for i in 0..flat {
                let logits = acc.row(i);
                let posterior = update_categorical(logits)
                    .map_err(|e| non_finite(format!("logits {logits:?}: {e}")))?;
                q.row_mut(i).copy_from_slice(posterior.probs());
            }
            self.cat_q[rv] = Some(q);
        }
        Ok(())
    }

    /// Execute one substep: either a refresh of observed caches or a
    /// parameter update of every variable in the substep.
    pub fn run_substep(&mut self, substep: &Substep) -> Result<(), EngineError> {
        if substep.refresh {
            self.refresh_observed_caches();
            return Ok(());
        }
        for &rv in &substep.vars {
            self.update_var(rv)?;
        }
        Ok(())
    }

    /// Evidence lower bound of the current state.
    ///
    /// Latent Dirichlet vertices contribute `-KL(q || prior)`; latent
    /// categorical vertices contribute their expected log-conditional and
    /// entropy with the expected log-likelihood of their observed children
    /// folded in; observed vertices without a latent selector contribute
    /// their expected log-likelihood directly.
    pub fn compute_elbo(&self) -> Result<f64, EngineError> {
        let net = self.net();
        let mut acc = ElboAccumulator::default();
        for rv in 0..net.n_vars() {
            let var = net.var(rv);
            match (&var.prior, &var.observed) {
                (Some(prior), None) => {
                    let post = self.dirichlet_post[rv].as_ref().expect("dirichlet state");
                    let exp_log = self.exp_log[rv].as_ref().expect("expected logs");
                    let ln_b_prior = ln_beta(prior);
                    for i in 0..post.rows() {
                        let row = post.row(i);
                        let el = exp_log.row(i);
                        let e_ln_p: f64 = -ln_b_prior
                            + prior.iter().zip(el).map(|(&a, &e)| (a - 1.0) * e).sum::<f64>();
                        let e_ln_q: f64 = -ln_beta(row)
                            + row.iter().zip(el).map(|(&a, &e)| (a - 1.0) * e).sum::<f64>();
                        acc.expected_log_joint += e_ln_p;
                        acc.neg_entropy += e_ln_q;
                    }
                }
                (None, None) => {
                    // Latent categorical: parent term + folded observed
                    // children - entropy.
                    let q = self.cat_q[rv].as_ref().expect("categorical state");
                    let lo = net.interval(rv).lo;
                    for i in 0..q.rows() {
                        let mut parent = vec![0.0; var.dim];
                        self.parent_term(rv, i, &mut parent);
                        let mut children = vec![0.0; var.dim];
                        for e in self.graph.inbound(lo + i as u64) {
                            if e.kind == EdgeKind::SelectorChild
                                && net.var(e.src_var).observed.is_some()
                            {
                                let cache = self.cache_to_selector[e.src_var]
                                    .as_ref()
                                    .expect("observed cache");
                                let src_inst = (e.src - net.interval(e.src_var).lo) as usize;
                                for (c, &v) in children.iter_mut().zip(cache.row(src_inst)) {
                                    *c += v;
                                }
                            }
                        }
                        let posterior = CategoricalPosterior::new(q.row(i).to_vec())?;
                        let term = elbo_categorical_terms(&posterior, &parent, &children)?;
                        // term = E_q[ln p] - E_q[ln q]; split the entropy out
                        // so the accumulator fields stay meaningful.
                        let neg_ent: f64 = q
                            .row(i)
                            .iter()
                            .filter(|&&p| p > 0.0)
                            .map(|&p| p * p.ln())
                            .sum();
                        acc.expected_log_joint += term + neg_ent;
                        acc.neg_entropy += neg_ent;
                    }
                }
                (None, Some(obs)) => {
                    // Observed categorical: contributes directly unless a
                    // latent selector folds it in.
                    match net.tree().rv(rv).parent_ref() {
                        Some(ParentRef::Mixture { selector, .. })
                            if net.var(selector).observed.is_none() =>
                        {
                            // Folded into the selector's term.
                        }
                        Some(ParentRef::Mixture {
                            component,
                            selector,
                        }) => {
                            let sel_obs =
                                net.var(selector).observed.as_ref().expect("observed selector");
                            let comp = self.exp_log[component].as_ref().expect("component state");
                            for (i, &val) in obs.iter().enumerate() {
                                let (base, _) = net.component_block(rv, i as u64, component);
                                let sel_inst =
                                    net.ancestor_instance(rv, i as u64, selector) as usize;
                                let j = sel_obs[sel_inst] as usize;
                                acc.expected_log_joint +=
                                    comp.row(base as usize + j)[val as usize];
                            }
                        }
                        Some(ParentRef::Direct { rv: p }) => {
                            let el = self.exp_log[p].as_ref().expect("parent state");
                            for (i, &val) in obs.iter().enumerate() {
                                let inst = net.ancestor_instance(rv, i as u64, p) as usize;
                                acc.expected_log_joint += el.row(inst)[val as usize];
                            }
                        }
                        None => unreachable!("observed variables are categorical"),
                    }
                }
                (Some(_), Some(_)) => unreachable!("Dirichlet variables cannot be observed"),
            }
        }
        let elbo = acc.elbo();
        if !elbo.is_finite() {
            return Err(EngineError::NonFiniteMessage {
                iteration: self.iteration,
                variable: "<elbo>".into(),
                detail: format!("elbo = {elbo}"),
            });
        }
        Ok(elbo)
    }

    /// Expected log of the parent distribution at instance `i` of a latent
    /// categorical variable.
    fn parent_term(&self, rv: RvId, i: usize, out: &mut [f64]) {
        let net = self.net();
        match net.tree().rv(rv).parent_ref() {
            Some(ParentRef::Direct { rv: p }) => {
                let inst = net.ancestor_instance(rv, i as u64, p) as usize;
                out.copy_from_slice(self.exp_log[p].as_ref().expect("parent state").row(inst));
            }
            Some(ParentRef::Mixture {
                component,
                selector,
            }) => {
                let (base, k) = net.component_block(rv, i as u64, component);
                let sel_inst = net.ancestor_instance(rv, i as u64, selector) as usize;
                let weights = self.cat_q[selector].as_ref().expect("selector state").row(sel_inst);
                let comp = self.exp_log[component].as_ref().expect("component state");
                for j in 0..k as usize {
                    let el = comp.row(base as usize + j);
                    for (o, &v) in out.iter_mut().zip(el) {
                        *o += weights[j] * v;
                    }
                }
            }
            None => unreachable!("latent categorical has a parent"),
        }
    }

    pub fn schedule(&self) -> &UpdateSchedule {
        &self.schedule
    }

    pub fn assignment(&self) -> &PartitionAssignment {
        &self.assignment
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn elbo_trace(&self) -> &[(u64, f64)] {
        &self.elbo_trace
    }

    /// Run up to `max_iters` additional full iterations, invoking the
    /// callback after initialization and after every iteration; the run
    /// stops early when the callback returns false.
    pub fn infer(
        &mut self,
        max_iters: u64,
        mut callback: impl FnMut(u64, f64) -> bool,
    ) -> Result<PosteriorSet, EngineError> {
        let last = self
            .elbo_trace
            .last()
            .map(|&(_, e)| e)
            .expect("post-initialization trace entry");
        if callback(self.iteration, last) {
            for _ in 0..max_iters {
                let schedule = self.schedule.clone();
                for substep in &schedule.substeps {
                    self.run_substep(substep)?;
                }
                self.iteration += 1;
                let elbo = self.compute_elbo()?;
                self.elbo_trace.push((self.iteration, elbo));
                if let (Some(every), Some(path)) =
                    (self.options.snapshot_every, self.options.snapshot_path.clone())
                {
                    if every > 0 && self.iteration % every == 0 {
                        self.save_snapshot(&path)?;
                    }
                }
                if !callback(self.iteration, elbo) {
                    break;
                }
            }
        }
        Ok(self.posteriors())
    }

    /// Snapshot the current posteriors into a `PosteriorSet`.
    pub fn posteriors(&self) -> PosteriorSet {
        let net = self.net();
        let mut per_variable = BTreeMap::new();
        let mut observed = BTreeSet::new();
        for rv in 0..net.n_vars() {
            let var = net.var(rv);
            if var.observed.is_some() {
                observed.insert(var.name.clone());
                continue;
            }
            let m = match (&self.dirichlet_post[rv], &self.cat_q[rv]) {
                (Some(m), _) | (_, Some(m)) => m,
                _ => unreachable!("latent variable has state"),
            };
            let rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
            per_variable.insert(var.name.clone(), rows);
        }
        PosteriorSet {
            per_variable,
            observed,
            elbo_trace: self.elbo_trace.clone(),
            iterations_run: self.iteration,
        }
    }

    /// Current Dirichlet posterior of one variable (testing and snapshots).
    pub fn dirichlet_posterior(&self, rv: RvId) -> Option<Vec<DirichletParams>> {
        let m = self.dirichlet_post[rv].as_ref()?;
        Some(
            (0..m.rows())
                .map(|i| DirichletParams::new(m.row(i).to_vec()).expect("valid posterior"))
                .collect(),
        )
    }
}

/// One-call convenience: schedule, initialize, iterate.
pub fn infer(
    graph: Arc<MessagePassingGraph>,
    assignment: PartitionAssignment,
    max_iters: u64,
    seed: u64,
    options: InferOptions,
    callback: impl FnMut(u64, f64) -> bool,
) -> Result<PosteriorSet, EngineError> {
    let mut engine = VmpEngine::new(graph, assignment, seed, options)?;
    engine.infer(max_iters, callback)
}
