//! Posterior-state snapshots.
//!
//! A snapshot carries the iteration counter, the seed, and every
//! variational parameter, serialized as JSON. `f64` values survive the
//! round trip exactly (shortest-representation printing, exact parsing),
//! so resuming from a snapshot reproduces the state bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EngineError, VarMatrix, VmpEngine};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub iteration: u64,
    pub seed: u64,
    /// Keyed by internal variable name; one row per instance.
    pub dirichlet: BTreeMap<String, Vec<Vec<f64>>>,
    pub categorical: BTreeMap<String, Vec<Vec<f64>>>,
}

impl VmpEngine {
    pub fn snapshot(&self) -> Snapshot {
        let net = self.graph.net();
        let mut dirichlet = BTreeMap::new();
        let mut categorical = BTreeMap::new();
        let rows = |m: &VarMatrix| -> Vec<Vec<f64>> {
            (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
        };
        for rv in 0..net.n_vars() {
            let key = net.tree().rv(rv).internal_name.clone();
            if let Some(m) = &self.dirichlet_post[rv] {
                dirichlet.insert(key, rows(m));
            } else if let Some(m) = &self.cat_q[rv] {
                categorical.insert(key, rows(m));
            }
        }
        Snapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            iteration: self.iteration,
            seed: self.seed,
            dirichlet,
            categorical,
        }
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), EngineError> {
        let json = serde_json::to_string(&self.snapshot())
            .map_err(|e| EngineError::Snapshot(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| EngineError::Snapshot(e.to_string()))
    }

    /// Restore variational state from a snapshot taken on the same model
    /// and data. The engine continues from the recorded iteration.
    pub fn restore_snapshot(&mut self, snap: &Snapshot) -> Result<(), EngineError> {
        if snap.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(EngineError::Snapshot(format!(
                "unsupported snapshot schema {}",
                snap.schema_version
            )));
        }
        let net = self.graph.net().clone();
        let load = |rows: &Vec<Vec<f64>>, dim: usize, flat: u64| -> Result<VarMatrix, EngineError> {
            if rows.len() as u64 != flat || rows.iter().any(|r| r.len() != dim) {
                return Err(EngineError::Snapshot(
                    "snapshot shape does not match this network".into(),
                ));
            }
            let mut m = VarMatrix::zeros(flat as usize, dim);
            for (i, r) in rows.iter().enumerate() {
                m.data[i * dim..(i + 1) * dim].copy_from_slice(r);
            }
            Ok(m)
        };
        for rv in 0..net.n_vars() {
            let var = net.var(rv);
            if var.observed.is_some() {
                continue;
            }
            let key = &net.tree().rv(rv).internal_name;
            if var.prior.is_some() {
                let rows = snap.dirichlet.get(key).ok_or_else(|| {
                    EngineError::Snapshot(format!("snapshot is missing `{key}`"))
                })?;
                self.dirichlet_post[rv] = Some(load(rows, var.dim, var.flat)?);
                self.refresh_exp_log(rv);
            } else {
                let rows = snap.categorical.get(key).ok_or_else(|| {
                    EngineError::Snapshot(format!("snapshot is missing `{key}`"))
                })?;
                self.cat_q[rv] = Some(load(rows, var.dim, var.flat)?);
            }
        }
        self.refresh_observed_caches();
        self.iteration = snap.iteration;
        self.seed = snap.seed;
        let elbo = self.compute_elbo()?;
        self.elbo_trace = vec![(self.iteration, elbo)];
        Ok(())
    }

    pub fn load_snapshot(&mut self, path: &Path) -> Result<(), EngineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| EngineError::Snapshot(e.to_string()))?;
        let snap: Snapshot =
            serde_json::from_str(&text).map_err(|e| EngineError::Snapshot(e.to_string()))?;
        self.restore_snapshot(&snap)
    }
}
