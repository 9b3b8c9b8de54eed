//! Parallel-safe update schedules.
//!
//! One iteration updates every vertex at least once, split into substeps
//! so that no two variables updated together exchange messages. Dirichlet
//! variables never message each other (their priors are constants), so
//! they form the first substep. Observed vertices have no variational
//! state; their cached outgoing messages are refreshed in dedicated
//! substeps after every update layer. Latent categoricals are layered by
//! selector chains (a mixture child waits for its selector).
//!
//! For the two-coin mixture this yields exactly
//! `(pi and phi) -> x -> z -> x`.

use crate::bn::{GroundNetwork, ParentRef, RvId};

use super::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substep {
    pub vars: Vec<RvId>,
    /// True when this substep refreshes the cached messages of observed
    /// vertices instead of updating variational parameters.
    pub refresh: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateSchedule {
    pub substeps: Vec<Substep>,
}

pub fn derive_schedule(net: &GroundNetwork) -> Result<UpdateSchedule, EngineError> {
    let n = net.n_vars();
    let observed: Vec<RvId> = (0..n).filter(|&rv| net.var(rv).observed.is_some()).collect();
    let latent_dirichlet: Vec<RvId> = (0..n)
        .filter(|&rv| net.tree().rv(rv).is_dirichlet())
        .collect();

    // Layer latent categoricals by the longest chain of categorical
    // dependencies (a mixture child depends on its selector).
    let mut depth = vec![0usize; n];
    for rv in 0..n {
        if net.tree().rv(rv).is_dirichlet() || net.var(rv).observed.is_some() {
            continue;
        }
        let d = match net.tree().rv(rv).parent_ref() {
            Some(ParentRef::Mixture { selector, .. })
                if net.var(selector).observed.is_none()
                    && !net.tree().rv(selector).is_dirichlet() =>
            {
                if selector >= rv {
                    // Creation order is topological; anything else would be
                    // a cycle.
                    return Err(EngineError::CyclicModel);
                }
                depth[selector] + 1
            }
            _ => 1,
        };
        depth[rv] = d;
    }
    let max_depth = depth.iter().copied().max().unwrap_or(0);

    let mut substeps = Vec::new();
    let push_layer = |vars: Vec<RvId>, substeps: &mut Vec<Substep>| {
        if vars.is_empty() {
            return;
        }
        substeps.push(Substep {
            vars,
            refresh: false,
        });
        if !observed.is_empty() {
            substeps.push(Substep {
                vars: observed.clone(),
                refresh: true,
            });
        }
    };
    push_layer(latent_dirichlet, &mut substeps);
    for layer in 1..=max_depth {
        let vars: Vec<RvId> = (0..n).filter(|&rv| depth[rv] == layer).collect();
        push_layer(vars, &mut substeps);
    }
    Ok(UpdateSchedule { substeps })
}
