//! Exact-inference oracles.
//!
//! These compute evidence and marginals by closed forms and by collapsed
//! enumeration: discrete latents are enumerated while conjugate Dirichlet
//! latents are integrated out analytically (each assignment's probability
//! is a product of Dirichlet-multinomial Beta-function ratios). They are
//! independent of the message passing engine and anchor its correctness
//! at desk scale.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bn::{GroundNetwork, ParentRef, RvId};
use crate::expfam::{ln_gamma, log_sum_exp};

/// Enumeration guards, fixed constants.
pub const MAX_TWO_COIN_N: usize = 20;
pub const MAX_JOINT_STATES: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("a continuous latent cannot be collapsed: {0}")]
    UnsupportedContinuous(String),
}

/// Exact posterior summary of an enumerable instance.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExactResult {
    pub log_evidence: f64,
    /// Per latent discrete variable: one exact probability vector per
    /// instance.
    pub marginals: BTreeMap<String, Vec<Vec<f64>>>,
    /// Exact Dirichlet/Beta posterior parameters, filled when the model is
    /// conjugate-closed (no latent discrete variables).
    pub posterior_params: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Closed-form single-coin posterior: `Beta(a + H, b + N - H)`.
pub fn coin_posterior(h: u64, n: u64, a: f64, b: f64) -> Result<(f64, f64), OracleError> {
    if h > n {
        return Err(OracleError::Domain(format!("H = {h} exceeds N = {n}")));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(OracleError::Domain(format!(
            "prior parameters must be positive and finite, got ({a}, {b})"
        )));
    }
    Ok((a + h as f64, b + (n - h) as f64))
}

fn ln_beta2(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Beta priors of the two-coin model: the coin choice and the two coins.
/// Component 0 of an observation is "head".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCoinPriors {
    pub pi: [f64; 2],
    pub phi: [[f64; 2]; 2],
}

impl Default for TwoCoinPriors {
    fn default() -> Self {
        Self {
            pi: [1.0, 1.0],
            phi: [[1.0, 1.0], [1.0, 1.0]],
        }
    }
}

/// Exact two-coin evidence and z-marginals by enumerating all `2^N` coin
/// assignments; the continuous pi and phi integrate to Beta-function
/// ratios per assignment.
pub fn two_coin_evidence(
    obs: &[u32],
    priors: &TwoCoinPriors,
) -> Result<ExactResult, OracleError> {
    let n = obs.len();
    if n > MAX_TWO_COIN_N {
        return Err(OracleError::TooLarge(format!(
            "two-coin enumeration is limited to N <= {MAX_TWO_COIN_N}, got {n}"
        )));
    }
    if let Some(&bad) = obs.iter().find(|&&v| v > 1) {
        return Err(OracleError::Domain(format!(
            "two-coin observations are binary, got {bad}"
        )));
    }
    for p in [priors.pi, priors.phi[0], priors.phi[1]] {
        if p.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(OracleError::Domain(format!("invalid prior {p:?}")));
        }
    }

    let ln_b_pi = ln_beta2(priors.pi[0], priors.pi[1]);
    let ln_b_phi = [
        ln_beta2(priors.phi[0][0], priors.phi[0][1]),
        ln_beta2(priors.phi[1][0], priors.phi[1][1]),
    ];
    let mut terms = Vec::with_capacity(1usize << n);
    for mask in 0u32..(1u32 << n) {
        // counts[k][c]: observations of category c assigned to coin k
        let mut counts = [[0u64; 2]; 2];
        for (i, &x) in obs.iter().enumerate() {
            let k = ((mask >> i) & 1) as usize;
            counts[k][x as usize] += 1;
        }
        let nz = [
            (counts[0][0] + counts[0][1]) as f64,
            (counts[1][0] + counts[1][1]) as f64,
        ];
        let mut term =
            ln_beta2(priors.pi[0] + nz[0], priors.pi[1] + nz[1]) - ln_b_pi;
        for k in 0..2 {
            term += ln_beta2(
                priors.phi[k][0] + counts[k][0] as f64,
                priors.phi[k][1] + counts[k][1] as f64,
            ) - ln_b_phi[k];
        }
        terms.push(term);
    }
    let log_evidence = log_sum_exp(&terms);

    let mut z_marginals = Vec::with_capacity(n);
    for i in 0..n {
        let mut per_coin = [Vec::new(), Vec::new()];
        for (mask, &term) in terms.iter().enumerate() {
            per_coin[(mask >> i) & 1].push(term);
        }
        let m0 = (log_sum_exp(&per_coin[0]) - log_evidence).exp();
        let m1 = (log_sum_exp(&per_coin[1]) - log_evidence).exp();
        z_marginals.push(vec![m0, m1]);
    }

    let mut marginals = BTreeMap::new();
    marginals.insert("z".to_string(), z_marginals);
    Ok(ExactResult {
        log_evidence,
        marginals,
        posterior_params: BTreeMap::new(),
    })
}

/// Exact evidence and marginals of any ground network in the family, by
/// collapsed enumeration over its latent discrete variables.
pub fn enumerate_discrete(net: &GroundNetwork) -> Result<ExactResult, OracleError> {
    // Latent categorical instances, in (variable, instance) order.
    let mut slots: Vec<(RvId, u64, usize)> = Vec::new(); // (var, instance, dim)
    let mut joint: u128 = 1;
    for rv in 0..net.n_vars() {
        let var = net.var(rv);
        if var.observed.is_some() {
            continue;
        }
        if var.prior.is_some() {
            continue; // Dirichlet latents are integrated analytically.
        }
        for i in 0..var.flat {
            joint = joint.saturating_mul(var.dim as u128);
            if joint > MAX_JOINT_STATES {
                return Err(OracleError::TooLarge(format!(
                    "joint state space exceeds {MAX_JOINT_STATES}"
                )));
            }
            slots.push((rv, i, var.dim));
        }
    }
    let slot_index: BTreeMap<(RvId, u64), usize> = slots
        .iter()
        .enumerate()
        .map(|(s, &(rv, i, _))| ((rv, i), s))
        .collect();

    // Dirichlet count buffers.
    let dirichlet_vars: Vec<RvId> = (0..net.n_vars())
        .filter(|&rv| net.var(rv).prior.is_some())
        .collect();
    let mut counts: BTreeMap<RvId, Vec<f64>> = dirichlet_vars
        .iter()
        .map(|&rv| {
            let var = net.var(rv);
            (rv, vec![0.0; (var.flat as usize) * var.dim])
        })
        .collect();
    let ln_b_prior: BTreeMap<RvId, f64> = dirichlet_vars
        .iter()
        .map(|&rv| {
            let prior = net.var(rv).prior.as_ref().expect("dirichlet prior");
            (rv, ln_multibeta(prior))
        })
        .collect();

    // Categorical instances whose draws feed the counts.
    let cat_vars: Vec<RvId> = (0..net.n_vars())
        .filter(|&rv| net.var(rv).prior.is_none())
        .collect();

    let mut assignment = vec![0u32; slots.len()];
    let mut terms: Vec<f64> = Vec::new();
    let mut marg_acc: Vec<Vec<f64>> = slots
        .iter()
        .map(|&(_, _, dim)| vec![f64::NEG_INFINITY; dim])
        .collect();

    loop {
        // Evaluate the collapsed log-probability of this assignment.
        for c in counts.values_mut() {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        let value_of = |rv: RvId, inst: u64, assignment: &[u32]| -> u32 {
            match &net.var(rv).observed {
                Some(obs) => obs[inst as usize],
                None => assignment[slot_index[&(rv, inst)]],
            }
        };
        for &c in &cat_vars {
            let parent = net.tree().rv(c).parent_ref().expect("categorical parent");
            for i in 0..net.var(c).flat {
                let v = value_of(c, i, &assignment) as usize;
                match parent {
                    ParentRef::Direct { rv: p } => {
                        let inst = net.ancestor_instance(c, i, p) as usize;
                        let dim = net.var(p).dim;
                        counts.get_mut(&p).expect("parent counts")[inst * dim + v] += 1.0;
                    }
                    ParentRef::Mixture {
                        component,
                        selector,
                    } => {
                        let s = value_of(selector, net.ancestor_instance(c, i, selector), &assignment);
                        let (base, _) = net.component_block(c, i, component);
                        let dim = net.var(component).dim;
                        counts.get_mut(&component).expect("component counts")
                            [(base + s as u64) as usize * dim + v] += 1.0;
                    }
                }
            }
        }
        let mut ln_p = 0.0;
        for &rv in &dirichlet_vars {
            let var = net.var(rv);
            let prior = var.prior.as_ref().expect("dirichlet prior");
            let c = &counts[&rv];
            for i in 0..var.flat as usize {
                let row = &c[i * var.dim..(i + 1) * var.dim];
                if row.iter().any(|&n| n > 0.0) {
                    let posterior: Vec<f64> =
                        prior.iter().zip(row).map(|(&a, &n)| a + n).collect();
                    ln_p += ln_multibeta(&posterior) - ln_b_prior[&rv];
                }
            }
        }
        for (slot, &v) in assignment.iter().enumerate() {
            let acc = &mut marg_acc[slot][v as usize];
            *acc = log_sum_exp(&[*acc, ln_p]);
        }
        terms.push(ln_p);

        // Next mixed-radix assignment.
        let mut carry = true;
        for (slot, v) in assignment.iter_mut().enumerate() {
            if !carry {
                break;
            }
            *v += 1;
            if (*v as usize) < slots[slot].2 {
                carry = false;
            } else {
                *v = 0;
            }
        }
        if carry {
            break;
        }
    }

    let log_evidence = log_sum_exp(&terms);
    let mut marginals: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (slot, &(rv, _, _)) in slots.iter().enumerate() {
        let probs: Vec<f64> = marg_acc[slot]
            .iter()
            .map(|&l| (l - log_evidence).exp())
            .collect();
        marginals
            .entry(net.var(rv).name.clone())
            .or_default()
            .push(probs);
    }

    // With no latent discrete variables the posterior is conjugate-closed:
    // prior plus the (deterministic) observation counts.
    let mut posterior_params = BTreeMap::new();
    if slots.is_empty() {
        for &rv in &dirichlet_vars {
            let var = net.var(rv);
            let prior = var.prior.as_ref().expect("dirichlet prior");
            let c = &counts[&rv];
            let rows: Vec<Vec<f64>> = (0..var.flat as usize)
                .map(|i| {
                    prior
                        .iter()
                        .zip(&c[i * var.dim..(i + 1) * var.dim])
                        .map(|(&a, &n)| a + n)
                        .collect()
                })
                .collect();
            posterior_params.insert(var.name.clone(), rows);
        }
    }

    Ok(ExactResult {
        log_evidence,
        marginals,
        posterior_params,
    })
}

fn ln_multibeta(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(alpha.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::{NetworkBuilder, TOPLEVEL};
    use crate::testkit;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    #[test]
    fn coin_posterior_examples() {
        assert_eq!(coin_posterior(7, 10, 1.0, 1.0).unwrap(), (8.0, 4.0));
        assert_eq!(coin_posterior(0, 0, 2.5, 0.5).unwrap(), (2.5, 0.5));
        assert_eq!(coin_posterior(6, 6, 1.0, 2.0).unwrap(), (7.0, 2.0));
        assert!(coin_posterior(3, 2, 1.0, 1.0).is_err());
        assert!(coin_posterior(1, 2, -1.0, 1.0).is_err());
    }

    #[test]
    fn two_coin_single_head_is_one_half() {
        let r = two_coin_evidence(&[0], &TwoCoinPriors::default()).unwrap();
        assert_abs_diff_eq!(r.log_evidence, (0.5f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.marginals["z"][0][0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn two_coin_two_heads_matches_quadrature_oracle() {
        // Frozen before the build: triple quadrature of
        // (pi phi1 + (1-pi) phi2)^2 over the unit cube = 11/36.
        let r = two_coin_evidence(&[0, 0], &TwoCoinPriors::default()).unwrap();
        assert_abs_diff_eq!(r.log_evidence, -1.1856236656577395, epsilon = 1e-12);
        assert_abs_diff_eq!(r.log_evidence, (11.0f64 / 36.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn two_coin_asymmetric_priors_match_frozen_oracle() {
        // mpmath enumeration, 40 digits, computed before the build.
        let priors = TwoCoinPriors {
            pi: [1.0, 1.0],
            phi: [[2.0, 1.0], [1.0, 3.0]],
        };
        // Observation convention here: category 0 = head; the frozen
        // instance observed [head, head, tail].
        let r = two_coin_evidence(&[0, 0, 1], &priors).unwrap();
        assert_abs_diff_eq!(r.log_evidence, -2.3524174667419214, epsilon = 1e-12);
        let m = &r.marginals["z"];
        assert_abs_diff_eq!(m[0][0], 0.7153284671532847, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1][0], 0.7153284671532847, epsilon = 1e-12);
        assert_abs_diff_eq!(m[2][0], 0.36496350364963503, epsilon = 1e-12);
    }

    #[test]
    fn enumeration_guard() {
        let r = two_coin_evidence(&vec![0; 21], &TwoCoinPriors::default());
        assert!(matches!(r, Err(OracleError::TooLarge(_))));
    }

    #[test]
    fn the_two_oracle_paths_agree() {
        let obs = vec![0u32, 1, 0];
        let direct = two_coin_evidence(
            &obs,
            &TwoCoinPriors {
                pi: [1.5, 0.7],
                phi: [[2.0, 1.0], [2.0, 1.0]],
            },
        )
        .unwrap();

        let mut b = NetworkBuilder::new();
        let pi = b.dirichlet("pi", TOPLEVEL, vec![1.5, 0.7]);
        let kp = b.plate(TOPLEVEL, 2);
        let phi = b.dirichlet("phi", kp, vec![2.0, 1.0]);
        let np = b.plate(TOPLEVEL, obs.len() as u64);
        let z = b.categorical("z", np, pi);
        let x = b.mixture("x", np, phi, z);
        b.observe(x, obs);
        let net = b.build(&BTreeMap::new()).unwrap();
        let enumerated = enumerate_discrete(&net).unwrap();

        assert_abs_diff_eq!(
            enumerated.log_evidence,
            direct.log_evidence,
            epsilon = 1e-12
        );
        for (a, b) in enumerated.marginals["z"].iter().zip(&direct.marginals["z"]) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn no_observations_normalize_to_log_evidence_zero() {
        let model = testkit::typed("two_coins");
        let mut overrides = BTreeMap::new();
        overrides.insert("z".to_string(), 3u64);
        let net = model
            .bind(
                &testkit::params(&[("alpha", 1.0), ("beta", 2.0)]),
                &BTreeMap::new(),
                &overrides,
            )
            .unwrap()
            .assign_vertex_ids();
        let r = enumerate_discrete(&net).unwrap();
        assert_abs_diff_eq!(r.log_evidence, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn conjugate_closed_case_reports_posterior_params() {
        let mut b = NetworkBuilder::new();
        let phi = b.dirichlet("phi", TOPLEVEL, vec![1.0, 1.0]);
        let p = b.plate(TOPLEVEL, 10);
        let x = b.categorical("x", p, phi);
        b.observe(x, vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 1]);
        let net = b.build(&BTreeMap::new()).unwrap();
        let r = enumerate_discrete(&net).unwrap();
        assert_eq!(r.posterior_params["phi"][0], vec![8.0, 4.0]);
        // Evidence matches the closed Beta-ratio form.
        let (a, b_) = coin_posterior(7, 10, 1.0, 1.0).unwrap();
        let want = ln_beta2(a, b_) - ln_beta2(1.0, 1.0);
        assert_abs_diff_eq!(r.log_evidence, want, epsilon = 1e-12);
    }

    #[test]
    fn near_one_hot_parent_gives_point_mass_marginals() {
        // The parent probability vector is a near point mass, so each
        // latent draw from it is nearly deterministic.
        let mut b = NetworkBuilder::new();
        let pi = b.dirichlet("pi", TOPLEVEL, vec![1e12, 1e-9, 1e-9]);
        let np = b.plate(TOPLEVEL, 3);
        b.categorical("z", np, pi);
        let net = b.build(&BTreeMap::new()).unwrap();
        let r = enumerate_discrete(&net).unwrap();
        for m in &r.marginals["z"] {
            assert!(m[0] > 1.0 - 1e-6, "{m:?}");
        }
        assert_abs_diff_eq!(r.log_evidence, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn engine_elbo_is_bounded_by_exact_evidence() {
        use crate::engine::{InferOptions, VmpEngine};
        use crate::mpg::{build_graph, partition, PartitionStrategy};
        use std::sync::Arc;

        for n in [2usize, 5, 8] {
            let obs: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
            let net = testkit::two_coins_net_with(1.0, 1.0, obs.clone());
            let exact = enumerate_discrete(&net).unwrap();
            let graph = Arc::new(build_graph(Arc::new(net)));
            let assignment =
                partition(&graph, PartitionStrategy::InferSparkRange, 1, 0).unwrap();
            let mut engine =
                VmpEngine::new(graph, assignment, 11, InferOptions::default()).unwrap();
            let post = engine.infer(60, |_, _| true).unwrap();
            assert!(
                post.final_elbo() <= exact.log_evidence + 1e-9,
                "N={n}: elbo {} exceeds evidence {}",
                post.final_elbo(),
                exact.log_evidence
            );
        }
    }
}
