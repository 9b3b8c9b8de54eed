//! Shared fixtures for unit tests.

use std::collections::BTreeMap;

use crate::bn::{GroundNetwork, ObsData};
use crate::dsl::{check_types, parse_model, TypedModel};

pub fn model_source(name: &str) -> String {
    let path = format!("{}/../../models/{name}.ispk", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path}: {e}"))
}

pub fn typed(name: &str) -> TypedModel {
    check_types(&parse_model(&model_source(name)).unwrap()).unwrap()
}

pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// TwoCoins with `n` alternating-ish observations and uniform priors.
pub fn two_coins_net(n: usize) -> GroundNetwork {
    let obs: Vec<u32> = (0..n).map(|i| (i % 3 == 0) as u32).collect();
    two_coins_net_with(1.0, 1.0, obs)
}

pub fn two_coins_net_with(alpha: f64, beta: f64, obs: Vec<u32>) -> GroundNetwork {
    let model = typed("two_coins");
    let mut observations = BTreeMap::new();
    observations.insert("x".to_string(), ObsData::Values(obs));
    model
        .bind(
            &params(&[("alpha", alpha), ("beta", beta)]),
            &observations,
            &BTreeMap::new(),
        )
        .unwrap()
        .assign_vertex_ids()
}

/// LDA toy instance over the given documents.
pub fn lda_net(k: u64, v: u64, alpha: f64, beta: f64, docs: &[Vec<u32>]) -> GroundNetwork {
    let model = typed("lda");
    let mut observations = BTreeMap::new();
    observations.insert(
        "x".to_string(),
        ObsData::Groups(docs.iter().map(|d| ObsData::Values(d.clone())).collect()),
    );
    model
        .bind(
            &params(&[
                ("K", k as f64),
                ("V", v as f64),
                ("alpha", alpha),
                ("beta", beta),
            ]),
            &observations,
            &BTreeMap::new(),
        )
        .unwrap()
        .assign_vertex_ids()
}
