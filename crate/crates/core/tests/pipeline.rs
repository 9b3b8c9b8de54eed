//! End-to-end pipeline tests: parse -> type-check -> ground -> graph ->
//! partition -> infer, on the bundled model definitions.

use std::collections::BTreeMap;
use std::sync::Arc;

use vmpforge_core::bn::ObsData;
use vmpforge_core::engine::{InferOptions, VmpEngine};
use vmpforge_core::mpg::{build_graph, partition, PartitionStrategy};
use vmpforge_core::{check_types, parse_model, GroundNetwork, PosteriorSet, TypedModel};

fn load_model(name: &str) -> TypedModel {
    let path = format!("{}/../../models/{name}.ispk", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(&path).unwrap();
    check_types(&parse_model(&src).unwrap()).unwrap()
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Deterministic synthetic corpus: documents lean towards a topic band of
/// the vocabulary.
fn synth_docs(n_docs: usize, words_per_doc: usize, v: usize, k: usize) -> Vec<Vec<u32>> {
    let band = v / k;
    (0..n_docs)
        .map(|d| {
            (0..words_per_doc)
                .map(|i| {
                    let topic = d % k;
                    let within = (d * 31 + i * 17) % band.max(1);
                    ((topic * band + within) % v) as u32
                })
                .collect()
        })
        .collect()
}

fn run(
    net: GroundNetwork,
    m: u32,
    strategy: PartitionStrategy,
    seed: u64,
    iters: u64,
    options: InferOptions,
) -> PosteriorSet {
    let graph = Arc::new(build_graph(Arc::new(net)));
    let assignment = partition(&graph, strategy, m, seed).unwrap();
    let mut engine = VmpEngine::new(graph, assignment, seed, options).unwrap();
    engine.infer(iters, |_, _| true).unwrap()
}

fn assert_monotone(trace: &[(u64, f64)]) {
    for w in trace.windows(2) {
        let (prev, next) = (w[0].1, w[1].1);
        assert!(
            next >= prev - 1e-8 * (1.0 + prev.abs()),
            "elbo decreased from {prev} to {next}"
        );
    }
}

fn lda_net(docs: &[Vec<u32>], k: f64, v: f64) -> GroundNetwork {
    let model = load_model("lda");
    let mut obs = BTreeMap::new();
    obs.insert(
        "x".to_string(),
        ObsData::Groups(docs.iter().map(|d| ObsData::Values(d.clone())).collect()),
    );
    model
        .bind(
            &params(&[("K", k), ("V", v), ("alpha", 0.5), ("beta", 0.5)]),
            &obs,
            &BTreeMap::new(),
        )
        .unwrap()
        .assign_vertex_ids()
}

#[test]
fn all_four_models_run_ten_iterations() {
    // TwoCoins
    let model = load_model("two_coins");
    let mut obs = BTreeMap::new();
    obs.insert(
        "x".to_string(),
        ObsData::Values((0..40).map(|i| (i % 3 == 0) as u32).collect()),
    );
    let net = model
        .bind(&params(&[("alpha", 1.0), ("beta", 1.0)]), &obs, &BTreeMap::new())
        .unwrap()
        .assign_vertex_ids();
    let posteriors = run(
        net,
        4,
        PartitionStrategy::InferSparkRange,
        1,
        10,
        InferOptions::default(),
    );
    assert_monotone(&posteriors.elbo_trace);
    assert_eq!(posteriors.per_variable["phi"].len(), 2);

    // LDA
    let docs = synth_docs(6, 12, 20, 3);
    let posteriors = run(
        lda_net(&docs, 3.0, 20.0),
        4,
        PartitionStrategy::InferSparkRange,
        2,
        10,
        InferOptions::default(),
    );
    assert_monotone(&posteriors.elbo_trace);
    assert_eq!(posteriors.per_variable["theta"].len(), 6);
    assert_eq!(posteriors.per_variable["phi"].len(), 3);

    // SLDA: documents -> sentences -> words.
    let model = load_model("slda");
    let mut obs = BTreeMap::new();
    let docs: Vec<ObsData> = (0..4)
        .map(|d| {
            ObsData::Groups(
                (0..3)
                    .map(|s| {
                        ObsData::Values(
                            (0..4).map(|i| ((d * 5 + s * 3 + i) % 12) as u32).collect(),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    obs.insert("x".to_string(), ObsData::Groups(docs));
    let net = model
        .bind(
            &params(&[("K", 3.0), ("V", 12.0), ("alpha", 0.7), ("beta", 0.7)]),
            &obs,
            &BTreeMap::new(),
        )
        .unwrap()
        .assign_vertex_ids();
    let posteriors = run(
        net,
        4,
        PartitionStrategy::InferSparkRange,
        3,
        10,
        InferOptions::default(),
    );
    assert_monotone(&posteriors.elbo_trace);
    // One topic per sentence: 4 docs x 3 sentences.
    assert_eq!(posteriors.per_variable["z"].len(), 12);

    // DCMLDA: per-document topic-word distributions.
    let model = load_model("dcmlda");
    let docs = synth_docs(5, 8, 15, 2);
    let mut obs = BTreeMap::new();
    obs.insert(
        "x".to_string(),
        ObsData::Groups(docs.iter().map(|d| ObsData::Values(d.clone())).collect()),
    );
    let net = model
        .bind(
            &params(&[("K", 2.0), ("V", 15.0), ("alpha", 0.6), ("beta", 0.6)]),
            &obs,
            &BTreeMap::new(),
        )
        .unwrap()
        .assign_vertex_ids();
    let posteriors = run(
        net,
        4,
        PartitionStrategy::InferSparkRange,
        4,
        10,
        InferOptions::default(),
    );
    assert_monotone(&posteriors.elbo_trace);
    // phi: one row per (document, topic) pair.
    assert_eq!(posteriors.per_variable["phi"].len(), 10);
}

#[test]
fn lda_schedule_mirrors_the_two_coin_pattern() {
    let docs = synth_docs(3, 5, 10, 2);
    let net = lda_net(&docs, 2.0, 10.0);
    let graph = Arc::new(build_graph(Arc::new(net)));
    let assignment = partition(&graph, PartitionStrategy::InferSparkRange, 1, 0).unwrap();
    let engine = VmpEngine::new(graph.clone(), assignment, 0, InferOptions::default()).unwrap();
    let names: Vec<(Vec<String>, bool)> = engine
        .schedule()
        .substeps
        .iter()
        .map(|s| {
            (
                s.vars
                    .iter()
                    .map(|&rv| graph.net().var(rv).name.clone())
                    .collect(),
                s.refresh,
            )
        })
        .collect();
    assert_eq!(
        names,
        vec![
            (vec!["phi".to_string(), "theta".to_string()], false),
            (vec!["x".to_string()], true),
            (vec!["z".to_string()], false),
            (vec!["x".to_string()], true),
        ]
    );
}

#[test]
fn partitioning_does_not_change_inference_results() {
    let docs = synth_docs(8, 10, 16, 3);
    let mut results = Vec::new();
    for m in [1u32, 4, 8] {
        let posteriors = run(
            lda_net(&docs, 3.0, 16.0),
            m,
            PartitionStrategy::InferSparkRange,
            9,
            15,
            InferOptions::default(),
        );
        results.push(posteriors);
    }
    let base = &results[0];
    for other in &results[1..] {
        for (name, rows) in &base.per_variable {
            let other_rows = &other.per_variable[name];
            for (a, b) in rows.iter().zip(other_rows) {
                for (x, y) in a.iter().zip(b) {
                    let tol = 1e-9 * (1.0 + x.abs());
                    assert!((x - y).abs() <= tol, "{name}: {x} vs {y}");
                }
            }
        }
    }
}

#[test]
fn parallel_mode_reproduces_single_threaded_results() {
    let docs = synth_docs(10, 12, 18, 4);
    let single = run(
        lda_net(&docs, 4.0, 18.0),
        8,
        PartitionStrategy::RandomVertexCut,
        5,
        12,
        InferOptions {
            workers: 1,
            ..Default::default()
        },
    );
    let parallel = run(
        lda_net(&docs, 4.0, 18.0),
        8,
        PartitionStrategy::RandomVertexCut,
        5,
        12,
        InferOptions {
            workers: 4,
            ..Default::default()
        },
    );
    // Partials combine in a fixed order, so this holds bit for bit.
    assert_eq!(single.per_variable, parallel.per_variable);
    assert_eq!(single.elbo_trace, parallel.elbo_trace);
}

#[test]
fn snapshot_file_roundtrip_through_the_filesystem() {
    let docs = synth_docs(4, 6, 10, 2);
    let net = lda_net(&docs, 2.0, 10.0);
    let graph = Arc::new(build_graph(Arc::new(net)));
    let assignment = partition(&graph, PartitionStrategy::InferSparkRange, 2, 0).unwrap();
    let dir = std::env::temp_dir().join(format!("vmpforge-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("snap.json");

    let mut engine = VmpEngine::new(graph.clone(), assignment.clone(), 3, InferOptions::default())
        .unwrap();
    engine.infer(6, |_, _| true).unwrap();
    engine.save_snapshot(&path).unwrap();
    let after_six = engine.posteriors();

    let mut other = VmpEngine::new(graph, assignment, 99, InferOptions::default()).unwrap();
    other.load_snapshot(&path).unwrap();
    assert_eq!(other.posteriors().per_variable, after_six.per_variable);
    assert_eq!(other.iteration(), 6);
    std::fs::remove_dir_all(&dir).ok();
}
