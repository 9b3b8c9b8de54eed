//! Bayesian network construction: plate-tree templates, runtime metadata
//! binding, and the consecutive vertex-ID layout.

pub mod builder;
pub mod ground;
pub mod template;

pub use builder::NetworkBuilder;
pub use ground::{BindError, GroundNetwork, GroundVariable, IdRange, ObsData, PlateInstances};
pub use template::{
    build_template, DetExpr, DimSpec, DistSpec, ParentRef, PlateId, PlateNode, PlateTree,
    PriorSpec, RvId, RvNode, SizeSpec, SymbolId, TOPLEVEL,
};

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::dsl::{check_types, parse_model, Category};

    pub(crate) const TWO_COINS: &str = "\
model TwoCoins(alpha: Double, beta: Double) {
  val pi = Beta(alpha)
  val phi = (0 until 2).map { _ => Beta(beta) }
  val z = ?.map { _ => Categorical(pi) }
  val x = z.map { z => Categorical(phi(z)) }
}";

    pub(crate) const LDA: &str = "\
model LDA(K: Long, V: Long, alpha: Double, beta: Double) {
  val phi = (0 until K).map { _ => Dirichlet(beta, V) }
  val theta = ?.map { _ => Dirichlet(alpha, K) }
  val z = theta.map { theta => ?.map { _ => Categorical(theta) } }
  val x = z.map { zs => zs.map { z => Categorical(phi(z)) } }
}";

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn two_coins_template_shape() {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let tree = build_template(&model);
        // TOPLEVEL { r1(pi), Plate1(2) { r2(phi) }, Plate2(?) { r3(z), r4(x) } }
        assert_eq!(tree.n_rvs(), 4);
        assert_eq!(tree.n_plates(), 3);
        assert_eq!(tree.rv(0).plate, TOPLEVEL);
        assert_eq!(tree.rv(0).internal_name, "r1");
        assert_eq!(tree.rv(1).plate, 1);
        assert_eq!(tree.rv(2).plate, 2);
        assert_eq!(tree.rv(3).plate, 2); // x co-plated with z
        assert!(matches!(
            tree.rv(3).dist,
            DistSpec::Categorical {
                parent: ParentRef::Mixture {
                    component: 1,
                    selector: 2
                }
            }
        ));
        assert!(matches!(tree.plate(2).size, SizeSpec::Unknown(0)));
    }

    #[test]
    fn lda_template_shape() {
        let model = check_types(&parse_model(LDA).unwrap()).unwrap();
        let tree = &model.tree;
        // TOPLEVEL { PlateK { phi }, PlateD { theta, PlateN { z, x } } }
        assert_eq!(tree.n_rvs(), 4);
        assert_eq!(tree.n_plates(), 4);
        let (phi, theta, z, x) = (0, 1, 2, 3);
        assert_eq!(tree.axes(phi).len(), 1);
        assert_eq!(tree.axes(theta).len(), 1);
        assert_eq!(tree.axes(z).len(), 2);
        assert_eq!(tree.rv(x).plate, tree.rv(z).plate);
        assert!(matches!(
            tree.rv(z).dist,
            DistSpec::Categorical {
                parent: ParentRef::Direct { rv: 1 }
            }
        ));
        // z's binding is annotated as an rv-collection.
        let z_expr = &model.ast.stmts[2].value;
        assert_eq!(model.categories[z_expr.id], Some(Category::RvCollection));
    }

    #[test]
    fn single_unplated_rv() {
        let model = check_types(&parse_model("model M(a: Double) { val u = Beta(a) }").unwrap())
            .unwrap();
        assert_eq!(model.tree.n_rvs(), 1);
        assert_eq!(model.tree.n_plates(), 1);
        assert_eq!(model.tree.rv(0).plate, TOPLEVEL);
    }

    #[test]
    fn two_coins_binding_infers_plate_size() {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let obs = [1u32, 0, 1, 1, 0, 1, 1, 1, 0, 1];
        let mut observations = BTreeMap::new();
        observations.insert("x".to_string(), ObsData::Values(obs.to_vec()));
        let net = model
            .bind(
                &params(&[("alpha", 1.0), ("beta", 1.0)]),
                &observations,
                &BTreeMap::new(),
            )
            .unwrap();
        let z = net.rv_by_name("z").unwrap();
        assert_eq!(net.var(z).flat, 10);
        assert_eq!(net.plate_instances(net.tree().rv(z).plate).flat(), 10);
    }

    #[test]
    fn lda_ragged_binding() {
        let model = check_types(&parse_model(LDA).unwrap()).unwrap();
        let mut observations = BTreeMap::new();
        observations.insert(
            "x".to_string(),
            ObsData::Groups(vec![
                ObsData::Values(vec![0, 1, 2]),
                ObsData::Values(vec![3, 4, 0, 1, 2]),
            ]),
        );
        let net = model
            .bind(
                &params(&[("K", 2.0), ("V", 5.0), ("alpha", 0.5), ("beta", 0.5)]),
                &observations,
                &BTreeMap::new(),
            )
            .unwrap();
        let theta = net.rv_by_name("theta").unwrap();
        let x = net.rv_by_name("x").unwrap();
        assert_eq!(net.var(theta).flat, 2);
        assert_eq!(net.var(x).flat, 8); // 3 + 5
        let word_plate = net.tree().rv(x).plate;
        assert_eq!(net.plate_instances(word_plate).rep_sizes, vec![3, 5]);
        // Observation conservation: per-document lengths sum to the
        // flattened innermost plate size.
        assert_eq!(net.plate_instances(word_plate).flat(), 8);
    }

    #[test]
    fn unresolved_plate_is_reported() {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let err = model
            .bind(
                &params(&[("alpha", 1.0), ("beta", 1.0)]),
                &BTreeMap::new(),
                &BTreeMap::new(),
            )
            .unwrap_err();
        assert!(matches!(err, BindError::UnresolvedPlate(_)));
    }

    #[test]
    fn explicit_plate_override() {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let mut overrides = BTreeMap::new();
        overrides.insert("z".to_string(), 4u64);
        let net = model
            .bind(
                &params(&[("alpha", 1.0), ("beta", 1.0)]),
                &BTreeMap::new(),
                &overrides,
            )
            .unwrap();
        let z = net.rv_by_name("z").unwrap();
        assert_eq!(net.var(z).flat, 4);
    }

    #[test]
    fn missing_param_is_reported() {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let err = model
            .bind(&params(&[("alpha", 1.0)]), &BTreeMap::new(), &BTreeMap::new())
            .unwrap_err();
        assert_eq!(err, BindError::MissingParam("beta".into()));
    }

    #[test]
    fn domain_error_on_out_of_range_category() {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let mut observations = BTreeMap::new();
        observations.insert("x".to_string(), ObsData::Values(vec![0, 2]));
        let err = model
            .bind(
                &params(&[("alpha", 1.0), ("beta", 1.0)]),
                &observations,
                &BTreeMap::new(),
            )
            .unwrap_err();
        assert!(matches!(err, BindError::DomainError(_)));
    }

    #[test]
    fn two_coins_layout_matches_reverse_binding_order() {
        let net = two_coins_net(10);
        let (pi, phi, z, x) = named(&net);
        assert_eq!(net.interval(x), IdRange { lo: 0, hi: 10 });
        assert_eq!(net.interval(z), IdRange { lo: 10, hi: 20 });
        assert_eq!(net.interval(phi), IdRange { lo: 20, hi: 22 });
        assert_eq!(net.interval(pi), IdRange { lo: 22, hi: 23 });
        assert_eq!(net.total_vertices(), 23);
        // Companion of x id 7 is z id 17.
        assert_eq!(net.companion(7, z), 17);
        assert_eq!(net.companion(17, x), 7);
        assert_eq!(net.owner_of(7), x);
        assert_eq!(net.owner_of(17), z);
        assert_eq!(net.owner_of(21), phi);
        assert_eq!(net.owner_of(22), pi);
    }

    #[test]
    fn empty_plate_yields_empty_interval() {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let mut observations = BTreeMap::new();
        observations.insert("x".to_string(), ObsData::Values(vec![]));
        let net = model
            .bind(
                &params(&[("alpha", 1.0), ("beta", 1.0)]),
                &observations,
                &BTreeMap::new(),
            )
            .unwrap()
            .assign_vertex_ids();
        let x = net.rv_by_name("x").unwrap();
        assert!(net.interval(x).is_empty());
        assert_eq!(net.total_vertices(), 3); // pi + two phi
    }

    #[test]
    fn interval_partition_covers_all_vertices() {
        let net = two_coins_net(7);
        let mut seen = vec![0u32; net.total_vertices() as usize];
        for rv in 0..net.n_vars() {
            let r = net.interval(rv);
            for id in r.lo..r.hi {
                seen[id as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn builder_constructs_mixture_network() {
        let mut b = NetworkBuilder::new();
        let kp = b.plate(TOPLEVEL, 3);
        let phi = b.dirichlet("phi", kp, vec![0.5, 0.5]);
        let pi = b.dirichlet("pi", TOPLEVEL, vec![1.0, 2.0, 3.0]);
        let obs_plate = b.plate(TOPLEVEL, 5);
        let z = b.categorical("z", obs_plate, pi);
        let x = b.mixture("x", obs_plate, phi, z);
        b.observe(x, vec![0, 1, 0, 1, 1]);
        let net = b.build(&BTreeMap::new()).unwrap();
        assert_eq!(net.var(z).dim, 3);
        assert_eq!(net.var(x).dim, 2);
        assert_eq!(net.var(x).observed.as_deref(), Some(&[0u32, 1, 0, 1, 1][..]));
        assert_eq!(net.var(pi).prior.as_deref(), Some(&[1.0, 2.0, 3.0][..]));
    }

    #[test]
    fn projection_and_component_blocks() {
        // Ragged LDA-style network built by hand: 2 docs with 3 and 5 words.
        let mut b = NetworkBuilder::new();
        let kp = b.plate(TOPLEVEL, 4);
        let phi = b.dirichlet("phi", kp, vec![0.5; 6]);
        let dp = b.plate(TOPLEVEL, 2);
        let theta = b.dirichlet("theta", dp, vec![0.5; 4]);
        let wp = b.ragged_plate(dp, vec![3, 5]);
        let z = b.categorical("z", wp, theta);
        let x = b.mixture("x", wp, phi, z);
        b.observe(x, vec![0, 1, 2, 3, 4, 5, 0, 1]);
        let net = b.build(&BTreeMap::new()).unwrap();

        // Word 4 (0-based) lives in document 1.
        assert_eq!(net.ancestor_instance(z, 4, theta), 1);
        assert_eq!(net.ancestor_instance(z, 2, theta), 0);
        // phi is global: every word sees the same component block.
        assert_eq!(net.component_block(x, 0, phi), (0, 4));
        assert_eq!(net.component_block(x, 7, phi), (0, 4));
        assert_eq!(net.component_ordinal(phi, 2), 2);
    }

    pub(crate) fn two_coins_net(n: usize) -> GroundNetwork {
        let model = check_types(&parse_model(TWO_COINS).unwrap()).unwrap();
        let obs: Vec<u32> = (0..n).map(|i| (i % 3 == 0) as u32).collect();
        let mut observations = BTreeMap::new();
        observations.insert("x".to_string(), ObsData::Values(obs));
        model
            .bind(
                &params(&[("alpha", 1.0), ("beta", 1.0)]),
                &observations,
                &BTreeMap::new(),
            )
            .unwrap()
            .assign_vertex_ids()
    }

    fn named(net: &GroundNetwork) -> (RvId, RvId, RvId, RvId) {
        (
            net.rv_by_name("pi").unwrap(),
            net.rv_by_name("phi").unwrap(),
            net.rv_by_name("z").unwrap(),
            net.rv_by_name("x").unwrap(),
        )
    }
}
