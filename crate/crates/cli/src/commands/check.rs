//! `check`: parse and type-check a model; print a variable/plate summary.

use std::path::Path;

use vmpforge_core::bn::{DimSpec, DistSpec, ParentRef, PriorSpec, SizeSpec};

use crate::error::CliError;
use crate::opts::load_model_at;

pub fn run(model_path: &Path) -> Result<(), CliError> {
    let model = load_model_at(model_path)?;
    let tree = &model.tree;
    println!(
        "model {}: {} variables, {} plates",
        model.ast.name,
        tree.n_rvs(),
        tree.n_plates() - 1
    );
    let name_of = |rv: usize| -> String {
        model
            .bindings
            .iter()
            .find_map(|(name, b)| match b {
                vmpforge_core::dsl::Binding::Rv(r) if *r == rv => Some(name.clone()),
                _ => None,
            })
            .unwrap_or_else(|| tree.rv(rv).internal_name.clone())
    };
    for rv in 0..tree.n_rvs() {
        let node = tree.rv(rv);
        let dist = match &node.dist {
            DistSpec::Dirichlet { prior } => match prior {
                PriorSpec::Symmetric {
                    dim: DimSpec::Fixed(2),
                    ..
                } => "Beta".to_string(),
                _ => "Dirichlet".to_string(),
            },
            DistSpec::Categorical { parent } => match parent {
                ParentRef::Direct { rv: p } => format!("Categorical({})", name_of(*p)),
                ParentRef::Mixture {
                    component,
                    selector,
                } => format!("Categorical({}({}))", name_of(*component), name_of(*selector)),
            },
        };
        let axes = tree.axes(rv);
        let plates: Vec<String> = axes
            .iter()
            .map(|&p| match &tree.plate(p).size {
                SizeSpec::Unknown(_) => "?".to_string(),
                _ => "sized".to_string(),
            })
            .collect();
        let plate_desc = if plates.is_empty() {
            "top level".to_string()
        } else {
            format!("plates [{}]", plates.join(", "))
        };
        println!("  {}: {dist}, {plate_desc}", name_of(rv));
    }
    Ok(())
}
