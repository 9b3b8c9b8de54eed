//! `graph`: print vertex intervals and edge counts, or a DOT rendering of
//! the plate tree.

use std::collections::BTreeMap;
use std::sync::Arc;

use vmpforge_core::bn::{DistSpec, ParentRef, SizeSpec, TOPLEVEL};
use vmpforge_core::mpg::build_graph;

use crate::error::CliError;
use crate::opts::RunConfig;

pub fn run(config: &RunConfig, dot: bool) -> Result<(), CliError> {
    let (name, net) = config.ground()?;
    if dot {
        print!("{}", render_dot(&name, &net));
        return Ok(());
    }
    let graph = build_graph(Arc::new(net));
    let net = graph.net();

    // Variables in vertex-id order.
    let mut order: Vec<usize> = (0..net.n_vars()).collect();
    order.sort_by_key(|&rv| net.interval(rv).lo);
    let intervals: Vec<String> = order
        .iter()
        .map(|&rv| {
            let iv = net.interval(rv);
            format!("{}: [{},{})", net.var(rv).name, iv.lo, iv.hi)
        })
        .collect();
    println!("{}; edges: {}", intervals.join(" "), graph.edge_count());

    let mut by_kind: BTreeMap<String, u64> = BTreeMap::new();
    for e in graph.edges() {
        *by_kind
            .entry(format!(
                "{} -> {}",
                net.var(e.src_var).name,
                net.var(e.dst_var).name
            ))
            .or_default() += 1;
    }
    for (kind, count) in by_kind {
        println!("  {kind}: {count}");
    }
    Ok(())
}

fn render_dot(name: &str, net: &vmpforge_core::GroundNetwork) -> String {
    use std::fmt::Write;
    let tree = net.tree();
    let mut out = String::new();
    writeln!(out, "digraph \"{name}\" {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();

    fn emit_plate(
        out: &mut String,
        net: &vmpforge_core::GroundNetwork,
        plate: usize,
        indent: usize,
    ) {
        let tree = net.tree();
        let pad = "  ".repeat(indent);
        if plate != TOPLEVEL {
            let size = match &tree.plate(plate).size {
                SizeSpec::Unknown(_) => format!("x{} (?)", net.plate_instances(plate).flat()),
                _ => format!("x{}", net.plate_instances(plate).flat()),
            };
            writeln!(out, "{pad}subgraph cluster_p{plate} {{").unwrap();
            writeln!(out, "{pad}  label=\"plate {size}\";").unwrap();
        }
        for &rv in &tree.plate(plate).child_rvs {
            let var = net.var(rv);
            let shape = if var.observed.is_some() {
                "box"
            } else {
                "ellipse"
            };
            writeln!(
                out,
                "{pad}  r{rv} [label=\"{}\", shape={shape}];",
                var.name
            )
            .unwrap();
        }
        for &child in &tree.plate(plate).child_plates {
            emit_plate(out, net, child, indent + 1);
        }
        if plate != TOPLEVEL {
            writeln!(out, "{pad}}}").unwrap();
        }
    }
    emit_plate(&mut out, net, TOPLEVEL, 1);

    for rv in 0..tree.n_rvs() {
        if let DistSpec::Categorical { parent } = &tree.rv(rv).dist {
            match parent {
                ParentRef::Direct { rv: p } => {
                    writeln!(out, "  r{p} -> r{rv};").unwrap();
                }
                ParentRef::Mixture {
                    component,
                    selector,
                } => {
                    writeln!(out, "  r{component} -> r{rv} [style=dashed];").unwrap();
                    writeln!(out, "  r{selector} -> r{rv};").unwrap();
                }
            }
        }
    }
    writeln!(out, "}}").unwrap();
    out
}
