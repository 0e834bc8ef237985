use std::fmt::Write;

use super::Pmm;

/// Renders the machine as a Graphviz digraph. One line per node and per edge;
/// self-loops render like any other edge.
pub fn pmm_to_dot(pmm: &Pmm) -> String {
    let mut states: Vec<_> = pmm.states.iter().collect();
    states.sort_by_key(|s| s.id);
    let mut edges: Vec<_> = pmm.edges.iter().collect();
    edges.sort_by_key(|e| (e.src, e.input, e.dst));

    let mut out = String::from("digraph pmm {\n");
    for s in states {
        if s.is_initial {
            writeln!(out, "  q{id} [label=\"q{id}\", shape=doublecircle];", id = s.id).unwrap();
        } else {
            writeln!(out, "  q{id} [label=\"q{id}\"];", id = s.id).unwrap();
        }
    }
    for e in edges {
        let mean = e
            .action_mean
            .iter()
            .map(|v| format!("{v:.2}"))
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(
            out,
            "  q{} -> q{} [label=\"c{} | p={:.2} | a=[{}]\"];",
            e.src, e.dst, e.input, e.prob, mean
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
