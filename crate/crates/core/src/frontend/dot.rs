use std::fmt::Write;

use super::cfa::{EdgeOp, Program};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders the program's automata as a Graphviz digraph, one cluster per
/// function. Inter-procedural edges are drawn outside the clusters.
pub fn export_dot(program: &Program) -> String {
    let mut out = String::new();
    writeln!(out, "digraph program {{").unwrap();
    writeln!(out, "  node [shape=circle];").unwrap();
    let mut interprocedural = Vec::new();
    for cfa in program.cfas().values() {
        let prefix = format!("{}::", cfa.function_name);
        let strip = move |n: &str| n.strip_prefix(prefix.as_str()).unwrap_or(n).to_string();
        writeln!(out, "  subgraph cluster_{} {{", cfa.function_name).unwrap();
        writeln!(out, "    label=\"{}\";", escape(&cfa.function_name)).unwrap();
        for loc in &cfa.locations {
            if cfa.error_locations.contains(loc) {
                writeln!(out, "    {loc} [label=\"{loc} ERROR\", shape=doubleoctagon];").unwrap();
            } else {
                writeln!(out, "    {loc} [label=\"{loc}\"];").unwrap();
            }
        }
        let mut edges: Vec<_> = cfa.edges.iter().collect();
        edges.sort_by_key(|e| (e.source, e.target));
        for e in edges {
            let label = escape(&e.op.display_with(&strip).to_string());
            let line = format!("{} -> {} [label=\"{label}\"];", e.source, e.target);
            if matches!(e.op, EdgeOp::Call { .. } | EdgeOp::Return { .. }) {
                interprocedural.push(line);
            } else {
                writeln!(out, "    {line}").unwrap();
            }
        }
        writeln!(out, "  }}").unwrap();
    }
    for line in interprocedural {
        writeln!(out, "  {line}").unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}
