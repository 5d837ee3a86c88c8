use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Netlist;

/// Fill colours used when rendering recovery overlays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeColor {
    Green,
    Red,
    Cyan,
    Yellow,
    Gray,
}

impl NodeColor {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeColor::Green => "green",
            NodeColor::Red => "red",
            NodeColor::Cyan => "cyan",
            NodeColor::Yellow => "yellow",
            NodeColor::Gray => "gray",
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz digraph of the netlist.
///
/// One node per gate, primary input, key input and primary output; key inputs
/// are filled cyan. Gate colours come from `colors`.
pub fn export_dot(n: &Netlist, colors: &BTreeMap<String, NodeColor>) -> String {
    let mut out = String::from("digraph netlist {\n  rankdir=LR;\n");
    for pi in n.primary_inputs() {
        let _ = writeln!(out, "  {} [shape=box, label={}];", quote(pi), quote(pi));
    }
    for k in n.key_inputs() {
        let _ = writeln!(
            out,
            "  {} [shape=box, style=filled, fillcolor=cyan, label={}];",
            quote(k),
            quote(k)
        );
    }
    for (id, gate) in n.gates() {
        let label = quote(&format!("{}\\n{}", gate.kind, id));
        match colors.get(id) {
            Some(c) => {
                let _ = writeln!(
                    out,
                    "  {} [shape=ellipse, style=filled, fillcolor={}, label={label}];",
                    quote(id),
                    c.as_str()
                );
            }
            None => {
                let _ = writeln!(out, "  {} [shape=ellipse, label={label}];", quote(id));
            }
        }
    }
    for po in n.primary_outputs() {
        let _ = writeln!(
            out,
            "  {} [shape=doublecircle, label={}];",
            quote(&format!("out:{po}")),
            quote(po)
        );
    }
    for (id, gate) in n.gates() {
        for input in &gate.inputs {
            let _ = writeln!(out, "  {} -> {};", quote(input), quote(id));
        }
    }
    for po in n.primary_outputs() {
        let _ = writeln!(out, "  {} -> {};", quote(po), quote(&format!("out:{po}")));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    #[test]
    fn single_gate() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)").unwrap();
        let dot = export_dot(&n, &BTreeMap::new());
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("shape=ellipse").count(), 1);
        assert_eq!(dot.matches("shape=box").count(), 2);
        assert_eq!(dot.matches(" -> ").count(), 3);
    }

    #[test]
    fn colors_applied() {
        let n = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(g1)\ng1 = XOR(a, keyinput0)")
            .unwrap();
        let colors = BTreeMap::from([("g1".to_string(), NodeColor::Red)]);
        let dot = export_dot(&n, &colors);
        assert!(dot.contains("\"g1\" [shape=ellipse, style=filled, fillcolor=red"));
        assert!(dot.contains("\"keyinput0\" [shape=box, style=filled, fillcolor=cyan"));
    }
}
