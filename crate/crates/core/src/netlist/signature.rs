//! Name-free canonical forms for small tagged subgraphs.
//!
//! Canonical labelling uses colour refinement followed by an exhaustive
//! individualisation search; the lexicographically smallest leaf encoding
//! is the canonical form. Graphs here have at most a few dozen nodes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Netlist;
use crate::error::{Error, Result};

/// Role of a net relative to a gate subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleTag {
    AnchorKeyInput,
    BoundaryIn,
    BoundaryOut,
    Internal,
}

impl RoleTag {
    fn code(self) -> &'static str {
        match self {
            RoleTag::AnchorKeyInput => "k",
            RoleTag::BoundaryIn => "i",
            RoleTag::BoundaryOut => "o",
            RoleTag::Internal => "n",
        }
    }
}

/// Canonical text form of a tagged subgraph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NetlistSignature(pub String);

impl fmt::Display for NetlistSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Directed multigraph with node colours.
#[derive(Clone, Debug)]
pub(crate) struct ColoredGraph {
    pub colors: Vec<u64>,
    pub edges: Vec<(usize, usize)>,
}

struct Adjacency {
    ins: Vec<Vec<usize>>,
    outs: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(g: &ColoredGraph) -> Self {
        let n = g.colors.len();
        let mut ins = vec![Vec::new(); n];
        let mut outs = vec![Vec::new(); n];
        for &(u, v) in &g.edges {
            outs[u].push(v);
            ins[v].push(u);
        }
        for list in ins.iter_mut().chain(outs.iter_mut()) {
            list.sort_unstable();
        }
        Adjacency { ins, outs }
    }
}

/// Replace colours by their dense rank.
fn compress(colors: &[u64]) -> Vec<u32> {
    let distinct: BTreeSet<u64> = colors.iter().copied().collect();
    let index: BTreeMap<u64, u32> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, i as u32))
        .collect();
    colors.iter().map(|c| index[c]).collect()
}

fn count_colors(colors: &[u32]) -> usize {
    colors.iter().collect::<BTreeSet<_>>().len()
}

/// Colour refinement until the partition is stable. New colours are ranks
/// of (old colour, in-neighbour colours, out-neighbour colours), so the
/// relative order of existing cells is preserved.
fn refine(adj: &Adjacency, colors: Vec<u32>) -> Vec<u32> {
    let mut colors = colors;
    let mut classes = count_colors(&colors);
    loop {
        let sigs: Vec<(u32, Vec<u32>, Vec<u32>)> = (0..colors.len())
            .map(|v| {
                let mut ins: Vec<u32> = adj.ins[v].iter().map(|&u| colors[u]).collect();
                let mut outs: Vec<u32> = adj.outs[v].iter().map(|&u| colors[u]).collect();
                ins.sort_unstable();
                outs.sort_unstable();
                (colors[v], ins, outs)
            })
            .collect();
        let distinct: BTreeSet<&(u32, Vec<u32>, Vec<u32>)> = sigs.iter().collect();
        let index: BTreeMap<&(u32, Vec<u32>, Vec<u32>), u32> = distinct
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i as u32))
            .collect();
        let next: Vec<u32> = sigs.iter().map(|s| index[s]).collect();
        let next_classes = index.len();
        colors = next;
        if next_classes == classes {
            return colors;
        }
        classes = next_classes;
    }
}

fn encode(g: &ColoredGraph, base: &[u32], leaf: &[u32]) -> (Vec<u64>, Vec<usize>) {
    let n = leaf.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| leaf[v]);
    let mut pos = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut edges: Vec<(usize, usize)> = g.edges.iter().map(|&(u, v)| (pos[u], pos[v])).collect();
    edges.sort_unstable();
    let mut code = Vec::with_capacity(2 + n + 2 * edges.len());
    code.push(n as u64);
    code.extend(order.iter().map(|&v| base[v] as u64));
    code.push(edges.len() as u64);
    for (u, v) in edges {
        code.push(u as u64);
        code.push(v as u64);
    }
    (code, order)
}

fn search(
    g: &ColoredGraph,
    adj: &Adjacency,
    base: &[u32],
    colors: Vec<u32>,
    best: &mut Option<(Vec<u64>, Vec<usize>)>,
) {
    let colors = refine(adj, colors);
    let n = colors.len();
    let mut cells: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        cells.entry(colors[v]).or_default().push(v);
    }
    let target = cells.values().find(|members| members.len() > 1);
    let Some(members) = target else {
        let leaf = encode(g, base, &colors);
        if best.as_ref().is_none_or(|b| leaf.0 < b.0) {
            *best = Some(leaf);
        }
        return;
    };
    // Twins (same neighbourhoods) are interchangeable by an automorphism.
    let mut tried: Vec<(&Vec<usize>, &Vec<usize>)> = Vec::new();
    for &v in members {
        let key = (&adj.ins[v], &adj.outs[v]);
        if tried.contains(&key) {
            continue;
        }
        tried.push(key);
        let mut next: Vec<u32> = colors.iter().map(|&c| c * 2 + 1).collect();
        next[v] = colors[v] * 2;
        search(g, adj, base, next, best);
    }
}

/// Canonical node order and encoding. Nodes in the returned order are sorted
/// by their initial colour first.
pub(crate) fn canonical_labeling(g: &ColoredGraph) -> (Vec<usize>, Vec<u64>) {
    if g.colors.is_empty() {
        return (Vec::new(), vec![0, 0]);
    }
    let adj = Adjacency::new(g);
    let base = compress(&g.colors);
    let mut best = None;
    search(g, &adj, &base, base.clone(), &mut best);
    let (code, order) = best.expect("search visits at least one leaf");
    (order, code)
}

/// Default role of a net relative to a gate subset.
fn default_role(n: &Netlist, gates: &BTreeSet<String>, net: &str, consumers: &[&str]) -> RoleTag {
    if !gates.contains(net) {
        return RoleTag::BoundaryIn;
    }
    let leaves = n.is_primary_output(net) || consumers.iter().any(|c| !gates.contains(*c));
    if leaves {
        RoleTag::BoundaryOut
    } else {
        RoleTag::Internal
    }
}

/// Canonical signature of the subgraph induced by `gate_ids`.
///
/// Nets touching the subgraph are tagged from `tags`, falling back to their
/// boundary role. The result is invariant under renaming and sensitive to
/// gate types, internal wiring and tags.
pub fn subgraph_signature(
    n: &Netlist,
    gate_ids: &BTreeSet<String>,
    tags: &BTreeMap<String, RoleTag>,
) -> Result<NetlistSignature> {
    if gate_ids.is_empty() {
        return Err(Error::Disconnected);
    }
    for id in gate_ids {
        if n.gate(id).is_none() {
            return Err(Error::UnknownGate(id.clone()));
        }
    }
    // Connectivity over gate-to-gate edges.
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([gate_ids.iter().next().unwrap().as_str()]);
    while let Some(g) = queue.pop_front() {
        if !seen.insert(g) {
            continue;
        }
        for input in &n.gate(g).unwrap().inputs {
            if gate_ids.contains(input) {
                queue.push_back(input);
            }
        }
        for other in gate_ids {
            if n.gate(other).unwrap().inputs.iter().any(|i| i == g) {
                queue.push_back(other);
            }
        }
    }
    if seen.len() != gate_ids.len() {
        return Err(Error::Disconnected);
    }

    let fanouts = n.fanouts();
    let mut nets: BTreeSet<&str> = BTreeSet::new();
    for id in gate_ids {
        nets.insert(id);
        nets.extend(n.gate(id).unwrap().inputs.iter().map(String::as_str));
    }
    let gate_list: Vec<&str> = gate_ids.iter().map(String::as_str).collect();
    let net_list: Vec<&str> = nets.iter().copied().collect();
    let mut colors = Vec::new();
    let mut labels = Vec::new();
    for &g in &gate_list {
        let kind = n.gate(g).unwrap().kind;
        colors.push(kind.rank() as u64);
        labels.push(kind.name().to_string());
    }
    for &net in &net_list {
        let role = tags.get(net).copied().unwrap_or_else(|| {
            let consumers = fanouts.get(net).map(Vec::as_slice).unwrap_or(&[]);
            default_role(n, gate_ids, net, consumers)
        });
        colors.push(16 + role as u64);
        labels.push(role.code().to_string());
    }
    let net_index: BTreeMap<&str, usize> = net_list
        .iter()
        .enumerate()
        .map(|(i, &net)| (net, gate_list.len() + i))
        .collect();
    let mut edges = Vec::new();
    for (gi, &g) in gate_list.iter().enumerate() {
        for input in &n.gate(g).unwrap().inputs {
            edges.push((net_index[input.as_str()], gi));
        }
        edges.push((gi, net_index[g]));
    }
    let graph = ColoredGraph { colors, edges };
    let (order, code) = canonical_labeling(&graph);
    let node_part: Vec<&str> = order.iter().map(|&v| labels[v].as_str()).collect();
    let edge_part: Vec<String> = code[2 + order.len()..]
        .chunks(2)
        .map(|c| format!("{}>{}", c[0], c[1]))
        .collect();
    Ok(NetlistSignature(format!(
        "{}|{}",
        node_part.join(","),
        edge_part.join(",")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn renaming_invariance() {
        let a = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\nx = XOR(a, keyinput0)\ny = NOT(x)")
            .unwrap();
        let b = parse_bench("INPUT(b)\nINPUT(keyinput7)\nOUTPUT(z)\nw = XOR(keyinput7, b)\nz = NOT(w)")
            .unwrap();
        let ta = BTreeMap::from([("keyinput0".to_string(), RoleTag::AnchorKeyInput)]);
        let tb = BTreeMap::from([("keyinput7".to_string(), RoleTag::AnchorKeyInput)]);
        let sa = subgraph_signature(&a, &set(&["x", "y"]), &ta).unwrap();
        let sb = subgraph_signature(&b, &set(&["w", "z"]), &tb).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn type_sensitivity() {
        let a = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\nx = XOR(a, keyinput0)\ny = NOT(x)")
            .unwrap();
        let b = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XNOR(a, keyinput0)").unwrap();
        let sa = subgraph_signature(&a, &set(&["x", "y"]), &BTreeMap::new()).unwrap();
        let sb = subgraph_signature(&b, &set(&["y"]), &BTreeMap::new()).unwrap();
        assert_ne!(sa, sb);
    }

    #[test]
    fn tag_sensitivity() {
        let a = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)").unwrap();
        let plain = subgraph_signature(&a, &set(&["y"]), &BTreeMap::new()).unwrap();
        let tagged = subgraph_signature(
            &a,
            &set(&["y"]),
            &BTreeMap::from([("a".to_string(), RoleTag::AnchorKeyInput)]),
        )
        .unwrap();
        assert_ne!(plain, tagged);
    }

    #[test]
    fn shared_input_differs_from_distinct_inputs() {
        let a = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nx = AND(a, b)\ny = OR(x, a)").unwrap();
        let b = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nx = AND(a, b)\ny = OR(x, c)")
            .unwrap();
        let sa = subgraph_signature(&a, &set(&["x", "y"]), &BTreeMap::new()).unwrap();
        let sb = subgraph_signature(&b, &set(&["x", "y"]), &BTreeMap::new()).unwrap();
        assert_ne!(sa, sb);
    }

    #[test]
    fn disconnected_rejected() {
        let a = parse_bench("INPUT(a)\nOUTPUT(x)\nOUTPUT(y)\nx = NOT(a)\ny = BUFF(a)").unwrap();
        let err = subgraph_signature(&a, &set(&["x", "y"]), &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::Disconnected));
    }

    #[test]
    fn canonical_labeling_symmetric_graph() {
        // Directed 4-cycle with uniform colours: every rotation is equivalent.
        let g1 = ColoredGraph {
            colors: vec![0; 4],
            edges: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        };
        let g2 = ColoredGraph {
            colors: vec![0; 4],
            edges: vec![(2, 0), (0, 3), (3, 1), (1, 2)],
        };
        assert_eq!(canonical_labeling(&g1).1, canonical_labeling(&g2).1);
        let g3 = ColoredGraph {
            colors: vec![0; 4],
            edges: vec![(0, 1), (1, 0), (2, 3), (3, 2)],
        };
        assert_ne!(canonical_labeling(&g1).1, canonical_labeling(&g3).1);
    }
}
