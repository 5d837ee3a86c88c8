//! Gate-level netlist representation.
//!
//! A [`Netlist`] is an acyclic graph of typed gates. Every gate drives exactly
//! one net, and the gate is identified by the name of that net. All maps are
//! ordered so that iteration is lexicographic over ids, which keeps every
//! downstream stage deterministic.

mod bench;
mod dot;
mod signature;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bench::{parse_bench, write_bench, write_bench_with_header};
pub use dot::{export_dot, NodeColor};
pub use signature::{subgraph_signature, NetlistSignature, RoleTag};

pub(crate) use signature::{canonical_labeling, ColoredGraph};

/// Largest number of inputs a single gate may have.
pub const MAX_FAN_IN: usize = 8;

const KEY_PREFIX: &str = "keyinput";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateType {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buff,
}

impl GateType {
    /// All gate types in rank order.
    pub const ALL: [GateType; 8] = [
        GateType::And,
        GateType::Nand,
        GateType::Or,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Not,
        GateType::Buff,
    ];

    /// Fixed position of the type in [`GateType::ALL`].
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GateType::And => "AND",
            GateType::Nand => "NAND",
            GateType::Or => "OR",
            GateType::Nor => "NOR",
            GateType::Xor => "XOR",
            GateType::Xnor => "XNOR",
            GateType::Not => "NOT",
            GateType::Buff => "BUFF",
        }
    }

    /// Case-insensitive lookup; `BUF` is accepted as an alias of `BUFF`.
    pub fn from_name(name: &str) -> Option<GateType> {
        let upper = name.trim().to_ascii_uppercase();
        let kind = match upper.as_str() {
            "AND" => GateType::And,
            "NAND" => GateType::Nand,
            "OR" => GateType::Or,
            "NOR" => GateType::Nor,
            "XOR" => GateType::Xor,
            "XNOR" => GateType::Xnor,
            "NOT" | "INV" => GateType::Not,
            "BUFF" | "BUF" => GateType::Buff,
            _ => return None,
        };
        Some(kind)
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateType::Not | GateType::Buff)
    }

    /// The type computing the complement of this one.
    pub fn complement(self) -> GateType {
        match self {
            GateType::And => GateType::Nand,
            GateType::Nand => GateType::And,
            GateType::Or => GateType::Nor,
            GateType::Nor => GateType::Or,
            GateType::Xor => GateType::Xnor,
            GateType::Xnor => GateType::Xor,
            GateType::Not => GateType::Buff,
            GateType::Buff => GateType::Not,
        }
    }

    /// Whether the output is inverted relative to the base function.
    pub fn is_inverting(self) -> bool {
        matches!(
            self,
            GateType::Nand | GateType::Nor | GateType::Xnor | GateType::Not
        )
    }

    /// Evaluate 64 patterns at once, one per bit.
    pub fn eval_words(self, inputs: &[u64]) -> u64 {
        let base = match self {
            GateType::And | GateType::Nand => inputs.iter().fold(!0u64, |acc, w| acc & w),
            GateType::Or | GateType::Nor => inputs.iter().fold(0u64, |acc, w| acc | w),
            GateType::Xor | GateType::Xnor => inputs.iter().fold(0u64, |acc, w| acc ^ w),
            GateType::Not | GateType::Buff => inputs[0],
        };
        if self.is_inverting() {
            !base
        } else {
            base
        }
    }

    pub fn eval(self, inputs: &[bool]) -> bool {
        let words: Vec<u64> = inputs.iter().map(|&b| if b { 1 } else { 0 }).collect();
        self.eval_words(&words) & 1 == 1
    }

    fn check_arity(self, gate: &str, arity: usize) -> Result<()> {
        let ok = if self.is_unary() {
            arity == 1
        } else {
            (2..=MAX_FAN_IN).contains(&arity)
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Arity {
                gate: gate.to_string(),
                message: format!("{} with {} inputs", self.name(), arity),
            })
        }
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gate: its type and ordered input nets. The output net is the gate id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateType,
    pub inputs: Vec<String>,
}

impl Gate {
    pub fn new(kind: GateType, inputs: Vec<String>) -> Self {
        Gate { kind, inputs }
    }
}

/// Whether `name` follows the `keyinput<N>` convention.
pub fn is_key_name(name: &str) -> bool {
    key_index(name).is_some()
}

/// The `N` of a `keyinput<N>` name.
pub fn key_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix(KEY_PREFIX)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn key_name(index: usize) -> String {
    format!("{KEY_PREFIX}{index}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    primary_inputs: Vec<String>,
    key_inputs: Vec<String>,
    primary_outputs: Vec<String>,
    gates: BTreeMap<String, Gate>,
}

impl Netlist {
    /// Build a netlist, checking every structural invariant.
    pub fn new(
        primary_inputs: Vec<String>,
        key_inputs: Vec<String>,
        primary_outputs: Vec<String>,
        gates: BTreeMap<String, Gate>,
    ) -> Result<Self> {
        let n = Netlist {
            primary_inputs,
            key_inputs,
            primary_outputs,
            gates,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn primary_inputs(&self) -> &[String] {
        &self.primary_inputs
    }

    pub fn key_inputs(&self) -> &[String] {
        &self.key_inputs
    }

    pub fn primary_outputs(&self) -> &[String] {
        &self.primary_outputs
    }

    pub fn gates(&self) -> &BTreeMap<String, Gate> {
        &self.gates
    }

    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.get(id)
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn is_primary_input(&self, net: &str) -> bool {
        self.primary_inputs.iter().any(|p| p == net)
    }

    pub fn is_key_input(&self, net: &str) -> bool {
        self.key_inputs.iter().any(|k| k == net)
    }

    pub fn is_primary_output(&self, net: &str) -> bool {
        self.primary_outputs.iter().any(|p| p == net)
    }

    /// Whether some primary input, key input or gate drives `net`.
    pub fn has_net(&self, net: &str) -> bool {
        self.gates.contains_key(net) || self.is_primary_input(net) || self.is_key_input(net)
    }

    /// All net names, sorted.
    pub fn nets(&self) -> BTreeSet<&str> {
        self.primary_inputs
            .iter()
            .chain(self.key_inputs.iter())
            .map(String::as_str)
            .chain(self.gates.keys().map(String::as_str))
            .collect()
    }

    /// Consumer gate ids per net, sorted and deduplicated. Nets without
    /// consumers map to an empty list.
    pub fn fanouts(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> =
            self.nets().into_iter().map(|n| (n, Vec::new())).collect();
        for (id, gate) in &self.gates {
            for input in &gate.inputs {
                let consumers = map.entry(input.as_str()).or_default();
                if consumers.last() != Some(&id.as_str()) {
                    consumers.push(id.as_str());
                }
            }
        }
        map
    }

    /// Gate ids in dependency order; ties are broken lexicographically.
    pub fn topo_order(&self) -> Result<Vec<String>> {
        topo_sort(&self.gates)
    }

    /// Check every invariant of the representation.
    pub fn validate(&self) -> Result<()> {
        let mut drivers: BTreeSet<&str> = BTreeSet::new();
        for name in self
            .primary_inputs
            .iter()
            .chain(self.key_inputs.iter())
            .chain(self.gates.keys())
        {
            if !drivers.insert(name) {
                return Err(Error::DuplicateDriver(name.clone()));
            }
        }
        for (id, gate) in &self.gates {
            gate.kind.check_arity(id, gate.inputs.len())?;
            for input in &gate.inputs {
                if !drivers.contains(input.as_str()) {
                    return Err(Error::UndrivenNet(input.clone()));
                }
            }
        }
        for po in &self.primary_outputs {
            if !drivers.contains(po.as_str()) {
                return Err(Error::DanglingOutput(po.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for po in &self.primary_outputs {
            if !seen.insert(po) {
                return Err(Error::Invalid(format!("primary output `{po}` listed twice")));
            }
        }
        self.topo_order()?;
        Ok(())
    }

    /// Gate ids in the transitive fan-in of `net`, including its driver.
    pub fn fan_in_cone(&self, net: &str) -> BTreeSet<&str> {
        let mut cone = BTreeSet::new();
        let mut stack = vec![net];
        while let Some(n) = stack.pop() {
            if let Some((id, gate)) = self.gates.get_key_value(n) {
                if cone.insert(id.as_str()) {
                    stack.extend(gate.inputs.iter().map(String::as_str));
                }
            }
        }
        cone
    }

    /// Smallest unused index for a new `keyinput<N>`.
    pub fn next_key_index(&self) -> usize {
        self.key_inputs
            .iter()
            .filter_map(|k| key_index(k))
            .map(|i| i + 1)
            .max()
            .unwrap_or(0)
    }

    /// A net name derived from `base` that is not yet in use.
    pub fn fresh_name(&self, base: &str) -> String {
        if !self.has_net(base) {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|n| !self.has_net(n))
            .expect("unbounded suffix search")
    }

    pub(crate) fn into_parts(
        self,
    ) -> (
        Vec<String>,
        Vec<String>,
        Vec<String>,
        BTreeMap<String, Gate>,
    ) {
        (
            self.primary_inputs,
            self.key_inputs,
            self.primary_outputs,
            self.gates,
        )
    }

    /// Rename every net through `f`. The mapping must be injective.
    pub fn renamed(&self, mut f: impl FnMut(&str) -> String) -> Result<Netlist> {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        for net in self.nets() {
            map.insert(net, f(net));
        }
        let get = |n: &String| map[n.as_str()].clone();
        let gates = self
            .gates
            .iter()
            .map(|(id, g)| {
                (
                    get(id),
                    Gate::new(g.kind, g.inputs.iter().map(get).collect()),
                )
            })
            .collect();
        Netlist::new(
            self.primary_inputs.iter().map(get).collect(),
            self.key_inputs.iter().map(get).collect(),
            self.primary_outputs.iter().map(get).collect(),
            gates,
        )
    }
}

/// Topological order of a gate map; inputs not driven by a gate in the map
/// are treated as sources. Ties are broken lexicographically.
pub(crate) fn topo_sort(gates: &BTreeMap<String, Gate>) -> Result<Vec<String>> {
    let mut pending: BTreeMap<&str, usize> = BTreeMap::new();
    let mut consumers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, gate) in gates {
        let mut count = 0;
        for input in &gate.inputs {
            if gates.contains_key(input) {
                count += 1;
                consumers.entry(input.as_str()).or_default().push(id);
            }
        }
        pending.insert(id, count);
    }
    let mut ready: BTreeSet<&str> = pending
        .iter()
        .filter(|(_, &c)| c == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(id) = ready.pop_first() {
        order.push(id.to_string());
        if let Some(next) = consumers.get(id) {
            for &c in next {
                let count = pending.get_mut(c).expect("consumer registered");
                *count -= 1;
                if *count == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    if order.len() != gates.len() {
        let stuck = pending
            .iter()
            .find(|(_, &c)| c > 0)
            .map(|(&id, _)| id.to_string())
            .unwrap_or_default();
        return Err(Error::Cycle(stuck));
    }
    Ok(order)
}

/// Lowest-level assembly of a netlist from text-free parts; used by tests and
/// generators.
#[derive(Default, Debug, Clone)]
pub struct NetlistBuilder {
    inputs: Vec<String>,
    keys: Vec<String>,
    outputs: Vec<String>,
    gates: BTreeMap<String, Gate>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an input; `keyinput<N>` names become key inputs.
    pub fn input(&mut self, name: impl Into<String>) -> &mut Self {
        let name = name.into();
        if is_key_name(&name) {
            self.keys.push(name);
        } else {
            self.inputs.push(name);
        }
        self
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push(name.into());
        self
    }

    pub fn gate<S: Into<String>>(
        &mut self,
        out: impl Into<String>,
        kind: GateType,
        inputs: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.gates.insert(
            out.into(),
            Gate::new(kind, inputs.into_iter().map(Into::into).collect()),
        );
        self
    }

    pub fn build(&self) -> Result<Netlist> {
        Netlist::new(
            self.inputs.clone(),
            self.keys.clone(),
            self.outputs.clone(),
            self.gates.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_topo_order() {
        let n = NetlistBuilder::new()
            .input("a")
            .output("g2")
            .gate("g1", GateType::Not, ["a"])
            .gate("g2", GateType::Not, ["g1"])
            .build()
            .unwrap();
        assert_eq!(n.topo_order().unwrap(), vec!["g1", "g2"]);
    }

    #[test]
    fn independent_gates_sorted_lexicographically() {
        let n = NetlistBuilder::new()
            .input("a")
            .output("g_b")
            .output("g_a")
            .gate("g_b", GateType::Not, ["a"])
            .gate("g_a", GateType::Buff, ["a"])
            .build()
            .unwrap();
        assert_eq!(n.topo_order().unwrap(), vec!["g_a", "g_b"]);
    }

    #[test]
    fn cycle_rejected() {
        let err = NetlistBuilder::new()
            .input("a")
            .output("x")
            .gate("x", GateType::And, ["a", "y"])
            .gate("y", GateType::Not, ["x"])
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn arity_rules() {
        let err = NetlistBuilder::new()
            .input("a")
            .output("x")
            .gate("x", GateType::And, ["a"])
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Arity { .. }));
        let wide: Vec<String> = (0..9).map(|_| "a".to_string()).collect();
        let err = NetlistBuilder::new()
            .input("a")
            .output("x")
            .gate("x", GateType::Or, wide)
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Arity { .. }));
    }

    #[test]
    fn key_name_convention() {
        assert_eq!(key_index("keyinput12"), Some(12));
        assert_eq!(key_index("keyinput"), None);
        assert_eq!(key_index("keyinputx"), None);
        assert_eq!(key_index("Keyinput1"), None);
    }

    #[test]
    fn gate_functions() {
        use GateType::*;
        assert!(!Xor.eval(&[true, true]));
        assert!(Xnor.eval(&[true, true]));
        assert!(Nand.eval(&[true, false]));
        assert!(!Nor.eval(&[true, false]));
        assert!(Xor.eval(&[true, true, true]));
        assert!(Not.eval(&[false]));
        for kind in GateType::ALL {
            assert_eq!(kind.complement().complement(), kind);
        }
    }

    #[test]
    fn cone_of_chain() {
        let n = NetlistBuilder::new()
            .input("a")
            .output("g3")
            .gate("g1", GateType::Not, ["a"])
            .gate("g2", GateType::Not, ["g1"])
            .gate("g3", GateType::Not, ["g2"])
            .build()
            .unwrap();
        assert_eq!(n.fan_in_cone("g3").len(), 3);
        assert_eq!(n.fan_in_cone("a").len(), 0);
    }
}
