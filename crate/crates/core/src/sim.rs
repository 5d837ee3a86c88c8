//! Functional evaluation, key binding and equivalence checking.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{Gate, GateType, Netlist};

/// Net name to bit.
pub type Assignment = BTreeMap<String, bool>;

/// Primary inputs at or below this count are checked exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 16;

const DEFAULT_EQUIV_SEED: u64 = 0x5eed_e01e;

/// A netlist flattened into index form for word-parallel simulation.
#[derive(Debug, Clone)]
pub struct CompiledNetlist {
    inputs: Vec<String>,
    outputs: Vec<usize>,
    output_names: Vec<String>,
    gates: Vec<(GateType, Vec<usize>)>,
}

impl CompiledNetlist {
    /// Inputs are indexed in the order primary inputs, then key inputs.
    pub fn new(n: &Netlist) -> Self {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let inputs: Vec<String> = n
            .primary_inputs()
            .iter()
            .chain(n.key_inputs())
            .cloned()
            .collect();
        for (i, name) in inputs.iter().enumerate() {
            index.insert(name, i);
        }
        let order = n.topo_order().expect("validated netlist is acyclic");
        let mut gates = Vec::with_capacity(order.len());
        for id in &order {
            let gate = &n.gates()[id];
            let ins = gate.inputs.iter().map(|i| index[i.as_str()]).collect();
            index.insert(id, inputs.len() + gates.len());
            gates.push((gate.kind, ins));
        }
        let outputs = n
            .primary_outputs()
            .iter()
            .map(|o| index[o.as_str()])
            .collect();
        CompiledNetlist {
            inputs,
            outputs,
            output_names: n.primary_outputs().to_vec(),
            gates,
        }
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    /// Simulate 64 patterns; `words[i]` holds the patterns for input `i`.
    pub fn simulate_words(&self, words: &[u64]) -> Vec<u64> {
        let mut values = Vec::with_capacity(self.inputs.len() + self.gates.len());
        values.extend_from_slice(words);
        let mut scratch = Vec::with_capacity(8);
        for (kind, ins) in &self.gates {
            scratch.clear();
            scratch.extend(ins.iter().map(|&i| values[i]));
            values.push(kind.eval_words(&scratch));
        }
        self.outputs.iter().map(|&o| values[o]).collect()
    }
}

/// Evaluate the netlist on one input vector covering every primary and key input.
pub fn evaluate(n: &Netlist, inputs: &Assignment) -> Result<Assignment> {
    let compiled = CompiledNetlist::new(n);
    let words = compiled
        .input_names()
        .iter()
        .map(|name| {
            inputs
                .get(name)
                .map(|&b| if b { 1u64 } else { 0 })
                .ok_or_else(|| Error::MissingInput(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let outs = compiled.simulate_words(&words);
    Ok(compiled
        .output_names()
        .iter()
        .zip(outs)
        .map(|(name, w)| (name.clone(), w & 1 == 1))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquivalenceMode {
    Exhaustive,
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub vectors_tried: u64,
    pub first_counterexample: Option<Assignment>,
    pub mode: EquivalenceMode,
}

impl EquivalenceReport {
    /// True only when equivalence was established exhaustively.
    pub fn is_proof(&self) -> bool {
        self.equivalent && self.mode == EquivalenceMode::Exhaustive
    }
}

/// Compare two key-free netlists with identical interfaces.
///
/// Up to [`EXHAUSTIVE_LIMIT`] primary inputs every vector is tried; beyond that
/// `budget` seeded random vectors are used.
pub fn check_equivalence(a: &Netlist, b: &Netlist, budget: u64) -> Result<EquivalenceReport> {
    check_equivalence_seeded(a, b, budget, DEFAULT_EQUIV_SEED)
}

pub fn check_equivalence_seeded(
    a: &Netlist,
    b: &Netlist,
    budget: u64,
    seed: u64,
) -> Result<EquivalenceReport> {
    if !a.key_inputs().is_empty() || !b.key_inputs().is_empty() {
        return Err(Error::InterfaceMismatch(
            "equivalence checking requires key-free netlists".into(),
        ));
    }
    compare(a, b, budget, seed)
}

/// Like [`check_equivalence`], treating key inputs as ordinary inputs; both
/// netlists must have the same key input set. The exhaustive limit counts
/// key inputs too.
pub fn check_equivalence_keyed(a: &Netlist, b: &Netlist, budget: u64) -> Result<EquivalenceReport> {
    let ka: BTreeSet<&String> = a.key_inputs().iter().collect();
    let kb: BTreeSet<&String> = b.key_inputs().iter().collect();
    if ka != kb {
        return Err(Error::InterfaceMismatch("key input sets differ".into()));
    }
    compare(a, b, budget, DEFAULT_EQUIV_SEED)
}

fn compare(a: &Netlist, b: &Netlist, budget: u64, seed: u64) -> Result<EquivalenceReport> {
    let pa: BTreeSet<&String> = a.primary_inputs().iter().collect();
    let pb: BTreeSet<&String> = b.primary_inputs().iter().collect();
    if pa != pb {
        return Err(Error::InterfaceMismatch("primary input sets differ".into()));
    }
    let oa: BTreeSet<&String> = a.primary_outputs().iter().collect();
    let ob: BTreeSet<&String> = b.primary_outputs().iter().collect();
    if oa != ob {
        return Err(Error::InterfaceMismatch("primary output sets differ".into()));
    }

    let ca = CompiledNetlist::new(a);
    let cb = CompiledNetlist::new(b);
    // Shared input order: sorted names.
    let names: Vec<String> = ca
        .input_names()
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos = |c: &CompiledNetlist| -> Vec<usize> {
        c.input_names()
            .iter()
            .map(|n| names.binary_search(n).expect("same input set"))
            .collect()
    };
    let (perm_a, perm_b) = (pos(&ca), pos(&cb));
    let out_perm: Vec<usize> = ca
        .output_names()
        .iter()
        .map(|o| cb.output_names().iter().position(|p| p == o).unwrap())
        .collect();

    let exhaustive = names.len() <= EXHAUSTIVE_LIMIT;
    let total: u64 = if exhaustive {
        1u64 << names.len().min(63)
    } else {
        budget
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried = 0u64;
    while tried < total {
        let lanes = (total - tried).min(64);
        let shared: Vec<u64> = (0..names.len())
            .map(|j| {
                if exhaustive {
                    (0..lanes).fold(0u64, |acc, lane| {
                        acc | ((((tried + lane) >> j) & 1) << lane)
                    })
                } else {
                    rng.gen::<u64>()
                }
            })
            .collect();
        let wa: Vec<u64> = perm_a.iter().map(|&p| shared[p]).collect();
        let wb: Vec<u64> = perm_b.iter().map(|&p| shared[p]).collect();
        let ra = ca.simulate_words(&wa);
        let rb = cb.simulate_words(&wb);
        let mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        let diff = ra
            .iter()
            .zip(&out_perm)
            .fold(0u64, |acc, (&x, &p)| acc | (x ^ rb[p]))
            & mask;
        if diff != 0 {
            let lane = diff.trailing_zeros() as u64;
            let cex = names
                .iter()
                .zip(&shared)
                .map(|(n, w)| (n.clone(), (w >> lane) & 1 == 1))
                .collect();
            return Ok(EquivalenceReport {
                equivalent: false,
                vectors_tried: tried + lane + 1,
                first_counterexample: Some(cex),
                mode: if exhaustive {
                    EquivalenceMode::Exhaustive
                } else {
                    EquivalenceMode::Random
                },
            });
        }
        tried += lanes;
    }
    Ok(EquivalenceReport {
        equivalent: true,
        vectors_tried: tried,
        first_counterexample: None,
        mode: if exhaustive {
            EquivalenceMode::Exhaustive
        } else {
            EquivalenceMode::Random
        },
    })
}

enum Folded {
    Const(bool),
    Gate(Gate),
}

/// Simplify a gate given the constant values of some of its inputs.
fn fold(gate: &Gate, consts: &HashMap<String, bool>) -> Option<Folded> {
    let known: Vec<bool> = gate
        .inputs
        .iter()
        .filter_map(|i| consts.get(i).copied())
        .collect();
    if known.is_empty() {
        return None;
    }
    let rest: Vec<String> = gate
        .inputs
        .iter()
        .filter(|i| !consts.contains_key(*i))
        .cloned()
        .collect();
    let kind = gate.kind;
    let shrink = |kind: GateType, rest: Vec<String>| -> Folded {
        if rest.len() == 1 {
            let unary = if kind.is_inverting() {
                GateType::Not
            } else {
                GateType::Buff
            };
            Folded::Gate(Gate::new(unary, rest))
        } else {
            Folded::Gate(Gate::new(kind, rest))
        }
    };
    let folded = match kind {
        GateType::Buff => Folded::Const(known[0]),
        GateType::Not => Folded::Const(!known[0]),
        GateType::And | GateType::Nand | GateType::Or | GateType::Nor => {
            let (dominant, identity_out) = match kind {
                GateType::And | GateType::Nand => (false, true),
                _ => (true, false),
            };
            let inv = kind.is_inverting();
            if known.contains(&dominant) {
                Folded::Const(dominant ^ inv)
            } else if rest.is_empty() {
                Folded::Const(identity_out ^ inv)
            } else {
                shrink(kind, rest)
            }
        }
        GateType::Xor | GateType::Xnor => {
            let parity = known.iter().fold(false, |acc, &b| acc ^ b);
            if rest.is_empty() {
                Folded::Const(parity ^ kind.is_inverting())
            } else {
                let eff = if parity { kind.complement() } else { kind };
                shrink(eff, rest)
            }
        }
    };
    Some(folded)
}

/// Tie every key input to its bit and fold the constants into the consuming
/// logic. Bit `i` binds `n.key_inputs()[i]`.
pub fn bind_key(n: &Netlist, key: &[bool]) -> Result<Netlist> {
    if key.len() != n.key_inputs().len() {
        return Err(Error::KeyLength {
            expected: n.key_inputs().len(),
            got: key.len(),
        });
    }
    let mut consts: HashMap<String, bool> = n
        .key_inputs()
        .iter()
        .cloned()
        .zip(key.iter().copied())
        .collect();
    let mut gates: BTreeMap<String, Gate> = BTreeMap::new();
    for id in n.topo_order()? {
        let gate = &n.gates()[&id];
        match fold(gate, &consts) {
            None => {
                gates.insert(id, gate.clone());
            }
            Some(Folded::Gate(g)) => {
                gates.insert(id, g);
            }
            Some(Folded::Const(v)) => {
                consts.insert(id, v);
            }
        }
    }
    // Constant primary outputs need a driver within the gate library.
    for po in n.primary_outputs() {
        if let Some(&v) = consts.get(po) {
            if n.is_key_input(po) {
                return Err(Error::Invalid(format!(
                    "primary output `{po}` is a key input"
                )));
            }
            let pi = n.primary_inputs().first().ok_or_else(|| {
                Error::Invalid(format!("cannot express constant output `{po}` without inputs"))
            })?;
            let kind = if v { GateType::Xnor } else { GateType::Xor };
            gates.insert(po.clone(), Gate::new(kind, vec![pi.clone(), pi.clone()]));
        }
    }
    Netlist::new(
        n.primary_inputs().to_vec(),
        Vec::new(),
        n.primary_outputs().to_vec(),
        gates,
    )
}
