//! XOR key-gate insertion.
//!
//! A key bit of 0 inserts a single XOR on the chosen net; a key bit of 1
//! inserts the XOR followed by an inverter, so the correct key restores the
//! original function.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{key_name, Gate, GateType, Netlist};

/// Parse a key written as a string of `0`/`1` characters.
pub fn parse_key(text: &str) -> Result<Vec<bool>> {
    text.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Invalid(format!("invalid key character `{other}`"))),
        })
        .collect()
}

pub fn format_key(key: &[bool]) -> String {
    key.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Uniformly random key of `bits` bits.
pub fn random_key(bits: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_795f_6269_7473);
    (0..bits).map(|_| rng.gen()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    /// Uniform random sites.
    Rnd,
    /// Largest fan-in cone first.
    Cs,
    /// Pairs of sites sharing a path.
    Cy,
    /// Greedy overlap of fan-out cones.
    Sll,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] = [
        HeuristicKind::Rnd,
        HeuristicKind::Cs,
        HeuristicKind::Cy,
        HeuristicKind::Sll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Rnd => "rnd",
            HeuristicKind::Cs => "cs",
            HeuristicKind::Cy => "cy",
            HeuristicKind::Sll => "sll",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rnd" | "random" => Ok(HeuristicKind::Rnd),
            "cs" => Ok(HeuristicKind::Cs),
            "cy" => Ok(HeuristicKind::Cy),
            "sll" => Ok(HeuristicKind::Sll),
            other => Err(Error::Invalid(format!("unknown heuristic `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionHeuristic {
    pub kind: HeuristicKind,
    pub seed: u64,
}

impl InsertionHeuristic {
    pub fn new(kind: HeuristicKind, seed: u64) -> Self {
        InsertionHeuristic { kind, seed }
    }
}

/// Provenance of one inserted key-gate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyGateRecord {
    pub key_index: usize,
    pub key_input: String,
    pub key_bit: bool,
    /// The original net that was cut.
    pub anchor_net: String,
    /// The XOR, followed by the inverter when the bit is 1.
    pub inserted_gate_ids: Vec<String>,
}

impl KeyGateRecord {
    pub fn xor_gate(&self) -> &str {
        &self.inserted_gate_ids[0]
    }
}

/// Nets that may receive a key-gate.
///
/// Candidates are primary inputs and gate outputs that are observable
/// (consumed or a primary output). Excluded: nets already feeding a gate
/// with a key input, nets consumed by an inverter, and primary inputs that
/// are also primary outputs.
pub fn eligible_sites(n: &Netlist) -> Vec<String> {
    let fanouts = n.fanouts();
    let has_key_input = |g: &str| {
        n.gate(g)
            .map(|gate| gate.inputs.iter().any(|i| n.is_key_input(i)))
            .unwrap_or(false)
    };
    n.primary_inputs()
        .iter()
        .chain(n.gates().keys())
        .filter(|net| {
            let consumers = &fanouts[net.as_str()];
            let po = n.is_primary_output(net);
            if consumers.is_empty() && !po {
                return false;
            }
            if po && n.is_primary_input(net) {
                return false;
            }
            !consumers
                .iter()
                .any(|&c| has_key_input(c) || n.gate(c).unwrap().kind == GateType::Not)
        })
        .cloned()
        .collect()
}

/// Dense bitsets over net indices.
struct Reach {
    index: HashMap<String, usize>,
    fan_in: Vec<Vec<u64>>,
    fan_out: Vec<Vec<u64>>,
    gate_bits: Vec<u64>,
}

fn set_bit(v: &mut [u64], i: usize) {
    v[i / 64] |= 1 << (i % 64);
}

fn test_bit(v: &[u64], i: usize) -> bool {
    v[i / 64] >> (i % 64) & 1 == 1
}

fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

impl Reach {
    fn new(n: &Netlist) -> Self {
        let order = n.topo_order().expect("validated netlist is acyclic");
        let names: Vec<&String> = n
            .primary_inputs()
            .iter()
            .chain(n.key_inputs())
            .chain(order.iter())
            .collect();
        let index: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i))
            .collect();
        let words = names.len().div_ceil(64);
        let mut fan_in = vec![vec![0u64; words]; names.len()];
        let mut gate_bits = vec![0u64; words];
        let first_gate = names.len() - order.len();
        for (offset, id) in order.iter().enumerate() {
            let v = first_gate + offset;
            set_bit(&mut gate_bits, v);
            let mut acc = vec![0u64; words];
            for input in &n.gates()[id].inputs {
                let u = index[input];
                set_bit(&mut acc, u);
                for (a, b) in acc.iter_mut().zip(&fan_in[u]) {
                    *a |= b;
                }
            }
            fan_in[v] = acc;
        }
        let mut fan_out = vec![vec![0u64; words]; names.len()];
        for v in (first_gate..names.len()).rev() {
            let id = names[v];
            for input in &n.gates()[id].inputs {
                let u = index[input];
                let (src, dst) = if u < v {
                    let (lo, hi) = fan_out.split_at_mut(v);
                    (&hi[0], &mut lo[u])
                } else {
                    unreachable!("inputs precede their consumer in topological order")
                };
                set_bit(dst, v);
                for (a, b) in dst.iter_mut().zip(src) {
                    *a |= b;
                }
            }
        }
        Reach {
            index,
            fan_in,
            fan_out,
            gate_bits,
        }
    }

    fn cone_size(&self, net: &str) -> u32 {
        let v = self.index[net];
        let own = u32::from(test_bit(&self.gate_bits, v));
        popcount_and(&self.fan_in[v], &self.gate_bits) + own
    }

    fn shares_path(&self, a: &str, b: &str) -> bool {
        let (ia, ib) = (self.index[a], self.index[b]);
        test_bit(&self.fan_out[ia], ib) || test_bit(&self.fan_out[ib], ia)
    }
}

/// Choose `count` distinct nets for key-gate insertion.
pub fn select_sites(n: &Netlist, count: usize, h: &InsertionHeuristic) -> Result<Vec<String>> {
    let mut eligible = eligible_sites(n);
    if count > eligible.len() {
        return Err(Error::InsufficientSites {
            requested: count,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
    eligible.shuffle(&mut rng);
    let sites = match h.kind {
        HeuristicKind::Rnd => eligible.into_iter().take(count).collect(),
        HeuristicKind::Cs => {
            let reach = Reach::new(n);
            // Stable sort keeps the shuffled order among equal cone sizes.
            eligible.sort_by_key(|net| std::cmp::Reverse(reach.cone_size(net)));
            eligible.into_iter().take(count).collect()
        }
        HeuristicKind::Cy => {
            let reach = Reach::new(n);
            let mut taken = vec![false; eligible.len()];
            let mut sites = Vec::with_capacity(count);
            let mut cursor = 0;
            while sites.len() < count {
                while taken[cursor] {
                    cursor += 1;
                }
                taken[cursor] = true;
                let first = &eligible[cursor];
                sites.push(first.clone());
                if sites.len() == count {
                    break;
                }
                let partner = (0..eligible.len())
                    .find(|&j| !taken[j] && reach.shares_path(first, &eligible[j]));
                if let Some(j) = partner {
                    taken[j] = true;
                    sites.push(eligible[j].clone());
                }
            }
            sites
        }
        HeuristicKind::Sll => {
            let reach = Reach::new(n);
            let words = reach.gate_bits.len();
            let mut union = vec![0u64; words];
            let mut taken = vec![false; eligible.len()];
            let mut sites = Vec::with_capacity(count);
            for _ in 0..count {
                let mut best: Option<(u32, usize)> = None;
                for (j, net) in eligible.iter().enumerate() {
                    if taken[j] {
                        continue;
                    }
                    let score = popcount_and(&reach.fan_out[reach.index[net]], &union);
                    if best.is_none_or(|(s, _)| score > s) {
                        best = Some((score, j));
                    }
                }
                let (_, j) = best.expect("count checked against eligible nets");
                taken[j] = true;
                let v = reach.index[&eligible[j]];
                set_bit(&mut union, v);
                for (a, b) in union.iter_mut().zip(&reach.fan_out[v]) {
                    *a |= b;
                }
                sites.push(eligible[j].clone());
            }
            sites
        }
    };
    Ok(sites)
}

/// Insert one key-gate per key bit at sites chosen by `h`.
///
/// New key inputs continue the numbering of any existing ones, so already
/// locked netlists can be locked again. Records are in key-index order.
pub fn lock(
    n: &Netlist,
    key: &[bool],
    h: &InsertionHeuristic,
) -> Result<(Netlist, Vec<KeyGateRecord>)> {
    let sites = select_sites(n, key.len(), h)?;
    let first_index = n.next_key_index();
    let (pis, mut keys, pos, mut gates) = n.clone().into_parts();
    let mut records = Vec::with_capacity(key.len());

    let taken = |gates: &BTreeMap<String, Gate>, pis: &[String], keys: &[String], name: &str| {
        gates.contains_key(name) || pis.iter().any(|p| p == name) || keys.iter().any(|k| k == name)
    };
    let fresh = |gates: &BTreeMap<String, Gate>, keys: &[String], base: String| -> String {
        if !taken(gates, &pis, keys, &base) {
            return base;
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|c| !taken(gates, &pis, keys, c))
            .unwrap()
    };

    for (offset, (site, &bit)) in sites.iter().zip(key).enumerate() {
        let key_index = first_index + offset;
        let key_input = key_name(key_index);
        if taken(&gates, &pis, &keys, &key_input) {
            return Err(Error::Invalid(format!("net `{key_input}` already exists")));
        }
        keys.push(key_input.clone());

        let is_po = pos.iter().any(|p| p == site);
        let inserted = if is_po {
            // Keep the output name: the original driver moves to a fresh id
            // and the key-gate takes over the net.
            let moved = fresh(&gates, &keys, format!("{site}_pre{key_index}"));
            let original = gates.remove(site).expect("outputs eligible only when gate-driven");
            gates.insert(moved.clone(), original);
            if bit {
                let xor_id = fresh(&gates, &keys, format!("{site}_lk{key_index}"));
                gates.insert(
                    xor_id.clone(),
                    Gate::new(GateType::Xor, vec![moved, key_input.clone()]),
                );
                gates.insert(site.clone(), Gate::new(GateType::Not, vec![xor_id.clone()]));
                vec![xor_id, site.clone()]
            } else {
                gates.insert(
                    site.clone(),
                    Gate::new(GateType::Xor, vec![moved, key_input.clone()]),
                );
                vec![site.clone()]
            }
        } else {
            let xor_id = fresh(&gates, &keys, format!("{site}_lk{key_index}"));
            let mut inserted = vec![xor_id.clone()];
            let driver = if bit {
                let not_id = fresh(&gates, &keys, format!("{site}_lk{key_index}n"));
                inserted.push(not_id.clone());
                not_id
            } else {
                xor_id.clone()
            };
            for gate in gates.values_mut() {
                for input in gate.inputs.iter_mut() {
                    if input == site {
                        *input = driver.clone();
                    }
                }
            }
            gates.insert(
                xor_id.clone(),
                Gate::new(GateType::Xor, vec![site.clone(), key_input.clone()]),
            );
            if bit {
                gates.insert(driver, Gate::new(GateType::Not, vec![xor_id]));
            }
            inserted
        };
        records.push(KeyGateRecord {
            key_index,
            key_input,
            key_bit: bit,
            anchor_net: site.clone(),
            inserted_gate_ids: inserted,
        });
    }
    let locked = Netlist::new(pis, keys, pos, gates)?;
    Ok((locked, records))
}
