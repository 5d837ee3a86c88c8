//! Gate neighbourhoods around key inputs, in a name-free canonical order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{canonical_labeling, ColoredGraph, GateType, Netlist};

pub const MIN_SIZE: usize = 3;
pub const MAX_SIZE: usize = 10;
/// Size of the output form predicted by reconstruction.
pub const SNAPSHOT_SIZE: usize = 3;
/// Every size from [`MIN_SIZE`] to [`MAX_SIZE`].
pub const SIZES: std::ops::RangeInclusive<usize> = MIN_SIZE..=MAX_SIZE;

const TYPE_WIDTH: usize = 8;
const TAG_WIDTH: usize = 4;
const HASH_ROUNDS: usize = 4;

/// Boundary role of a slot. Several may hold at once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotTags {
    /// Consumes the anchor key input.
    pub key: bool,
    /// Has an input from outside the locality.
    pub external_in: bool,
    /// Feeds a gate outside the locality or a primary output.
    pub external_out: bool,
    /// No connection leaves the locality.
    pub internal: bool,
}

impl SlotTags {
    fn bits(self) -> [bool; TAG_WIDTH] {
        [self.key, self.external_in, self.external_out, self.internal]
    }

    fn code(self) -> u64 {
        self.bits()
            .iter()
            .fold(0, |acc, &b| (acc << 1) | b as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    /// `None` marks padding.
    pub kind: Option<GateType>,
    /// BFS distance from the anchor's consumers.
    pub depth: usize,
    pub tags: SlotTags,
}

impl Slot {
    fn empty() -> Self {
        Slot {
            kind: None,
            depth: 0,
            tags: SlotTags::default(),
        }
    }
}

/// A canonically ordered gate neighbourhood of a key input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locality {
    pub anchor: String,
    pub size: usize,
    pub slots: Vec<Slot>,
    /// Row-major `size × size`; entry `(r, c)` is set when slot `r` drives
    /// slot `c`.
    pub adjacency: Vec<bool>,
    /// The anchor had no consumers.
    pub disconnected: bool,
    /// Source gate per slot. Not part of the structure.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gate_ids: Vec<Option<String>>,
}

/// A locality of size [`SNAPSHOT_SIZE`].
pub type Snapshot = Locality;

impl Locality {
    fn empty(anchor: &str, size: usize) -> Self {
        Locality {
            anchor: anchor.to_string(),
            size,
            slots: vec![Slot::empty(); size],
            adjacency: vec![false; size * size],
            disconnected: true,
            gate_ids: vec![None; size],
        }
    }

    pub fn edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from * self.size + to]
    }

    /// Number of real (non-padding) slots.
    pub fn gate_count(&self) -> usize {
        self.slots.iter().filter(|s| s.kind.is_some()).count()
    }

    /// Position of the first slot fed by the anchor.
    pub fn key_slot(&self) -> Option<usize> {
        self.slots.iter().position(|s| s.tags.key)
    }

    /// Text form of exactly the information carried by [`encode`].
    pub fn signature(&self) -> String {
        let mut s = String::new();
        for slot in &self.slots {
            match slot.kind {
                Some(k) => {
                    let _ = write!(s, "{}:{}:{:x};", k.name(), slot.depth, slot.tags.code());
                }
                None => s.push_str("-;"),
            }
        }
        s.push('|');
        for &b in &self.adjacency {
            s.push(if b { '1' } else { '0' });
        }
        s
    }

    /// Length of [`encode`]'s output for a locality of `size` slots.
    pub fn feature_len(size: usize) -> usize {
        size * TYPE_WIDTH + size * size + size + size * TAG_WIDTH
    }
}

/// Fixed-length numeric form: per-slot type one-hots, the adjacency matrix,
/// per-slot depth (-1 for padding) and per-slot tag bits.
pub fn encode<T: Float>(l: &Locality) -> Vec<T> {
    let n = l.size;
    let bit = |b: bool| if b { T::one() } else { T::zero() };
    let mut out = Vec::with_capacity(Locality::feature_len(n));
    for slot in &l.slots {
        for k in GateType::ALL {
            out.push(bit(slot.kind == Some(k)));
        }
    }
    out.extend(l.adjacency.iter().map(|&b| bit(b)));
    for slot in &l.slots {
        out.push(match slot.kind {
            Some(_) => T::from(slot.depth).expect("depth fits any float"),
            None => -T::one(),
        });
    }
    for slot in &l.slots {
        out.extend(slot.tags.bits().iter().map(|&b| bit(b)));
    }
    out
}

/// Positional mismatch between two snapshots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotDiff {
    pub gate_error: usize,
    pub link_error: usize,
}

impl SnapshotDiff {
    pub fn is_exact(&self) -> bool {
        self.gate_error == 0 && self.link_error == 0
    }
}

pub fn snapshot_diff(predicted: &Snapshot, truth: &Snapshot) -> Result<SnapshotDiff> {
    if predicted.size != truth.size {
        return Err(Error::LocalitySize(predicted.size));
    }
    let gate_error = predicted
        .slots
        .iter()
        .zip(&truth.slots)
        .filter(|(a, b)| a.kind != b.kind)
        .count();
    let link_error = predicted
        .adjacency
        .iter()
        .zip(&truth.adjacency)
        .filter(|(a, b)| a != b)
        .count();
    Ok(SnapshotDiff {
        gate_error,
        link_error,
    })
}

fn mix(mut h: u64, v: u64) -> u64 {
    h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Reusable extraction context for one netlist.
///
/// Holds consumer lists and name-free structural hashes of every gate, so
/// many anchors can be extracted cheaply.
pub struct LocalityExtractor<'a> {
    netlist: &'a Netlist,
    consumers: HashMap<&'a str, Vec<&'a str>>,
    hashes: HashMap<&'a str, u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Reach {
    dir: u8,
    parent: usize,
}

impl<'a> LocalityExtractor<'a> {
    pub fn new(netlist: &'a Netlist) -> Self {
        let mut consumers: HashMap<&str, Vec<&str>> = HashMap::new();
        for (net, list) in netlist.fanouts() {
            consumers.insert(net, list);
        }
        let gates = netlist.gates();
        let mut hashes: HashMap<&str, u64> = gates
            .iter()
            .map(|(id, g)| {
                let outside = g.inputs.iter().filter(|i| !gates.contains_key(*i)).count();
                let h = mix(
                    mix(g.kind.rank() as u64, outside as u64),
                    netlist.is_primary_output(id) as u64,
                );
                (id.as_str(), h)
            })
            .collect();
        for _ in 0..HASH_ROUNDS {
            let next: HashMap<&str, u64> = gates
                .iter()
                .map(|(id, g)| {
                    let mut ins: Vec<u64> = g
                        .inputs
                        .iter()
                        .filter_map(|i| hashes.get(i.as_str()).copied())
                        .collect();
                    ins.sort_unstable();
                    let mut outs: Vec<u64> = consumers
                        .get(id.as_str())
                        .map(|c| c.iter().map(|c| hashes[c]).collect())
                        .unwrap_or_default();
                    outs.sort_unstable();
                    let mut h = mix(hashes[id.as_str()], 1);
                    for x in ins {
                        h = mix(h, x);
                    }
                    h = mix(h, 2);
                    for x in outs {
                        h = mix(h, x);
                    }
                    (id.as_str(), h)
                })
                .collect();
            hashes = next;
        }
        LocalityExtractor {
            netlist,
            consumers,
            hashes,
        }
    }

    pub fn netlist(&self) -> &'a Netlist {
        self.netlist
    }

    fn consumers_of(&self, net: &str) -> &[&'a str] {
        self.consumers.get(net).map_or(&[], Vec::as_slice)
    }

    /// Gates in BFS order from the anchor's consumers, with their layer and
    /// reach direction, stopping once `limit` gates are known.
    fn bfs(&self, anchor: &str, limit: usize) -> Vec<(&'a str, usize, u8)> {
        let gates = self.netlist.gates();
        let key = |id: &'a str, r: Reach| {
            (
                r.dir,
                gates[id].kind.rank(),
                self.hashes[id],
                r.parent,
                id,
            )
        };
        let mut order: Vec<(&str, usize, u8)> = Vec::new();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut frontier: Vec<(&str, Reach)> = self
            .consumers_of(anchor)
            .iter()
            .map(|&g| (g, Reach { dir: 0, parent: 0 }))
            .collect();
        let mut layer = 0;
        while !frontier.is_empty() && order.len() < limit {
            frontier.sort_by_key(|&(id, r)| key(id, r));
            let start = order.len();
            for &(id, r) in &frontier {
                seen.insert(id);
                order.push((id, layer, r.dir));
            }
            let mut next: BTreeMap<&str, Reach> = BTreeMap::new();
            for (pos, &(id, _, _)) in order.iter().enumerate().skip(start) {
                let fan_in = gates[id]
                    .inputs
                    .iter()
                    .filter_map(|i| gates.get_key_value(i.as_str()).map(|(k, _)| k.as_str()))
                    .map(|g| (g, 0u8));
                let fan_out = self.consumers_of(id).iter().map(|&g| (g, 1u8));
                for (g, dir) in fan_in.chain(fan_out) {
                    if seen.contains(g) {
                        continue;
                    }
                    let r = Reach { dir, parent: pos };
                    next.entry(g)
                        .and_modify(|old| *old = (*old).min(r))
                        .or_insert(r);
                }
            }
            frontier = next.into_iter().collect();
            layer += 1;
        }
        order
    }

    /// The locality of `size` gates around key input `anchor`.
    pub fn extract(&self, anchor: &str, size: usize) -> Result<Locality> {
        if !SIZES.contains(&size) {
            return Err(Error::LocalitySize(size));
        }
        if !self.netlist.is_key_input(anchor) {
            return Err(Error::NotAKeyInput(anchor.to_string()));
        }
        let mut picked = self.bfs(anchor, size);
        picked.truncate(size);
        if picked.is_empty() {
            return Ok(Locality::empty(anchor, size));
        }
        let gates = self.netlist.gates();
        let index: HashMap<&str, usize> = picked
            .iter()
            .enumerate()
            .map(|(i, &(id, _, _))| (id, i))
            .collect();
        let tags: Vec<SlotTags> = picked
            .iter()
            .map(|&(id, _, _)| {
                let g = &gates[id];
                let key = g.inputs.iter().any(|i| i == anchor);
                let external_in = g
                    .inputs
                    .iter()
                    .any(|i| i != anchor && !index.contains_key(i.as_str()));
                let external_out = self.netlist.is_primary_output(id)
                    || self
                        .consumers_of(id)
                        .iter()
                        .any(|c| !index.contains_key(c));
                SlotTags {
                    key,
                    external_in,
                    external_out,
                    internal: !external_in && !external_out,
                }
            })
            .collect();
        let mut edges = Vec::new();
        for (v, &(id, _, _)) in picked.iter().enumerate() {
            let mut drivers: Vec<usize> = gates[id]
                .inputs
                .iter()
                .filter_map(|i| index.get(i.as_str()).copied())
                .collect();
            drivers.sort_unstable();
            drivers.dedup();
            edges.extend(drivers.into_iter().map(|u| (u, v)));
        }
        let colors: Vec<u64> = picked
            .iter()
            .zip(&tags)
            .map(|(&(id, layer, dir), t)| {
                ((layer as u64) << 12)
                    | ((dir as u64) << 8)
                    | ((gates[id].kind.rank() as u64) << 4)
                    | t.code()
            })
            .collect();
        let (order, _) = canonical_labeling(&ColoredGraph {
            colors,
            edges: edges.clone(),
        });
        let mut pos = vec![0usize; order.len()];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }

        let mut l = Locality::empty(anchor, size);
        l.disconnected = false;
        for (p, &v) in order.iter().enumerate() {
            let (id, layer, _) = picked[v];
            l.slots[p] = Slot {
                kind: Some(gates[id].kind),
                depth: layer,
                tags: tags[v],
            };
            l.gate_ids[p] = Some(id.to_string());
        }
        for (u, v) in edges {
            l.adjacency[pos[u] * size + pos[v]] = true;
        }
        Ok(l)
    }

    /// Localities for every size in [`SIZES`].
    pub fn extract_all(&self, anchor: &str) -> Result<Vec<Locality>> {
        SIZES.map(|s| self.extract(anchor, s)).collect()
    }
}

/// One-off extraction; use [`LocalityExtractor`] for many anchors.
pub fn extract_locality(n: &Netlist, anchor: &str, size: usize) -> Result<Locality> {
    LocalityExtractor::new(n).extract(anchor, size)
}
