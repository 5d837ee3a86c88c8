use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::RewriteLog;
use crate::error::{Error, Result};
use crate::lock::KeyGateRecord;
use crate::locality::{Locality, LocalityExtractor, SNAPSHOT_SIZE};
use crate::netlist::{GateType, Netlist};

/// How much re-synthesis disturbed a key-gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ChangeLevel {
    /// Snapshot unchanged.
    Unchanged = 1,
    /// Key-gate intact, neighbourhood changed.
    Neighborhood = 2,
    /// Key-gate merged, transformed or cut off.
    KeyGate = 3,
}

impl ChangeLevel {
    pub const ALL: [ChangeLevel; 3] = [
        ChangeLevel::Unchanged,
        ChangeLevel::Neighborhood,
        ChangeLevel::KeyGate,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn is_changed(self) -> bool {
        self != ChangeLevel::Unchanged
    }
}

impl From<ChangeLevel> for u8 {
    fn from(l: ChangeLevel) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for ChangeLevel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(ChangeLevel::Unchanged),
            2 => Ok(ChangeLevel::Neighborhood),
            3 => Ok(ChangeLevel::KeyGate),
            _ => Err(format!("change level {v} is not 1, 2 or 3")),
        }
    }
}

impl fmt::Display for ChangeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.number())
    }
}

/// Level of the change `log` made to the key-gate described by `rec`.
pub fn classify_change(
    pre: &Netlist,
    post: &Netlist,
    rec: &KeyGateRecord,
    log: &RewriteLog,
) -> Result<ChangeLevel> {
    classify_with(
        &LocalityExtractor::new(pre),
        &LocalityExtractor::new(post),
        rec,
        log,
    )
}

/// [`classify_change`] with prepared extractors.
pub fn classify_with(
    pre: &LocalityExtractor<'_>,
    post: &LocalityExtractor<'_>,
    rec: &KeyGateRecord,
    log: &RewriteLog,
) -> Result<ChangeLevel> {
    let pre_n = pre.netlist();
    let post_n = post.netlist();
    let xor = rec.xor_gate();
    let found = pre_n.is_key_input(&rec.key_input)
        && pre_n
            .gate(xor)
            .is_some_and(|g| g.inputs.contains(&rec.key_input));
    if !found {
        return Err(Error::RecordNotFound(rec.key_input.clone()));
    }
    if !post_n.is_key_input(&rec.key_input) {
        return Err(Error::InterfaceMismatch(format!(
            "`{}` missing after re-synthesis",
            rec.key_input
        )));
    }
    let before = pre.extract(&rec.key_input, SNAPSHOT_SIZE)?;
    let after = post.extract(&rec.key_input, SNAPSHOT_SIZE)?;
    if before.signature() == after.signature() {
        return Ok(ChangeLevel::Unchanged);
    }
    let consumers: Vec<&str> = post_n
        .gates()
        .iter()
        .filter(|(_, g)| g.inputs.contains(&rec.key_input))
        .map(|(id, _)| id.as_str())
        .collect();
    let intact = consumers == [xor] && post_n.gate(xor).is_some_and(|g| g.kind == GateType::Xor);
    if after.disconnected || log.touches(xor) || !intact {
        Ok(ChangeLevel::KeyGate)
    } else {
        Ok(ChangeLevel::Neighborhood)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformationGroup {
    pub pre: String,
    pub post: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformationTable {
    /// Most frequent first; ties by signature.
    pub groups: Vec<TransformationGroup>,
    pub total: usize,
    /// `(k, p)`: the `k` most frequent groups cover `p` percent of pairs.
    pub coverage: Vec<(usize, f64)>,
}

/// Group `(pre, post)` locality pairs by their signatures.
pub fn enumerate_transformations(corpus: &[(Locality, Locality)]) -> TransformationTable {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (pre, post) in corpus {
        *counts.entry((pre.signature(), post.signature())).or_default() += 1;
    }
    let mut groups: Vec<TransformationGroup> = counts
        .into_iter()
        .map(|((pre, post), count)| TransformationGroup { pre, post, count })
        .collect();
    groups.sort_by_key(|g| std::cmp::Reverse(g.count));
    let total = corpus.len();
    let mut covered = 0;
    let coverage = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            covered += g.count;
            (i + 1, 100.0 * covered as f64 / total as f64)
        })
        .collect();
    TransformationTable {
        groups,
        total,
        coverage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lock::{lock, HeuristicKind, InsertionHeuristic};
    use crate::locality::extract_locality;
    use crate::netlist::parse_bench;
    use crate::rewrite::{builtin_rules, resynthesize, DEFAULT_MAX_PASSES};

    fn level_after(text: &str, bit: bool) -> ChangeLevel {
        let n = parse_bench(text).unwrap();
        let (locked, recs) = lock(&n, &[bit], &InsertionHeuristic::new(HeuristicKind::Rnd, 3)).unwrap();
        let out = resynthesize(&locked, &builtin_rules(), DEFAULT_MAX_PASSES).unwrap();
        classify_change(&locked, &out.netlist, &recs[0], &out.log).unwrap()
    }

    #[test]
    fn untouched_is_level_one() {
        assert_eq!(
            level_after("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)", false),
            ChangeLevel::Unchanged
        );
    }

    #[test]
    fn fused_key_gate_is_level_three() {
        assert_eq!(
            level_after("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)", true),
            ChangeLevel::KeyGate
        );
    }

    #[test]
    fn neighbour_rewrite_is_level_two() {
        let text = "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(keyinput0)\nOUTPUT(y)\n\
             x = XOR(a, keyinput0)\nm = AND(x, b)\ny = NOT(m)";
        let n = parse_bench(text).unwrap();
        let rec = KeyGateRecord {
            key_index: 0,
            key_input: "keyinput0".into(),
            key_bit: false,
            anchor_net: "a".into(),
            inserted_gate_ids: vec!["x".into()],
        };
        let out = resynthesize(&n, &builtin_rules(), DEFAULT_MAX_PASSES).unwrap();
        assert_eq!(out.netlist.gate("y").unwrap().kind, GateType::Nand);
        assert_eq!(
            classify_change(&n, &out.netlist, &rec, &out.log).unwrap(),
            ChangeLevel::Neighborhood
        );
        let mut bad = rec.clone();
        bad.inserted_gate_ids = vec!["m".into()];
        assert!(classify_change(&n, &out.netlist, &bad, &out.log).is_err());
    }

    #[test]
    fn level_serializes_as_number() {
        assert_eq!(serde_json::to_string(&ChangeLevel::KeyGate).unwrap(), "3");
        let back: ChangeLevel = serde_json::from_str("2").unwrap();
        assert_eq!(back, ChangeLevel::Neighborhood);
        assert!(serde_json::from_str::<ChangeLevel>("4").is_err());
    }

    #[test]
    fn coverage_curve() {
        let a = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XOR(a, keyinput0)").unwrap();
        let b = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XNOR(a, keyinput0)").unwrap();
        let c = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\nx = XOR(a, keyinput0)\ny = NOT(x)")
            .unwrap();
        let la = extract_locality(&a, "keyinput0", 3).unwrap();
        let lb = extract_locality(&b, "keyinput0", 3).unwrap();
        let lc = extract_locality(&c, "keyinput0", 3).unwrap();

        let same = vec![(la.clone(), lb.clone()); 3];
        let t = enumerate_transformations(&same);
        assert_eq!(t.groups.len(), 1);
        assert_eq!(t.coverage, vec![(1, 100.0)]);

        let mixed = vec![(la.clone(), lb.clone()), (la.clone(), lb.clone()), (lc, la)];
        let t = enumerate_transformations(&mixed);
        assert_eq!(t.groups[0].count, 2);
        assert_eq!(t.coverage.len(), 2);
        assert!((t.coverage[0].1 - 66.666).abs() < 0.01);
        assert_eq!(t.coverage[1].1, 100.0);
    }
}
