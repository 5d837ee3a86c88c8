//! The structural attack: manufacture training data by re-locking the
//! attacked netlist, learn which key-gate neighbourhoods re-synthesis
//! changed and what they looked like before, then undo the changes around
//! the original key-gates and read the key bits off the recovered gates.

mod dataset;
mod eval;
mod train;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{argmax, combine, Scalar, NO_CHANGE};
use crate::locality::{
    encode, snapshot_diff, Locality, LocalityExtractor, Snapshot, SnapshotDiff, SIZES,
    SNAPSHOT_SIZE,
};
use crate::netlist::{GateType, Netlist};
use crate::rewrite::ChangeLevel;

pub use dataset::{generate_dataset, Dataset, DatasetParams, DatasetRecord};
pub use eval::{evaluate, EvalParams, Evaluation};
pub use train::{reconstruction_labels, train_models, Models, TrainParams, MODEL_SCHEMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyBit {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "unknown")]
    Unknown,
}

impl KeyBit {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            KeyBit::Zero => Some(false),
            KeyBit::One => Some(true),
            KeyBit::Unknown => None,
        }
    }
}

impl fmt::Display for KeyBit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyBit::Zero => "0",
            KeyBit::One => "1",
            KeyBit::Unknown => "x",
        })
    }
}

/// Key bit implied by the gates around the key input: a bare XOR means 0,
/// an XOR feeding an inverter or an XNOR means 1.
pub fn recover_key_bit(s: &Snapshot) -> KeyBit {
    let Some(k) = s.key_slot() else {
        return KeyBit::Unknown;
    };
    match s.slots[k].kind {
        Some(GateType::Xor) => {
            let inverted = (0..s.size)
                .any(|j| s.edge(k, j) && s.slots[j].kind == Some(GateType::Not));
            if inverted {
                KeyBit::One
            } else {
                KeyBit::Zero
            }
        }
        Some(GateType::Xnor) => KeyBit::One,
        _ => KeyBit::Unknown,
    }
}

/// Ground truth for one of the victim's key-gates; only the evaluation
/// harness has it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub snapshot: Snapshot,
    pub level: ChangeLevel,
    pub key_bit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub anchor: String,
    pub boosted: bool,
    /// Verdict of the boost-size change predictor.
    pub predicted_changed: bool,
    pub change_confidence: f64,
    pub changed_by_size: BTreeMap<usize, bool>,
    pub label: usize,
    pub label_confidence: f64,
    /// Less than half of the summed member confidence went to the label.
    pub low_confidence: bool,
    pub member_labels: BTreeMap<usize, usize>,
    pub observed: Snapshot,
    pub predicted: Snapshot,
    pub key_bit: KeyBit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Truth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<SnapshotDiff>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub member_diffs: BTreeMap<usize, SnapshotDiff>,
}

impl AttackResult {
    pub fn recovered(&self) -> bool {
        self.diff.is_some_and(|d| d.is_exact())
    }
}

fn decode<T: Scalar>(models: &Models<T>, label: usize, observed: &Snapshot) -> Result<Snapshot> {
    if label == NO_CHANGE {
        return Ok(observed.clone());
    }
    let mut s = models
        .catalog()
        .snapshot(label)?
        .expect("only the no-change label is empty")
        .clone();
    s.anchor = observed.anchor.clone();
    Ok(s)
}

/// Reconstruct the snapshot around every key input of `victim`.
pub fn run_attack<T: Scalar>(victim: &Netlist, models: &Models<T>, boost: bool) -> Result<Vec<AttackResult>> {
    run_attack_with_truth(victim, models, boost, None)
}

/// [`run_attack`], attaching diffs against `truth` where it is known.
pub fn run_attack_with_truth<T: Scalar>(
    victim: &Netlist,
    models: &Models<T>,
    boost: bool,
    truth: Option<&BTreeMap<String, Truth>>,
) -> Result<Vec<AttackResult>> {
    if victim.key_inputs().is_empty() {
        return Err(Error::NoKeyInputs);
    }
    let ex = LocalityExtractor::new(victim);
    let forest = models.boost_forest()?;
    let mut anchors: Vec<&String> = victim.key_inputs().iter().collect();
    anchors.sort_by_key(|k| (crate::netlist::key_index(k), k.as_str()));
    let mut results = Vec::with_capacity(anchors.len());
    for anchor in anchors {
        let localities: BTreeMap<usize, Locality> = SIZES
            .map(|s| ex.extract(anchor, s).map(|l| (s, l)))
            .collect::<Result<_>>()?;
        let observed = localities[&SNAPSHOT_SIZE].clone();
        let mut changed_by_size = BTreeMap::new();
        for (size, f) in &models.forests {
            if let Some(l) = localities.get(size) {
                changed_by_size.insert(*size, f.predict(&encode::<T>(l))?.0);
            }
        }
        let (predicted_changed, change_confidence) =
            forest.predict(&encode::<T>(&localities[&models.params.boost_size]))?;

        let mut dists = Vec::new();
        let mut member_labels = BTreeMap::new();
        for l in localities.values() {
            if let Some(d) = models.ensemble.member_predict(l)? {
                member_labels.insert(l.size, argmax(&d));
                dists.push(d);
            }
        }
        let (ensemble_label, confidence) = combine(&dists)?;
        let confidence = confidence.to_f64().unwrap_or(0.0);
        let label = if boost && !predicted_changed {
            NO_CHANGE
        } else {
            ensemble_label
        };
        let predicted = decode(models, label, &observed)?;
        let key_bit = recover_key_bit(&predicted);
        let t = truth.and_then(|m| m.get(anchor.as_str())).cloned();
        let (diff, member_diffs) = match &t {
            Some(t) => {
                let mut member_diffs = BTreeMap::new();
                for (&size, &l) in &member_labels {
                    let s = decode(models, l, &observed)?;
                    member_diffs.insert(size, snapshot_diff(&s, &t.snapshot)?);
                }
                (Some(snapshot_diff(&predicted, &t.snapshot)?), member_diffs)
            }
            None => (None, BTreeMap::new()),
        };
        results.push(AttackResult {
            anchor: anchor.clone(),
            boosted: boost,
            predicted_changed,
            change_confidence,
            changed_by_size,
            label,
            label_confidence: confidence,
            low_confidence: confidence < 0.5 * dists.len() as f64,
            member_labels,
            observed,
            predicted,
            key_bit,
            truth: t,
            diff,
            member_diffs,
        });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locality::extract_locality;
    use crate::netlist::parse_bench;

    fn snap(text: &str) -> Snapshot {
        extract_locality(&parse_bench(text).unwrap(), "keyinput0", 3).unwrap()
    }

    #[test]
    fn key_bits_from_snapshots() {
        let bare = snap("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XOR(a, keyinput0)");
        assert_eq!(recover_key_bit(&bare), KeyBit::Zero);
        let inv = snap("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\nx = XOR(a, keyinput0)\ny = NOT(x)");
        assert_eq!(recover_key_bit(&inv), KeyBit::One);
        let xnor = snap("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XNOR(a, keyinput0)");
        assert_eq!(recover_key_bit(&xnor), KeyBit::One);
        let other = snap("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = AND(a, keyinput0)");
        assert_eq!(recover_key_bit(&other), KeyBit::Unknown);
        let floating = snap("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = NOT(a)");
        assert_eq!(recover_key_bit(&floating), KeyBit::Unknown);
        assert_eq!(serde_json::to_string(&KeyBit::One).unwrap(), "\"1\"");
    }
}
