use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{argmax, Network, Scalar};
use crate::error::{Error, Result};
use crate::locality::{encode, Locality, Snapshot};

/// Reserved label meaning "the observed snapshot is already the answer".
pub const NO_CHANGE: usize = 0;

/// Dense labels for the distinct snapshots seen in training.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelCatalog {
    /// Snapshot signature to label.
    pub index: BTreeMap<String, usize>,
    /// Label to snapshot; entry 0 is the no-change label.
    pub snapshots: Vec<Option<Snapshot>>,
}

impl LabelCatalog {
    /// Labels are assigned in signature order after [`NO_CHANGE`].
    pub fn build<'a>(snapshots: impl IntoIterator<Item = &'a Snapshot>) -> Self {
        let mut distinct: BTreeMap<String, Snapshot> = BTreeMap::new();
        for s in snapshots {
            distinct.entry(s.signature()).or_insert_with(|| {
                let mut s = s.clone();
                s.anchor.clear();
                s.gate_ids.clear();
                s
            });
        }
        let mut cat = LabelCatalog {
            index: BTreeMap::new(),
            snapshots: vec![None],
        };
        for (sig, s) in distinct {
            cat.index.insert(sig, cat.snapshots.len());
            cat.snapshots.push(Some(s));
        }
        cat
    }

    /// Number of labels, including [`NO_CHANGE`].
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn label_of(&self, s: &Snapshot) -> Option<usize> {
        self.index.get(&s.signature()).copied()
    }

    /// The snapshot for `label`; `None` for [`NO_CHANGE`].
    pub fn snapshot(&self, label: usize) -> Result<Option<&Snapshot>> {
        self.snapshots
            .get(label)
            .map(Option::as_ref)
            .ok_or(Error::LabelOutOfRange {
                label,
                classes: self.len(),
            })
    }
}

/// One network per locality size over a shared catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Ensemble<T> {
    pub members: BTreeMap<usize, Network<T>>,
    pub catalog: LabelCatalog,
}

/// Sum the distributions and take the argmax; ties go to the smaller label.
pub fn combine<T: Scalar>(dists: &[Vec<T>]) -> Result<(usize, T)> {
    let first = dists.first().ok_or(Error::NoMembers)?;
    let mut total = vec![T::zero(); first.len()];
    for d in dists {
        if d.len() != total.len() {
            return Err(Error::FeatureLength {
                expected: total.len(),
                got: d.len(),
            });
        }
        for (t, &v) in total.iter_mut().zip(d) {
            *t = *t + v;
        }
    }
    let label = argmax(&total);
    Ok((label, total[label]))
}

impl<T: Scalar> Ensemble<T> {
    /// Distribution of the member for `l.size`, if present.
    pub fn member_predict(&self, l: &Locality) -> Result<Option<Vec<T>>> {
        match self.members.get(&l.size) {
            Some(net) => Ok(Some(net.predict(&encode::<T>(l))?)),
            None => Ok(None),
        }
    }
}

/// Cumulative-confidence vote of every member whose size is present.
pub fn ensemble_predict<T: Scalar>(
    e: &Ensemble<T>,
    localities: &BTreeMap<usize, Locality>,
) -> Result<(usize, T)> {
    let mut dists = Vec::new();
    for l in localities.values() {
        if let Some(d) = e.member_predict(l)? {
            dists.push(d);
        }
    }
    combine(&dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{network_train, NetworkParams};
    use crate::locality::extract_locality;
    use crate::netlist::parse_bench;

    #[test]
    fn combine_examples() {
        let (label, conf) = combine(&[vec![0.6f64, 0.4], vec![0.3, 0.7]]).unwrap();
        assert_eq!(label, 1);
        assert!((conf - 1.1).abs() < 1e-12);
        assert_eq!(combine(&[vec![0.5f32, 0.5]]).unwrap().0, 0);
        assert!(matches!(combine::<f64>(&[]), Err(Error::NoMembers)));
        let scaled = combine(&[vec![1.2, 0.8], vec![0.6, 1.4]]).unwrap();
        assert_eq!(scaled.0, 1);
    }

    #[test]
    fn catalog_is_sorted_and_reserved() {
        let a = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XOR(a, keyinput0)").unwrap();
        let b = parse_bench("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XNOR(a, keyinput0)").unwrap();
        let sa = extract_locality(&a, "keyinput0", 3).unwrap();
        let sb = extract_locality(&b, "keyinput0", 3).unwrap();
        let cat = LabelCatalog::build([&sb, &sa, &sb]);
        assert_eq!(cat.len(), 3);
        assert_eq!(cat.snapshot(NO_CHANGE).unwrap(), None);
        let la = cat.label_of(&sa).unwrap();
        let lb = cat.label_of(&sb).unwrap();
        assert_ne!(la, lb);
        assert!(la > 0 && lb > 0);
        assert_eq!(cat.snapshot(lb).unwrap().unwrap().signature(), sb.signature());
        assert!(cat.snapshot(7).is_err());
    }

    #[test]
    fn single_member_matches_network() {
        let n = parse_bench(
            "INPUT(a)\nINPUT(b)\nINPUT(keyinput0)\nOUTPUT(y)\nx = XOR(a, keyinput0)\ny = AND(x, b)",
        )
        .unwrap();
        let l = extract_locality(&n, "keyinput0", 4).unwrap();
        let x: Vec<f64> = encode(&l);
        let params = NetworkParams {
            hidden: vec![4],
            epochs: 20,
            batch: 1,
            learning_rate: 0.1,
            seed: 1,
        };
        let net = network_train(&[(x.clone(), 1)], 3, &params).unwrap();
        let e = Ensemble {
            members: BTreeMap::from([(4, net.clone())]),
            catalog: LabelCatalog::default(),
        };
        let (label, _) = ensemble_predict(&e, &BTreeMap::from([(4, l.clone())])).unwrap();
        assert_eq!(label, argmax(&net.predict(&x).unwrap()));
        let other = extract_locality(&n, "keyinput0", 5).unwrap();
        assert!(matches!(
            ensemble_predict(&e, &BTreeMap::from([(5, other)])),
            Err(Error::NoMembers)
        ));
    }
}
