use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_rows, Scalar};
use crate::derive_seed;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means the square root of the
    /// feature count.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_depth: 12,
            min_leaf: 2,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Node<T> {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    /// Class distribution `[P(false), P(true)]`.
    Leaf { dist: [T; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecisionTree<T> {
    /// Root first.
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn leaf(&self, x: &[T]) -> &[T; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { dist } => return dist,
            }
        }
    }

    pub fn vote(&self, x: &[T]) -> bool {
        let d = self.leaf(x);
        d[1] > d[0]
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bagged CART trees with Gini splits, voting on a boolean label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Forest<T> {
    pub params: ForestParams,
    pub features: usize,
    pub trees: Vec<DecisionTree<T>>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a, T> {
    x: &'a [Vec<T>],
    y: &'a [bool],
    params: &'a ForestParams,
    candidates: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Builder<'_, T> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let n = T::count(idx.len());
        let p = T::count(pos) / n;
        self.nodes.push(Node::Leaf {
            dist: [T::one() - p, p],
        });
        self.nodes.len() - 1
    }

    /// Lowest weighted impurity split over `feature`, as (impurity, threshold).
    fn scan(&self, idx: &[usize], feature: usize) -> Option<(f64, T)> {
        let mut v: Vec<(T, bool)> = idx.iter().map(|&i| (self.x[i][feature], self.y[i])).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("features are finite"));
        let n = v.len();
        let total_pos = v.iter().filter(|p| p.1).count();
        let min_leaf = self.params.min_leaf.max(1);
        let mut left_pos = 0;
        let mut best: Option<(f64, T)> = None;
        for k in 1..n {
            left_pos += v[k - 1].1 as usize;
            if v[k - 1].0 == v[k].0 || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let impurity = (k as f64 * gini(left_pos, k)
                + (n - k) as f64 * gini(total_pos - left_pos, n - k))
                / n as f64;
            if best.is_none_or(|b| impurity < b.0) {
                let (a, b) = (v[k - 1].0, v[k].0);
                let mut t = (a + b) / T::lit(2.0);
                if t >= b {
                    t = a;
                }
                best = Some((impurity, t));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if pos == 0
            || pos == idx.len()
            || depth >= self.params.max_depth
            || idx.len() < 2 * self.params.min_leaf.max(1)
        {
            return self.leaf(&idx);
        }
        let mut order: Vec<usize> = (0..self.x[0].len()).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<(f64, usize, T)> = None;
        for (tried, &f) in order.iter().enumerate() {
            // Keep looking past the candidate budget only while no split exists.
            if tried >= self.candidates && best.is_some() {
                break;
            }
            if let Some((imp, t)) = self.scan(&idx, f) {
                if best.is_none_or(|b| imp < b.0) {
                    best = Some((imp, f, t));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(&idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf {
            dist: [T::zero(), T::zero()],
        });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

/// Train a forest on `(features, label)` rows.
pub fn forest_train<T: Scalar>(data: &[(Vec<T>, bool)], params: &ForestParams) -> Result<Forest<T>> {
    let features = check_rows(data.iter().map(|r| r.0.as_slice()))?;
    if params.trees == 0 {
        return Err(Error::Invalid("a forest needs at least one tree".into()));
    }
    let x: Vec<Vec<T>> = data.iter().map(|r| r.0.clone()).collect();
    let y: Vec<bool> = data.iter().map(|r| r.1).collect();
    let candidates = params
        .max_features
        .unwrap_or_else(|| (features as f64).sqrt().round() as usize)
        .clamp(1, features.max(1));
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, t as u64));
            let n = x.len();
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                x: &x,
                y: &y,
                params,
                candidates,
                rng,
                nodes: Vec::new(),
            };
            b.grow(idx, 0);
            DecisionTree { nodes: b.nodes }
        })
        .collect();
    Ok(Forest {
        params: params.clone(),
        features,
        trees,
    })
}

impl<T: Scalar> Forest<T> {
    /// Majority vote and the fraction of trees in the majority. A tie
    /// predicts `false`.
    pub fn predict(&self, x: &[T]) -> Result<(bool, f64)> {
        if x.len() != self.features {
            return Err(Error::FeatureLength {
                expected: self.features,
                got: x.len(),
            });
        }
        let yes = self.trees.iter().filter(|t| t.vote(x)).count();
        let no = self.trees.len() - yes;
        let label = yes > no;
        Ok((label, yes.max(no) as f64 / self.trees.len() as f64))
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy(&self, data: &[(Vec<T>, bool)]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut right = 0;
        for (x, y) in data {
            if self.predict(x)?.0 == *y {
                right += 1;
            }
        }
        Ok(right as f64 / data.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data() -> Vec<(Vec<f64>, bool)> {
        vec![
            (vec![0.0, 0.0], false),
            (vec![0.0, 1.0], true),
            (vec![1.0, 0.0], true),
            (vec![1.0, 1.0], false),
        ]
    }

    #[test]
    fn separable_single_feature() {
        let data: Vec<(Vec<f64>, bool)> = (0..20).map(|i| (vec![i as f64 / 20.0], i >= 10)).collect();
        let f = forest_train(&data, &ForestParams::default()).unwrap();
        assert_eq!(f.accuracy(&data).unwrap(), 1.0);
        let (label, conf) = f.predict(&[0.99]).unwrap();
        assert!(label);
        assert_eq!(conf, 1.0);
    }

    #[test]
    fn constant_labels() {
        let data: Vec<(Vec<f32>, bool)> = (0..10).map(|i| (vec![i as f32, 1.0], true)).collect();
        let f = forest_train(&data, &ForestParams::default()).unwrap();
        for t in &f.trees {
            assert_eq!(t.nodes.len(), 1);
        }
        assert_eq!(f.predict(&[100.0, -3.0]).unwrap(), (true, 1.0));
    }

    #[test]
    fn xor_pattern() {
        let params = ForestParams {
            trees: 5,
            max_depth: 2,
            min_leaf: 1,
            max_features: Some(2),
            bootstrap: false,
            seed: 4,
        };
        let f = forest_train(&xor_data(), &params).unwrap();
        assert_eq!(f.accuracy(&xor_data()).unwrap(), 1.0);
        for t in &f.trees {
            assert!(t.depth() <= 2);
        }
    }

    #[test]
    fn split_vote_confidence() {
        let leaf = |p: f64| DecisionTree {
            nodes: vec![Node::Leaf { dist: [1.0 - p, p] }],
        };
        let f = Forest {
            params: ForestParams::default(),
            features: 1,
            trees: vec![leaf(1.0), leaf(0.9), leaf(0.0)],
        };
        let (label, conf) = f.predict(&[0.0]).unwrap();
        assert!(label);
        assert!((conf - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            f.predict(&[0.0, 1.0]),
            Err(Error::FeatureLength { .. })
        ));
    }

    #[test]
    fn rejects_bad_data() {
        assert!(matches!(
            forest_train::<f64>(&[], &ForestParams::default()),
            Err(Error::EmptyData)
        ));
        let ragged = vec![(vec![0.0], true), (vec![0.0, 1.0], false)];
        assert!(matches!(
            forest_train(&ragged, &ForestParams::default()),
            Err(Error::FeatureLength { .. })
        ));
    }

    #[test]
    fn deterministic() {
        let data: Vec<(Vec<f64>, bool)> = (0..40)
            .map(|i| (vec![(i * 7 % 13) as f64, (i % 5) as f64], i % 3 == 0))
            .collect();
        let p = ForestParams {
            seed: 9,
            ..ForestParams::default()
        };
        let a = serde_json::to_string(&forest_train(&data, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&forest_train(&data, &p).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
