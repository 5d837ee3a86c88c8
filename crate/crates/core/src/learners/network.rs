use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_rows, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            hidden: vec![128],
            epochs: 200,
            batch: 32,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// Dense layer; `weights` is `outputs × inputs`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                row.iter()
                    .zip(x)
                    .fold(self.bias[o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }
}

/// Feed-forward classifier: rectified hidden layers, softmax output,
/// cross-entropy loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Network<T> {
    pub params: NetworkParams,
    pub layers: Vec<Layer<T>>,
    /// Mean loss over the last training epoch.
    pub training_loss: Option<f64>,
}

fn softmax<T: Scalar>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in z.iter_mut() {
        *v = *v / sum;
    }
}

impl<T: Scalar> Network<T> {
    /// Fresh network with weights drawn uniformly from ±sqrt(6 / fan_in).
    pub fn init(inputs: usize, classes: usize, params: &NetworkParams) -> Result<Self> {
        if inputs == 0 || classes == 0 || params.hidden.contains(&0) {
            return Err(Error::Invalid("network layers must be nonempty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut sizes = vec![inputs];
        sizes.extend(&params.hidden);
        sizes.push(classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                let mut layer = Layer::zeros(w[0], w[1]);
                for v in layer.weights.iter_mut() {
                    *v = T::lit(rng.gen_range(-limit..limit));
                }
                layer
            })
            .collect();
        Ok(Network {
            params: params.clone(),
            layers,
            training_loss: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    fn check_len(&self, x: &[T]) -> Result<()> {
        if x.len() == self.inputs() {
            Ok(())
        } else {
            Err(Error::FeatureLength {
                expected: self.inputs(),
                got: x.len(),
            })
        }
    }

    /// Activations of every layer; the last entry is the distribution.
    fn forward(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(acts.last().expect("input present"));
            if i == last {
                softmax(&mut z);
            } else {
                for v in z.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Class distribution for one feature vector.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        Ok(self.forward(x).pop().expect("output layer"))
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y < self.classes() {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange {
                label: y,
                classes: self.classes(),
            })
        }
    }

    /// Add the gradient of one sample's loss into `grads`; returns the loss.
    fn accumulate(&self, x: &[T], y: usize, grads: &mut [Layer<T>]) -> T {
        let acts = self.forward(x);
        let out = acts.last().expect("output layer");
        let loss = -out[y].max(T::min_positive_value()).ln();
        let mut delta: Vec<T> = out.clone();
        delta[y] = delta[y] - T::one();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let g = &mut grads[l];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                g.bias[o] = g.bias[o] + d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, &v) in row.iter_mut().zip(input) {
                    *w = *w + d * v;
                }
            }
            if l == 0 {
                break;
            }
            let mut back = vec![T::zero(); layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (b, &w) in back.iter_mut().zip(row) {
                    *b = *b + d * w;
                }
            }
            for (b, &a) in back.iter_mut().zip(input) {
                if a <= T::zero() {
                    *b = T::zero();
                }
            }
            delta = back;
        }
        loss
    }

    fn zero_grads(&self) -> Vec<Layer<T>> {
        self.layers
            .iter()
            .map(|l| Layer::zeros(l.inputs, l.outputs))
            .collect()
    }

    /// Mean cross-entropy over `data`.
    pub fn loss(&self, data: &[(Vec<T>, usize)]) -> Result<T> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut total = T::zero();
        for (x, y) in data {
            self.check_len(x)?;
            self.check_label(*y)?;
            let p = self.predict(x)?;
            total = total - p[*y].max(T::min_positive_value()).ln();
        }
        Ok(total / T::count(data.len()))
    }

    /// Mean loss and its gradient with respect to [`Network::parameters`].
    pub fn loss_gradient(&self, data: &[(Vec<T>, usize)]) -> Result<(T, Vec<T>)> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut grads = self.zero_grads();
        let mut total = T::zero();
        for (x, y) in data {
            self.check_len(x)?;
            self.check_label(*y)?;
            total = total + self.accumulate(x, *y, &mut grads);
        }
        let n = T::count(data.len());
        let flat = grads
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.bias))
            .map(|&v| v / n)
            .collect();
        Ok((total / n, flat))
    }

    /// All weights and biases, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, values: &[T]) -> Result<()> {
        let expected: usize = self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum();
        if values.len() != expected {
            return Err(Error::FeatureLength {
                expected,
                got: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for l in self.layers.iter_mut() {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Fraction of rows whose argmax is the label.
    pub fn accuracy(&self, data: &[(Vec<T>, usize)]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut right = 0;
        for (x, y) in data {
            if argmax(&self.predict(x)?) == *y {
                right += 1;
            }
        }
        Ok(right as f64 / data.len() as f64)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Largest relative difference between the analytic gradient and central
/// finite differences with step `h`.
pub fn gradient_check(net: &Network<f64>, data: &[(Vec<f64>, usize)], h: f64) -> Result<f64> {
    let (_, grad) = net.loss_gradient(data)?;
    let base = net.parameters();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_parameters(&p)?;
        let up = probe.loss(data)?;
        p[i] = base[i] - h;
        probe.set_parameters(&p)?;
        let down = probe.loss(data)?;
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max((fd - grad[i]).abs() / scale);
    }
    Ok(worst)
}

/// Mini-batch gradient descent on `(features, label)` rows.
pub fn network_train<T: Scalar>(
    data: &[(Vec<T>, usize)],
    classes: usize,
    params: &NetworkParams,
) -> Result<Network<T>> {
    let inputs = check_rows(data.iter().map(|r| r.0.as_slice()))?;
    if let Some((_, y)) = data.iter().find(|(_, y)| *y >= classes) {
        return Err(Error::LabelOutOfRange {
            label: *y,
            classes,
        });
    }
    let mut net = Network::init(inputs, classes, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x7368_7566);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let rate = T::lit(params.learning_rate);
    let batch = params.batch.max(1);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut total = T::zero();
        for chunk in order.chunks(batch) {
            let mut grads = net.zero_grads();
            for &i in chunk {
                total = total + net.accumulate(&data[i].0, data[i].1, &mut grads);
            }
            let step = rate / T::count(chunk.len());
            for (layer, g) in net.layers.iter_mut().zip(&grads) {
                for (w, &d) in layer.weights.iter_mut().zip(&g.weights) {
                    *w = *w - step * d;
                }
                for (b, &d) in layer.bias.iter_mut().zip(&g.bias) {
                    *b = *b - step * d;
                }
            }
        }
        let mean = total / T::count(data.len());
        let finite = mean.is_finite() && net.parameters().iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Diverged(epoch));
        }
        net.training_loss = mean.to_f64();
    }
    Ok(net)
}
