//! Affine layers, softmax cross-entropy and the pairwise MLP.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Adam, AdamConfig, Param, Parameterized};

/// `y = x W + b` with `W: in x out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Param,
    pub b: Param,
}

impl Dense {
    pub fn new(name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Dense {
            w: Param::glorot(format!("{name}.w"), d_in, d_out, rng),
            b: Param::zeros(format!("{name}.b"), 1, d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w.value.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.w.value.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.value) + &self.b.value
    }

    /// Returns `(dx, [dW, db])`.
    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> (Array2<f64>, [Array2<f64>; 2]) {
        let dw = x.t().dot(&dy);
        let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        (dy.dot(&self.w.value.t()), [dw, db])
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Zero the gradient wherever the pre-activation was not positive.
pub fn relu_backward(pre: &Array2<f64>, mut dy: Array2<f64>) -> Array2<f64> {
    ndarray::Zip::from(&mut dy).and(pre).for_each(|d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });
    dy
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
    p
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = labels.len().max(1) as f64;
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        loss -= grad[[i, y]].max(1e-300).ln();
        grad[[i, y]] -= 1.0;
    }
    (loss / n, grad / n)
}

pub fn argmax_rows(x: &Array2<f64>) -> Vec<usize> {
    x.rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Feed-forward classifier: ReLU hidden layers and a softmax output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

pub struct MlpTrace {
    /// Input of every layer; the last entry is the output logits.
    pub acts: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pub pre: Vec<Array2<f64>>,
}

impl Mlp {
    pub fn new(d_in: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![d_in];
        dims.extend_from_slice(hidden);
        dims.push(n_classes);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(&format!("layer{i}"), w[0], w[1], &mut rng))
            .collect();
        Mlp { layers }
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn forward_trace(&self, x: Array2<f64>) -> MlpTrace {
        let mut acts = vec![x];
        let mut pre = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(acts[i].view());
            if i < last {
                acts.push(relu(&z));
                pre.push(z);
            } else {
                acts.push(z);
            }
        }
        MlpTrace { acts, pre }
    }

    pub fn logits(&self, x: Array2<f64>) -> Array2<f64> {
        self.forward_trace(x).acts.pop().expect("output layer")
    }

    /// Gradients for every parameter given the gradient at the logits, plus
    /// the gradient at the input.
    pub fn backward(&self, trace: &MlpTrace, dlogits: Array2<f64>) -> (Array2<f64>, Vec<Array2<f64>>) {
        let mut grads = Vec::with_capacity(2 * self.layers.len());
        let mut dy = dlogits;
        for i in (0..self.layers.len()).rev() {
            if i < self.layers.len() - 1 {
                dy = relu_backward(&trace.pre[i], dy);
            }
            let (dx, [dw, db]) = self.layers[i].backward(trace.acts[i].view(), dy.view());
            grads.push(db);
            grads.push(dw);
            dy = dx;
        }
        grads.reverse();
        (dy, grads)
    }

    pub fn loss_and_grads(&self, x: Array2<f64>, labels: &[usize]) -> (f64, Vec<Array2<f64>>) {
        let trace = self.forward_trace(x);
        let (loss, dlogits) = softmax_cross_entropy(trace.acts.last().expect("logits"), labels);
        (loss, self.backward(&trace, dlogits).1)
    }

    /// Predicted class and its probability for each row.
    pub fn predict(&self, x: Array2<f64>) -> Vec<(usize, f64)> {
        let p = softmax_rows(&self.logits(x));
        argmax_rows(&p)
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, p[[i, c]]))
            .collect()
    }

    pub fn accuracy(&self, x: Array2<f64>, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let pred = argmax_rows(&self.logits(x));
        pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64
    }
}

impl Parameterized for Mlp {
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![100],
            epochs: 200,
            batch_size: 200,
            adam: AdamConfig::default(),
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpReport {
    pub n_train: usize,
    pub n_test: usize,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// First epoch (1-based) after which test accuracy reached 1.0.
    pub perfect_at: Option<usize>,
}

impl MlpReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

fn rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// Seeded split of `0..n` into `(train, test)`; the test part has
/// `round(n * test_fraction)` items.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let test = idx.split_off(n - n_test.min(n));
    (idx, test)
}

/// Mini-batch Adam training with a seeded train/test split.
pub fn mlp_train(x: &Array2<f64>, labels: &[usize], config: &MlpConfig) -> Result<(Mlp, MlpReport)> {
    if x.nrows() != labels.len() {
        return Err(Error::Dimension(format!("{} rows, {} labels", x.nrows(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    let n_classes = labels.iter().max().copied().unwrap_or(0).max(1) + 1;
    let mut model = Mlp::new(x.ncols(), &config.hidden, n_classes, config.seed);
    let (mut train, test) = split_indices(labels.len(), config.test_fraction, config.seed);
    let x_test = rows(x, &test);
    let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let mut opt = Adam::new(&model, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut perfect_at = None;
    let bs = config.batch_size.max(1);
    for epoch in 0..config.epochs {
        train.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in train.chunks(bs).enumerate() {
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = model.loss_and_grads(rows(x, chunk), &y);
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step,
                    detail: format!("batch of {} rows, loss {loss}", chunk.len()),
                });
            }
            total += loss * chunk.len() as f64;
            opt.step(&mut model, &grads);
        }
        losses.push(total / train.len().max(1) as f64);
        if perfect_at.is_none() && !test.is_empty() && model.accuracy(x_test.clone(), &y_test) == 1.0 {
            perfect_at = Some(epoch + 1);
        }
    }
    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let report = MlpReport {
        n_train: train.len(),
        n_test: test.len(),
        losses,
        train_accuracy: model.accuracy(rows(x, &train), &y_train),
        test_accuracy: model.accuracy(x_test, &y_test),
        perfect_at,
    };
    Ok((model, report))
}

/// Stack equal-length vectors into a matrix.
pub fn stack_rows(vectors: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = vectors.first().map_or(0, |v| v.len());
    let mut out = Array2::zeros((vectors.len(), d));
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != d {
            return Err(Error::Dimension(format!("row {i} has {} values, expected {d}", v.len())));
        }
        out.slice_mut(s![i, ..]).assign(&Array1::from(v.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let (loss, g) = softmax_cross_entropy(&Array2::zeros((4, 2)), &[0, 1, 0, 1]);
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert!((g.sum()).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax_rows(&array![[1.0, 2.0, 3.0]]);
        let b = softmax_rows(&array![[1001.0, 1002.0, 1003.0]]);
        assert!((&a - &b).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn split_is_exact_and_disjoint() {
        let (tr, te) = split_indices(101, 0.2, 3);
        assert_eq!(te.len(), 20);
        assert_eq!(tr.len(), 81);
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }

    #[test]
    fn identical_features_give_chance() {
        let x = Array2::from_elem((4000, 5), 0.3);
        let y: Vec<usize> = (0..4000).map(|i| i % 2).collect();
        let cfg = MlpConfig { epochs: 3, ..Default::default() };
        let (_, r) = mlp_train(&x, &y, &cfg).unwrap();
        assert!((r.test_accuracy - 0.5).abs() <= 0.05, "{}", r.test_accuracy);
    }

    #[test]
    fn mismatched_rows_rejected() {
        assert!(matches!(
            mlp_train(&Array2::zeros((3, 2)), &[0, 1], &MlpConfig::default()),
            Err(Error::Dimension(_))
        ));
    }
}
