//! Central-difference gradient checks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dense::{softmax_cross_entropy, Dense, Mlp};
use crate::edge::EdgeClassifier;
use crate::gnn::{ConvLayer, Graph, GraphEdge, Variant, N_EDGE_LABELS};
use crate::params::Parameterized;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Denominator floor, so that gradients that are zero up to rounding are
/// compared absolutely.
pub const ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub name: String,
    pub n: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub subject: String,
    pub tolerance: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ERROR_FLOOR)
}

/// Compare one analytic gradient block against central differences of
/// `loss` taken by perturbing `values` in place.
pub fn check_block(
    name: &str,
    values: &mut Array2<f64>,
    analytic: &Array2<f64>,
    step: f64,
    mut loss: impl FnMut(&Array2<f64>) -> f64,
) -> BlockReport {
    let mut report = BlockReport {
        name: name.to_string(),
        n: values.len(),
        max_rel_error: 0.0,
        max_abs_error: 0.0,
    };
    let shape = values.dim();
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let orig = values[[i, j]];
            values[[i, j]] = orig + step;
            let plus = loss(values);
            values[[i, j]] = orig - step;
            let minus = loss(values);
            values[[i, j]] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[[i, j]];
            report.max_rel_error = report.max_rel_error.max(relative_error(a, numeric));
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
        }
    }
    report
}

/// Check every parameter block of a model. `loss` must read the parameters
/// through the model it is given.
pub fn check_params<M: Parameterized>(
    subject: &str,
    model: &mut M,
    analytic: &[Array2<f64>],
    step: f64,
    tolerance: f64,
    loss: impl Fn(&M) -> f64,
) -> GradReport {
    let mut blocks = Vec::new();
    let n = model.params().len();
    for k in 0..n {
        let name = model.params()[k].name.clone();
        let mut values = model.params()[k].value.clone();
        let report = check_block(&name, &mut values, &analytic[k], step, |v| {
            let saved = std::mem::replace(&mut model.params_mut()[k].value, v.clone());
            let l = loss(model);
            model.params_mut()[k].value = saved;
            l
        });
        blocks.push(report);
    }
    GradReport {
        subject: subject.to_string(),
        tolerance,
        blocks,
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// A random undirected graph with self-loops and random edge labels.
pub fn random_graph(n: usize, extra_edges: usize, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    let mut add = |u: usize, v: usize, label: usize| {
        edges.push(GraphEdge { src: u, dst: v, label });
        edges.push(GraphEdge { src: v, dst: u, label });
    };
    for v in 1..n {
        add(rng.random_range(0..v), v, rng.random_range(0..N_EDGE_LABELS));
    }
    for _ in 0..extra_edges {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != v {
            add(u, v, rng.random_range(0..N_EDGE_LABELS));
        }
    }
    Graph::with_self_loops(n, edges).expect("random edges in range")
}

/// Zero-initialised biases put ReLU inputs exactly on the kink when a whole
/// row of activations is zero; random biases keep the check away from it.
pub fn randomize_biases(model: &mut impl Parameterized, rng: &mut impl Rng) {
    for p in model.params_mut() {
        if p.value.nrows() == 1 {
            p.value = random_matrix(1, p.value.ncols(), rng) * 0.5;
        }
    }
}

/// How an analytic gradient is damaged for the negative control.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    None,
    /// Scale the first block by 1.01.
    ScaleFirstBlock,
}

fn corrupt(grads: &mut [Array2<f64>], corruption: Corruption) {
    if corruption == Corruption::ScaleFirstBlock {
        if let Some(g) = grads.first_mut() {
            *g *= 1.01;
        }
    }
}

/// Dense layer under `sum(out * r)`, including the input gradient.
pub fn check_dense(seed: u64, corruption: Corruption) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = Dense::new("dense", 7, 5, &mut rng);
    layer.b.value = random_matrix(1, 5, &mut rng);
    let mut x = random_matrix(6, 7, &mut rng);
    let r = random_matrix(6, 5, &mut rng);
    let (dx, grads) = layer.backward(x.view(), r.view());
    let mut grads = grads.to_vec();
    corrupt(&mut grads, corruption);
    let mut report = check_params("dense", &mut layer, &grads, DEFAULT_STEP, DEFAULT_TOLERANCE, |l| {
        (l.forward(x.view()) * &r).sum()
    });
    let l2 = layer.clone();
    report
        .blocks
        .push(check_block("input", &mut x, &dx, DEFAULT_STEP, |x| (l2.forward(x.view()) * &r).sum()));
    report
}

/// Small MLP under softmax cross-entropy.
pub fn check_mlp(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mlp = Mlp::new(6, &[5, 4], 3, seed);
    randomize_biases(&mut mlp, &mut rng);
    let x = random_matrix(8, 6, &mut rng);
    let y: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
    let (_, grads) = mlp.loss_and_grads(x.clone(), &y);
    check_params("mlp", &mut mlp, &grads, DEFAULT_STEP, DEFAULT_TOLERANCE, |m| {
        softmax_cross_entropy(&m.logits(x.clone()), &y).0
    })
}

/// One convolution on a random graph of at most 12 nodes under
/// `sum(out * r)`, including the input gradient.
pub fn check_conv(variant: Variant, seed: u64, corruption: Corruption) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=12);
    let g = random_graph(n, n, &mut rng);
    let labels: Vec<usize> = g.edges.iter().map(|e| e.label).collect();
    let (d_in, d_out) = (6, 5);
    let mut layer = ConvLayer::new(variant, d_in, d_out, &labels, &mut rng);
    randomize_biases(&mut layer, &mut rng);
    let mut x = random_matrix(n, d_in, &mut rng);
    let r = random_matrix(n, d_out, &mut rng);
    let (_, cache) = layer.forward(&g, x.view()).expect("dimensions match");
    let (dx, mut grads) = layer.backward(&g, x.view(), &cache, r.view());
    corrupt(&mut grads, corruption);
    let out = |l: &ConvLayer, x: &Array2<f64>| (l.forward(&g, x.view()).expect("dimensions match").0 * &r).sum();
    let mut report = check_params(variant.as_str(), &mut layer, &grads, DEFAULT_STEP, DEFAULT_TOLERANCE, |l| out(l, &x));
    let l2 = layer.clone();
    report.blocks.push(check_block("input", &mut x, &dx, DEFAULT_STEP, |x| out(&l2, x)));
    report
}

/// Whole edge classifier (two convolutions and the edge head) under
/// cross-entropy.
pub fn check_edge_classifier(variant: Variant, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=12);
    let g = random_graph(n, n / 2, &mut rng);
    let labels: Vec<usize> = g.edges.iter().map(|e| e.label).collect();
    let mut model = EdgeClassifier::new(variant, 5, 4, 2, &labels, seed);
    randomize_biases(&mut model, &mut rng);
    let x = random_matrix(n, 5, &mut rng);
    let pairs: Vec<(usize, usize)> = (0..6).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
    let y: Vec<usize> = (0..pairs.len()).map(|_| rng.random_range(0..2)).collect();
    let (_, grads) = model.loss_and_grads(&g, &x, &pairs, &y).expect("dimensions match");
    check_params(
        &format!("edge/{variant}"),
        &mut model,
        &grads,
        DEFAULT_STEP,
        DEFAULT_TOLERANCE,
        |m| m.loss(&g, &x, &pairs, &y).expect("dimensions match"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 1e-3).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dense_passes_and_corruption_is_flagged() {
        assert!(check_dense(1, Corruption::None).passed());
        let bad = check_dense(1, Corruption::ScaleFirstBlock);
        assert!(!bad.passed());
        assert!(bad.max_rel_error() > 5e-3);
    }
}
