//! Edge classification: stacked convolutions, then `[h_u | h_v]` through two
//! linear layers to two logits. Training follows the batch and edge-sampling
//! regime of the graph benchmark.

use ndarray::{concatenate, s, Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{argmax_rows, relu, relu_backward, softmax_cross_entropy, Dense};
use crate::error::{Error, Result};
use crate::gnn::{ConvCache, ConvLayer, Graph, Variant};
use crate::graphs::SentenceGraph;
use crate::params::{Adam, AdamConfig, Param, Parameterized};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassifier {
    pub variant: Variant,
    pub convs: Vec<ConvLayer>,
    pub fc1: Dense,
    pub fc2: Dense,
}

pub struct EdgeTrace {
    /// Input of each convolution, then the final node states.
    pub hs: Vec<Array2<f64>>,
    pub pres: Vec<Array2<f64>>,
    pub caches: Vec<ConvCache>,
    pub rep: Array2<f64>,
    pub z1: Array2<f64>,
    pub a1: Array2<f64>,
    pub logits: Array2<f64>,
}

impl EdgeClassifier {
    pub fn new(variant: Variant, d_in: usize, hidden: usize, layers: usize, labels: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::with_capacity(layers);
        let mut d = d_in;
        for _ in 0..layers.max(1) {
            convs.push(ConvLayer::new(variant, d, hidden, labels, &mut rng));
            d = hidden;
        }
        EdgeClassifier {
            variant,
            fc1: Dense::new("fc1", 2 * d, d, &mut rng),
            fc2: Dense::new("fc2", d, 2, &mut rng),
            convs,
        }
    }

    pub fn forward(&self, g: &Graph, x: &Array2<f64>, pairs: &[(usize, usize)]) -> Result<EdgeTrace> {
        let mut hs = vec![x.clone()];
        let mut pres = Vec::new();
        let mut caches = Vec::new();
        for conv in &self.convs {
            let (pre, cache) = conv.forward(g, hs.last().expect("input").view())?;
            hs.push(relu(&pre));
            pres.push(pre);
            caches.push(cache);
        }
        let h = hs.last().expect("node states");
        if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u >= g.n || v >= g.n) {
            return Err(Error::Dimension(format!("candidate ({u}, {v}) outside {} nodes", g.n)));
        }
        let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let rep = concatenate![Axis(1), h.select(Axis(0), &us), h.select(Axis(0), &vs)];
        let z1 = self.fc1.forward(rep.view());
        let a1 = relu(&z1);
        let logits = self.fc2.forward(a1.view());
        Ok(EdgeTrace {
            hs,
            pres,
            caches,
            rep,
            z1,
            a1,
            logits,
        })
    }

    /// Parameter gradients and the gradient at the input features.
    pub fn backward(
        &self,
        g: &Graph,
        pairs: &[(usize, usize)],
        trace: &EdgeTrace,
        dlogits: Array2<f64>,
    ) -> (Vec<Array2<f64>>, Array2<f64>) {
        let (da1, [dw2, db2]) = self.fc2.backward(trace.a1.view(), dlogits.view());
        let dz1 = relu_backward(&trace.z1, da1);
        let (drep, [dw1, db1]) = self.fc1.backward(trace.rep.view(), dz1.view());
        let d = drep.ncols() / 2;
        let mut dh = Array2::zeros(trace.hs.last().expect("node states").raw_dim());
        for (i, &(u, v)) in pairs.iter().enumerate() {
            dh.row_mut(u).scaled_add(1.0, &drep.slice(s![i, ..d]));
            dh.row_mut(v).scaled_add(1.0, &drep.slice(s![i, d..]));
        }
        let mut conv_grads = Vec::with_capacity(self.convs.len());
        for l in (0..self.convs.len()).rev() {
            let dpre = relu_backward(&trace.pres[l], dh);
            let (dx, grads) = self.convs[l].backward(g, trace.hs[l].view(), &trace.caches[l], dpre.view());
            conv_grads.push(grads);
            dh = dx;
        }
        conv_grads.reverse();
        let mut grads: Vec<Array2<f64>> = conv_grads.into_iter().flatten().collect();
        grads.extend([dw1, db1, dw2, db2]);
        (grads, dh)
    }

    pub fn loss_and_grads(
        &self,
        g: &Graph,
        x: &Array2<f64>,
        pairs: &[(usize, usize)],
        labels: &[usize],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let trace = self.forward(g, x, pairs)?;
        let (loss, dlogits) = softmax_cross_entropy(&trace.logits, labels);
        Ok((loss, self.backward(g, pairs, &trace, dlogits).0))
    }

    pub fn loss(&self, g: &Graph, x: &Array2<f64>, pairs: &[(usize, usize)], labels: &[usize]) -> Result<f64> {
        let trace = self.forward(g, x, pairs)?;
        Ok(softmax_cross_entropy(&trace.logits, labels).0)
    }

    pub fn predict(&self, g: &Graph, x: &Array2<f64>, pairs: &[(usize, usize)]) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.forward(g, x, pairs)?.logits))
    }
}

impl Parameterized for EdgeClassifier {
    fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.convs.iter().flat_map(|c| c.params.iter()).collect();
        out.extend([&self.fc1.w, &self.fc1.b, &self.fc2.w, &self.fc2.b]);
        out
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.convs.iter_mut().flat_map(|c| c.params.iter_mut()).collect();
        out.extend([&mut self.fc1.w, &mut self.fc1.b, &mut self.fc2.w, &mut self.fc2.b]);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub variant: Variant,
    pub hidden: usize,
    pub layers: usize,
    pub epochs: usize,
    pub lr: f64,
    pub nodes_per_batch: usize,
    pub loss_edge_fraction: f64,
    pub test_edge_fraction: f64,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            variant: Variant::SageMean,
            hidden: 64,
            layers: 2,
            epochs: 10,
            lr: 0.01,
            nodes_per_batch: 25_000,
            loss_edge_fraction: 0.05,
            test_edge_fraction: 0.15,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnReport {
    pub variant: Variant,
    pub n_batches: usize,
    pub skipped_batches: usize,
    pub test_edges: usize,
    /// Mean loss over the sampled loss edges, per epoch.
    pub losses: Vec<f64>,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// One batch: whole graphs merged into a disjoint union.
pub struct Batch {
    pub graph: Graph,
    pub features: Array2<f64>,
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<usize>,
}

/// Greedy grouping of whole graphs up to `nodes_per_batch` nodes; a graph
/// larger than the budget forms its own batch.
pub fn make_batches(graphs: &[SentenceGraph], nodes_per_batch: usize) -> Vec<Batch> {
    let mut groups: Vec<Vec<&SentenceGraph>> = Vec::new();
    let mut size = 0;
    for g in graphs {
        if groups.is_empty() || (size + g.n_nodes() > nodes_per_batch && size > 0) {
            groups.push(Vec::new());
            size = 0;
        }
        groups.last_mut().expect("open group").push(g);
        size += g.n_nodes();
    }
    groups
        .into_iter()
        .map(|group| {
            let (graph, offsets) = Graph::disjoint_union(group.iter().map(|g| &g.graph));
            let views: Vec<_> = group.iter().map(|g| g.features.view()).collect();
            let features = ndarray::concatenate(Axis(0), &views).expect("equal feature widths");
            let mut pairs = Vec::new();
            let mut labels = Vec::new();
            for (g, off) in group.iter().zip(offsets) {
                pairs.extend(g.candidates.iter().map(|c| (c.u + off, c.v + off)));
                labels.extend(g.targets());
            }
            Batch {
                graph,
                features,
                pairs,
                labels,
            }
        })
        .collect()
}

/// Edge labels that occur in the graphs, for the relational variant.
pub fn present_labels(graphs: &[SentenceGraph]) -> Vec<usize> {
    let mut labels: Vec<usize> = graphs.iter().flat_map(|g| g.graph.edges.iter().map(|e| e.label)).collect();
    labels.sort_unstable();
    labels.dedup();
    labels
}

fn round_count(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Train one edge classifier. Per batch a fixed share of candidates is held
/// out for testing; every epoch a fresh sample of the rest drives the loss.
pub fn edge_classifier_train(graphs: &[SentenceGraph], config: &GnnConfig) -> Result<(EdgeClassifier, GnnReport)> {
    let d_in = graphs
        .first()
        .map(|g| g.features.ncols())
        .ok_or_else(|| Error::InvalidArgument("no graphs".into()))?;
    let mut model = EdgeClassifier::new(
        config.variant,
        d_in,
        config.hidden,
        config.layers,
        &present_labels(graphs),
        config.seed,
    );
    let mut opt = Adam::new(&model, AdamConfig { lr: config.lr, ..Default::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xed6e);
    let batches = make_batches(graphs, config.nodes_per_batch.max(1));
    let mut splits = Vec::with_capacity(batches.len());
    let mut skipped = 0;
    for b in &batches {
        let mut order: Vec<usize> = (0..b.pairs.len()).collect();
        order.shuffle(&mut rng);
        let n_test = round_count(order.len(), config.test_edge_fraction);
        let rest = order.split_off(n_test);
        if rest.is_empty() {
            skipped += 1;
        }
        splits.push((order, rest));
    }

    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        let mut seen = 0;
        for (step, (b, (_, pool))) in batches.iter().zip(&splits).enumerate() {
            if pool.is_empty() {
                continue;
            }
            let k = round_count(pool.len(), config.loss_edge_fraction).clamp(1, pool.len());
            let chosen: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
            let pairs: Vec<(usize, usize)> = chosen.iter().map(|&i| b.pairs[i]).collect();
            let labels: Vec<usize> = chosen.iter().map(|&i| b.labels[i]).collect();
            let (loss, grads) = model.loss_and_grads(&b.graph, &b.features, &pairs, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step,
                    detail: format!("{} on {} loss edges", config.variant, k),
                });
            }
            total += loss * k as f64;
            seen += k;
            opt.step(&mut model, &grads);
        }
        losses.push(if seen > 0 { total / seen as f64 } else { f64::NAN });
    }

    let (mut correct, mut count, mut loss_sum) = (0, 0, 0.0);
    for (b, (test, _)) in batches.iter().zip(&splits) {
        if test.is_empty() {
            continue;
        }
        let pairs: Vec<(usize, usize)> = test.iter().map(|&i| b.pairs[i]).collect();
        let labels: Vec<usize> = test.iter().map(|&i| b.labels[i]).collect();
        let trace = model.forward(&b.graph, &b.features, &pairs)?;
        loss_sum += softmax_cross_entropy(&trace.logits, &labels).0 * labels.len() as f64;
        correct += argmax_rows(&trace.logits).iter().zip(&labels).filter(|(p, y)| p == y).count();
        count += labels.len();
    }
    let report = GnnReport {
        variant: config.variant,
        n_batches: batches.len(),
        skipped_batches: skipped,
        test_edges: count,
        losses,
        test_loss: if count > 0 { loss_sum / count as f64 } else { f64::NAN },
        test_accuracy: if count > 0 { correct as f64 / count as f64 } else { 0.0 },
    };
    Ok((model, report))
}
