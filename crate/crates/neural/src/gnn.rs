//! Graph convolutions with hand-written backward passes.
//!
//! Every layer reads messages along directed edges `src -> dst` and updates
//! the destination node. Edge labels index the dependency label inventory and
//! double as one-hot edge features. Layers return pre-activations; callers
//! apply the nonlinearity.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Param, Parameterized};

pub const N_EDGE_LABELS: usize = facta_core::lingo::DEP_LABELS.len();
/// Self-loops carry the `NIL` label.
pub const SELF_LOOP_LABEL: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<GraphEdge>,
    /// Edge indices grouped by destination.
    incoming: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<GraphEdge>) -> Result<Self> {
        let mut incoming = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.src >= n || e.dst >= n {
                return Err(Error::Dimension(format!("edge {}->{} in a graph of {n} nodes", e.src, e.dst)));
            }
            if e.label >= N_EDGE_LABELS {
                return Err(Error::InvalidArgument(format!("edge label {}", e.label)));
            }
            incoming[e.dst].push(i);
        }
        Ok(Graph { n, edges, incoming })
    }

    /// Adds a `NIL` self-loop to every node that lacks one.
    pub fn with_self_loops(n: usize, mut edges: Vec<GraphEdge>) -> Result<Self> {
        let mut has = vec![false; n];
        for e in &edges {
            if e.src == e.dst && e.src < n {
                has[e.src] = true;
            }
        }
        for (v, h) in has.into_iter().enumerate() {
            if !h {
                edges.push(GraphEdge {
                    src: v,
                    dst: v,
                    label: SELF_LOOP_LABEL,
                });
            }
        }
        Graph::new(n, edges)
    }

    pub fn incoming(&self, v: usize) -> &[usize] {
        &self.incoming[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.incoming[v].len()
    }

    /// Disjoint union; node ids of graph `i` are shifted by `offsets[i]`.
    pub fn disjoint_union<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> (Graph, Vec<usize>) {
        let mut n = 0;
        let mut edges = Vec::new();
        let mut offsets = Vec::new();
        for g in graphs {
            offsets.push(n);
            edges.extend(g.edges.iter().map(|e| GraphEdge {
                src: e.src + n,
                dst: e.dst + n,
                label: e.label,
            }));
            n += g.n;
        }
        (Graph::new(n, edges).expect("shifted edges stay in range"), offsets)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    Sum,
    Mean,
    Max,
    /// Third central moment per dimension.
    Moment3,
    Variance,
}

/// Aggregate per-edge messages (`E x d`) at each destination. Nodes without
/// incoming edges get zeros. For `Max` the winning edge index per cell is
/// returned, `usize::MAX` where there is none.
pub fn aggregate(g: &Graph, msgs: ArrayView2<f64>, agg: Aggregator) -> (Array2<f64>, Option<Array2<usize>>) {
    let d = msgs.ncols();
    let mut out = Array2::zeros((g.n, d));
    let mut arg = (agg == Aggregator::Max).then(|| Array2::from_elem((g.n, d), usize::MAX));
    for v in 0..g.n {
        let inc = g.incoming(v);
        if inc.is_empty() {
            continue;
        }
        let k = inc.len() as f64;
        let mut row = out.row_mut(v);
        match agg {
            Aggregator::Sum | Aggregator::Mean => {
                for &e in inc {
                    row += &msgs.row(e);
                }
                if agg == Aggregator::Mean {
                    row /= k;
                }
            }
            Aggregator::Max => {
                let arg = arg.as_mut().expect("max keeps argmax");
                for j in 0..d {
                    let mut best = inc[0];
                    for &e in &inc[1..] {
                        if msgs[[e, j]] > msgs[[best, j]] {
                            best = e;
                        }
                    }
                    row[j] = msgs[[best, j]];
                    arg[[v, j]] = best;
                }
            }
            Aggregator::Moment3 | Aggregator::Variance => {
                let power = if agg == Aggregator::Moment3 { 3 } else { 2 };
                for j in 0..d {
                    let mu = inc.iter().map(|&e| msgs[[e, j]]).sum::<f64>() / k;
                    row[j] = inc.iter().map(|&e| (msgs[[e, j]] - mu).powi(power)).sum::<f64>() / k;
                }
            }
        }
    }
    (out, arg)
}

/// Gradient of [`aggregate`] with respect to the messages.
pub fn aggregate_backward(
    g: &Graph,
    msgs: ArrayView2<f64>,
    agg: Aggregator,
    argmax: Option<&Array2<usize>>,
    dout: ArrayView2<f64>,
) -> Array2<f64> {
    let d = msgs.ncols();
    let mut dm = Array2::zeros(msgs.raw_dim());
    for v in 0..g.n {
        let inc = g.incoming(v);
        if inc.is_empty() {
            continue;
        }
        let k = inc.len() as f64;
        match agg {
            Aggregator::Sum | Aggregator::Mean => {
                let scale = if agg == Aggregator::Mean { 1.0 / k } else { 1.0 };
                for &e in inc {
                    dm.row_mut(e).scaled_add(scale, &dout.row(v));
                }
            }
            Aggregator::Max => {
                let arg = argmax.expect("max backward needs argmax");
                for j in 0..d {
                    dm[[arg[[v, j]], j]] += dout[[v, j]];
                }
            }
            Aggregator::Moment3 | Aggregator::Variance => {
                for j in 0..d {
                    let mu = inc.iter().map(|&e| msgs[[e, j]]).sum::<f64>() / k;
                    let var = inc.iter().map(|&e| (msgs[[e, j]] - mu).powi(2)).sum::<f64>() / k;
                    for &e in inc {
                        let c = msgs[[e, j]] - mu;
                        let local = if agg == Aggregator::Moment3 {
                            3.0 / k * (c * c - var)
                        } else {
                            2.0 / k * c
                        };
                        dm[[e, j]] += dout[[v, j]] * local;
                    }
                }
            }
        }
    }
    dm
}

fn gather_src(g: &Graph, x: ArrayView2<f64>) -> Array2<f64> {
    let idx: Vec<usize> = g.edges.iter().map(|e| e.src).collect();
    x.select(Axis(0), &idx)
}

fn scatter_src(g: &Graph, dmsgs: &Array2<f64>, into: &mut Array2<f64>) {
    for (i, e) in g.edges.iter().enumerate() {
        into.row_mut(e.src).scaled_add(1.0, &dmsgs.row(i));
    }
}

fn bias_grad(dout: &ArrayView2<f64>) -> Array2<f64> {
    dout.sum_axis(Axis(0)).insert_axis(Axis(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    SageMean,
    SagePool,
    Gcn,
    Rgcn,
    CfConv,
    Pna,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::SageMean,
        Variant::SagePool,
        Variant::Gcn,
        Variant::Rgcn,
        Variant::CfConv,
        Variant::Pna,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SageMean => "sage_mean",
            Variant::SagePool => "sage_pool",
            Variant::Gcn => "gcn",
            Variant::Rgcn => "rgcn",
            Variant::CfConv => "cfconv",
            Variant::Pna => "pna",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// One convolution. Parameter order per variant:
///
/// - sage_mean: `w (2i x o)`, `b`
/// - sage_pool: `wp (i x i)`, `bp`, `w (2i x o)`, `b`
/// - gcn: `w (i x o)`, `b`
/// - rgcn: `w0 (i x o)`, one `w_label (i x o)` per known label, `b`
/// - cfconv: `wx (i x o)`, `wf (labels x o)`, `bf`, `b`
/// - pna: `wm (i x o)`, `we (labels x o)`, `bm`, `w ((i + 4o) x o)`, `b`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub variant: Variant,
    pub d_in: usize,
    pub d_out: usize,
    /// Edge labels with their own weights (rgcn only); edges with other
    /// labels are ignored by that variant.
    pub labels: Vec<usize>,
    pub params: Vec<Param>,
}

/// Nodes receiving edges of one label, with their mean incoming state.
pub struct LabelGroup {
    rows: Vec<usize>,
    /// `(edge index, row)` for every edge of the label.
    edge_rows: Vec<(usize, usize)>,
    counts: Vec<usize>,
    mean: Array2<f64>,
}

pub enum ConvCache {
    SageMean { z: Array2<f64> },
    SagePool { pre: Array2<f64>, msgs: Array2<f64>, argmax: Array2<usize>, z: Array2<f64> },
    Gcn { coef: Vec<f64>, a: Array2<f64> },
    Rgcn { groups: Vec<LabelGroup> },
    CfConv { x: Array2<f64> },
    Pna { msgs: Array2<f64>, argmax: Array2<usize>, z: Array2<f64> },
}

impl ConvLayer {
    pub fn new(variant: Variant, d_in: usize, d_out: usize, labels: &[usize], rng: &mut impl Rng) -> Self {
        let (i, o) = (d_in, d_out);
        let mut labels = labels.to_vec();
        labels.sort_unstable();
        labels.dedup();
        let params = match variant {
            Variant::SageMean => vec![Param::glorot("w", 2 * i, o, rng), Param::zeros("b", 1, o)],
            Variant::SagePool => vec![
                Param::glorot("wp", i, i, rng),
                Param::zeros("bp", 1, i),
                Param::glorot("w", 2 * i, o, rng),
                Param::zeros("b", 1, o),
            ],
            Variant::Gcn => vec![Param::glorot("w", i, o, rng), Param::zeros("b", 1, o)],
            Variant::Rgcn => {
                let mut p = vec![Param::glorot("w0", i, o, rng)];
                for &l in &labels {
                    p.push(Param::glorot(format!("w_{}", facta_core::lingo::DEP_LABELS[l]), i, o, rng));
                }
                p.push(Param::zeros("b", 1, o));
                p
            }
            Variant::CfConv => vec![
                Param::glorot("wx", i, o, rng),
                Param::glorot("wf", N_EDGE_LABELS, o, rng),
                Param::zeros("bf", 1, o),
                Param::zeros("b", 1, o),
            ],
            Variant::Pna => vec![
                Param::glorot("wm", i, o, rng),
                Param::glorot("we", N_EDGE_LABELS, o, rng),
                Param::zeros("bm", 1, o),
                Param::glorot("w", i + 4 * o, o, rng),
                Param::zeros("b", 1, o),
            ],
        };
        if variant != Variant::Rgcn {
            labels.clear();
        }
        ConvLayer {
            variant,
            d_in,
            d_out,
            labels,
            params,
        }
    }

    fn p(&self, i: usize) -> &Array2<f64> {
        &self.params[i].value
    }

    pub fn forward(&self, g: &Graph, h: ArrayView2<f64>) -> Result<(Array2<f64>, ConvCache)> {
        if h.ncols() != self.d_in || h.nrows() != g.n {
            return Err(Error::Dimension(format!(
                "{} layer expects {} x {}, got {} x {}",
                self.variant,
                g.n,
                self.d_in,
                h.nrows(),
                h.ncols()
            )));
        }
        Ok(match self.variant {
            Variant::SageMean => {
                let (mean, _) = aggregate(g, gather_src(g, h).view(), Aggregator::Mean);
                let z = concatenate![Axis(1), h, mean];
                (z.dot(self.p(0)) + self.p(1), ConvCache::SageMean { z })
            }
            Variant::SagePool => {
                let pre = h.dot(self.p(0)) + self.p(1);
                let msgs = gather_src(g, pre.mapv(|v| v.max(0.0)).view());
                let (pooled, argmax) = aggregate(g, msgs.view(), Aggregator::Max);
                let z = concatenate![Axis(1), h, pooled];
                let out = z.dot(self.p(2)) + self.p(3);
                let argmax = argmax.expect("max keeps argmax");
                (out, ConvCache::SagePool { pre, msgs, argmax, z })
            }
            Variant::Gcn => {
                let coef: Vec<f64> = g
                    .edges
                    .iter()
                    .map(|e| 1.0 / ((g.in_degree(e.src) * g.in_degree(e.dst)) as f64).sqrt())
                    .collect();
                let mut msgs = gather_src(g, h);
                for (mut row, c) in msgs.rows_mut().into_iter().zip(&coef) {
                    row *= *c;
                }
                let (a, _) = aggregate(g, msgs.view(), Aggregator::Sum);
                (a.dot(self.p(0)) + self.p(1), ConvCache::Gcn { coef, a })
            }
            Variant::Rgcn => {
                let mut out = h.dot(self.p(0));
                let groups = self.label_groups(g, h);
                for (slot, grp) in groups.iter().enumerate() {
                    if grp.rows.is_empty() {
                        continue;
                    }
                    let part = grp.mean.dot(self.p(1 + slot));
                    for (r, &v) in grp.rows.iter().enumerate() {
                        out.row_mut(v).scaled_add(1.0, &part.row(r));
                    }
                }
                out += self.p(1 + self.labels.len());
                (out, ConvCache::Rgcn { groups })
            }
            Variant::CfConv => {
                let x = h.dot(self.p(0));
                let (wf, bf) = (self.p(1), self.p(2));
                let mut out = Array2::zeros((g.n, self.d_out));
                for e in &g.edges {
                    let filter = &wf.row(e.label) + &bf.row(0);
                    let msg = &x.row(e.src) * &filter;
                    out.row_mut(e.dst).scaled_add(1.0, &msg);
                }
                out += self.p(3);
                (out, ConvCache::CfConv { x })
            }
            Variant::Pna => {
                let msgs = self.pna_messages(g, h);
                let (mean, _) = aggregate(g, msgs.view(), Aggregator::Mean);
                let (max, argmax) = aggregate(g, msgs.view(), Aggregator::Max);
                let (m3, _) = aggregate(g, msgs.view(), Aggregator::Moment3);
                let (var, _) = aggregate(g, msgs.view(), Aggregator::Variance);
                let z = concatenate![Axis(1), h, mean, max, m3, var];
                let out = z.dot(self.p(3)) + self.p(4);
                let argmax = argmax.expect("max keeps argmax");
                (out, ConvCache::Pna { msgs, argmax, z })
            }
        })
    }

    /// Per known label, the mean of that label's incoming messages at each
    /// node that has any, stored compactly.
    fn label_groups(&self, g: &Graph, h: ArrayView2<f64>) -> Vec<LabelGroup> {
        let mut by_slot: Vec<Vec<usize>> = vec![Vec::new(); self.labels.len()];
        for (i, e) in g.edges.iter().enumerate() {
            if let Ok(slot) = self.labels.binary_search(&e.label) {
                by_slot[slot].push(i);
            }
        }
        let mut local = vec![usize::MAX; g.n];
        by_slot
            .into_iter()
            .map(|edges| {
                let mut rows = Vec::new();
                let mut edge_rows = Vec::with_capacity(edges.len());
                for &i in &edges {
                    let v = g.edges[i].dst;
                    if local[v] == usize::MAX {
                        local[v] = rows.len();
                        rows.push(v);
                    }
                    edge_rows.push((i, local[v]));
                }
                let mut mean = Array2::zeros((rows.len(), self.d_in));
                let mut counts = vec![0usize; rows.len()];
                for &(i, r) in &edge_rows {
                    mean.row_mut(r).scaled_add(1.0, &h.row(g.edges[i].src));
                    counts[r] += 1;
                }
                for (mut row, &c) in mean.rows_mut().into_iter().zip(&counts) {
                    row /= c as f64;
                }
                for &v in &rows {
                    local[v] = usize::MAX;
                }
                LabelGroup {
                    rows,
                    edge_rows,
                    counts,
                    mean,
                }
            })
            .collect()
    }

    /// `m_e = h_src wm + we[label] + bm`.
    fn pna_messages(&self, g: &Graph, h: ArrayView2<f64>) -> Array2<f64> {
        let y = h.dot(self.p(0));
        let (we, bm) = (self.p(1), self.p(2));
        let mut msgs = Array2::zeros((g.edges.len(), self.d_out));
        for (i, e) in g.edges.iter().enumerate() {
            let mut row = msgs.row_mut(i);
            row.assign(&y.row(e.src));
            row += &we.row(e.label);
            row += &bm.row(0);
        }
        msgs
    }

    /// Returns the gradient at the input and one gradient per parameter.
    pub fn backward(
        &self,
        g: &Graph,
        h: ArrayView2<f64>,
        cache: &ConvCache,
        dout: ArrayView2<f64>,
    ) -> (Array2<f64>, Vec<Array2<f64>>) {
        let d = self.d_in;
        match (self.variant, cache) {
            (Variant::SageMean, ConvCache::SageMean { z }) => {
                let dz = dout.dot(&self.p(0).t());
                let mut dh = dz.slice(s![.., ..d]).to_owned();
                let msgs = gather_src(g, h);
                let dm = aggregate_backward(g, msgs.view(), Aggregator::Mean, None, dz.slice(s![.., d..]));
                scatter_src(g, &dm, &mut dh);
                (dh, vec![z.t().dot(&dout), bias_grad(&dout)])
            }
            (Variant::SagePool, ConvCache::SagePool { pre, msgs, argmax, z }) => {
                let dz = dout.dot(&self.p(2).t());
                let dmsgs =
                    aggregate_backward(g, msgs.view(), Aggregator::Max, Some(argmax), dz.slice(s![.., d..]));
                let mut dp = Array2::zeros(pre.raw_dim());
                scatter_src(g, &dmsgs, &mut dp);
                let dpre = crate::dense::relu_backward(pre, dp);
                let mut dh = dz.slice(s![.., ..d]).to_owned();
                dh += &dpre.dot(&self.p(0).t());
                let grads = vec![
                    h.t().dot(&dpre),
                    bias_grad(&dpre.view()),
                    z.t().dot(&dout),
                    bias_grad(&dout),
                ];
                (dh, grads)
            }
            (Variant::Gcn, ConvCache::Gcn { coef, a }) => {
                let da = dout.dot(&self.p(0).t());
                let mut dh = Array2::zeros((g.n, d));
                for (e, c) in g.edges.iter().zip(coef) {
                    dh.row_mut(e.src).scaled_add(*c, &da.row(e.dst));
                }
                (dh, vec![a.t().dot(&dout), bias_grad(&dout)])
            }
            (Variant::Rgcn, ConvCache::Rgcn { groups }) => {
                let mut dh = dout.dot(&self.p(0).t());
                let mut grads = vec![h.t().dot(&dout)];
                for (slot, grp) in groups.iter().enumerate() {
                    let dsub = dout.select(Axis(0), &grp.rows);
                    grads.push(grp.mean.t().dot(&dsub));
                    let dm = dsub.dot(&self.p(1 + slot).t());
                    for &(i, r) in &grp.edge_rows {
                        dh.row_mut(g.edges[i].src).scaled_add(1.0 / grp.counts[r] as f64, &dm.row(r));
                    }
                }
                grads.push(bias_grad(&dout));
                (dh, grads)
            }
            (Variant::CfConv, ConvCache::CfConv { x }) => {
                let (wf, bf) = (self.p(1), self.p(2));
                let mut dx = Array2::zeros(x.raw_dim());
                let mut dwf = Array2::zeros(wf.raw_dim());
                for e in &g.edges {
                    let filter = &wf.row(e.label) + &bf.row(0);
                    dx.row_mut(e.src).scaled_add(1.0, &(&dout.row(e.dst) * &filter));
                    dwf.row_mut(e.label).scaled_add(1.0, &(&dout.row(e.dst) * &x.row(e.src)));
                }
                let dbf = dwf.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dh = dx.dot(&self.p(0).t());
                (dh, vec![h.t().dot(&dx), dwf, dbf, bias_grad(&dout)])
            }
            (Variant::Pna, ConvCache::Pna { msgs, argmax, z }) => {
                let o = self.d_out;
                let dz = dout.dot(&self.p(3).t());
                let block = |k: usize| dz.slice(s![.., d + k * o..d + (k + 1) * o]);
                let mut dm = aggregate_backward(g, msgs.view(), Aggregator::Mean, None, block(0));
                dm += &aggregate_backward(g, msgs.view(), Aggregator::Max, Some(argmax), block(1));
                dm += &aggregate_backward(g, msgs.view(), Aggregator::Moment3, None, block(2));
                dm += &aggregate_backward(g, msgs.view(), Aggregator::Variance, None, block(3));
                let mut dy = Array2::zeros((g.n, o));
                let mut dwe = Array2::zeros((N_EDGE_LABELS, o));
                for (i, e) in g.edges.iter().enumerate() {
                    dy.row_mut(e.src).scaled_add(1.0, &dm.row(i));
                    dwe.row_mut(e.label).scaled_add(1.0, &dm.row(i));
                }
                let dbm = dm.sum_axis(Axis(0)).insert_axis(Axis(0));
                let mut dh = dz.slice(s![.., ..d]).to_owned();
                dh += &dy.dot(&self.p(0).t());
                let grads = vec![h.t().dot(&dy), dwe, dbm, z.t().dot(&dout), bias_grad(&dout)];
                (dh, grads)
            }
            _ => unreachable!("cache built by a different variant"),
        }
    }
}

impl Parameterized for ConvLayer {
    fn params(&self) -> Vec<&Param> {
        self.params.iter().collect()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.params.iter_mut().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_loop_only_mean_is_identity() {
        let g = Graph::with_self_loops(1, vec![]).unwrap();
        let x = array![[1.5, -2.0, 0.25]];
        let (m, _) = aggregate(&g, gather_src(&g, x.view()).view(), Aggregator::Mean);
        assert_eq!(m, x);
    }

    #[test]
    fn identical_neighbors_have_zero_variance() {
        let g = Graph::new(
            2,
            vec![
                GraphEdge { src: 0, dst: 1, label: 0 },
                GraphEdge { src: 0, dst: 1, label: 2 },
                GraphEdge { src: 1, dst: 1, label: 1 },
            ],
        )
        .unwrap();
        let x = array![[3.0, -1.0], [3.0, -1.0]];
        let msgs = gather_src(&g, x.view());
        let (v, _) = aggregate(&g, msgs.view(), Aggregator::Variance);
        let (m3, _) = aggregate(&g, msgs.view(), Aggregator::Moment3);
        assert!(v.iter().chain(m3.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn self_loops_added_once() {
        let g = Graph::with_self_loops(3, vec![GraphEdge { src: 1, dst: 1, label: 5 }]).unwrap();
        assert_eq!(g.edges.len(), 3);
        assert!((0..3).all(|v| g.in_degree(v) == 1));
    }

    #[test]
    fn bad_edges_rejected() {
        assert!(Graph::new(2, vec![GraphEdge { src: 0, dst: 2, label: 0 }]).is_err());
        assert!(Graph::new(2, vec![GraphEdge { src: 0, dst: 1, label: 40 }]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = ConvLayer::new(Variant::Gcn, 3, 2, &[], &mut rng);
        let g = Graph::with_self_loops(2, vec![]).unwrap();
        assert!(matches!(layer.forward(&g, Array2::zeros((2, 4)).view()), Err(Error::Dimension(_))));
    }

    #[test]
    fn rgcn_weights_only_for_known_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = ConvLayer::new(Variant::Rgcn, 3, 2, &[7, 1, 7], &mut rng);
        assert_eq!(layer.labels, vec![1, 7]);
        let names: Vec<_> = layer.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["w0", "w_NIL", "w_amod", "b"]);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("gat".parse::<Variant>().is_err());
    }
}
