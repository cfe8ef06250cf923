//! Brute-force restatement of the aggregators and convolution layers.

use facta_neural::gnn::{ConvLayer, Graph, GraphEdge, Variant};
use ndarray::Array2;

// Naive helpers over plain vectors, scanning the full edge list per node.

pub fn row(m: &Array2<f64>, i: usize) -> Vec<f64> {
    m.row(i).to_vec()
}

pub fn vec_mat(x: &[f64], w: &Array2<f64>) -> Vec<f64> {
    (0..w.ncols()).map(|j| (0..x.len()).map(|i| x[i] * w[[i, j]]).sum()).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn incoming(g: &Graph, v: usize) -> Vec<GraphEdge> {
    g.edges.iter().filter(|e| e.dst == v).copied().collect()
}

pub fn stats(msgs: &[Vec<f64>], d: usize) -> [Vec<f64>; 4] {
    let k = msgs.len() as f64;
    let mut out = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    if msgs.is_empty() {
        return out;
    }
    for j in 0..d {
        let col: Vec<f64> = msgs.iter().map(|m| m[j]).collect();
        let mu = col.iter().sum::<f64>() / k;
        out[0][j] = mu;
        out[1][j] = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out[2][j] = col.iter().map(|x| (x - mu).powi(3)).sum::<f64>() / k;
        out[3][j] = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / k;
    }
    out
}

pub fn param<'a>(layer: &'a ConvLayer, name: &str) -> &'a Array2<f64> {
    &layer.params.iter().find(|p| p.name == name).unwrap().value
}

pub fn brute_force(layer: &ConvLayer, g: &Graph, h: &Array2<f64>) -> Vec<Vec<f64>> {
    let d = h.ncols();
    (0..g.n)
        .map(|v| {
            let inc = incoming(g, v);
            let hv = row(h, v);
            match layer.variant {
                Variant::SageMean => {
                    let msgs: Vec<Vec<f64>> = inc.iter().map(|e| row(h, e.src)).collect();
                    let z = [hv, stats(&msgs, d)[0].clone()].concat();
                    add(&vec_mat(&z, param(layer, "w")), &row(param(layer, "b"), 0))
                }
                Variant::SagePool => {
                    let msgs: Vec<Vec<f64>> = inc
                        .iter()
                        .map(|e| {
                            add(&vec_mat(&row(h, e.src), param(layer, "wp")), &row(param(layer, "bp"), 0))
                                .into_iter()
                                .map(|x| x.max(0.0))
                                .collect()
                        })
                        .collect();
                    let z = [hv, stats(&msgs, d)[1].clone()].concat();
                    add(&vec_mat(&z, param(layer, "w")), &row(param(layer, "b"), 0))
                }
                Variant::Gcn => {
                    let deg = |x: usize| g.edges.iter().filter(|e| e.dst == x).count() as f64;
                    let mut a = vec![0.0; d];
                    for e in &inc {
                        let c = 1.0 / (deg(e.src) * deg(v)).sqrt();
                        a = add(&a, &row(h, e.src).iter().map(|x| x * c).collect::<Vec<_>>());
                    }
                    add(&vec_mat(&a, param(layer, "w")), &row(param(layer, "b"), 0))
                }
                Variant::Rgcn => {
                    let mut out = vec_mat(&hv, param(layer, "w0"));
                    for (slot, &label) in layer.labels.iter().enumerate() {
                        let msgs: Vec<Vec<f64>> =
                            inc.iter().filter(|e| e.label == label).map(|e| row(h, e.src)).collect();
                        let w = &layer.params[1 + slot].value;
                        out = add(&out, &vec_mat(&stats(&msgs, d)[0], w));
                    }
                    add(&out, &row(param(layer, "b"), 0))
                }
                Variant::CfConv => {
                    let mut out = row(param(layer, "b"), 0);
                    for e in &inc {
                        let x = vec_mat(&row(h, e.src), param(layer, "wx"));
                        let f = add(&row(param(layer, "wf"), e.label), &row(param(layer, "bf"), 0));
                        out = add(&out, &x.iter().zip(&f).map(|(a, b)| a * b).collect::<Vec<_>>());
                    }
                    out
                }
                Variant::Pna => {
                    let msgs: Vec<Vec<f64>> = inc
                        .iter()
                        .map(|e| {
                            let m = vec_mat(&row(h, e.src), param(layer, "wm"));
                            add(&add(&m, &row(param(layer, "we"), e.label)), &row(param(layer, "bm"), 0))
                        })
                        .collect();
                    let [mean, max, m3, var] = stats(&msgs, layer.d_out);
                    let z = [hv, mean, max, m3, var].concat();
                    add(&vec_mat(&z, param(layer, "w")), &row(param(layer, "b"), 0))
                }
            }
        })
        .collect()
}

pub fn max_diff(a: &Array2<f64>, b: &[Vec<f64>]) -> f64 {
    let mut m: f64 = 0.0;
    for (i, r) in b.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            m = m.max((a[[i, j]] - x).abs());
        }
    }
    m
}

