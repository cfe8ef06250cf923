mod oracle;

use facta_neural::gnn::{aggregate, Aggregator, ConvLayer, Graph, GraphEdge, Variant};
use facta_neural::gradcheck::{random_graph, random_matrix};
use oracle::{add, brute_force, max_diff, row, stats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

#[test]
fn raw_aggregators_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let g = random_graph(n, rng.random_range(0..=n), &mut rng);
        let msgs = random_matrix(g.edges.len(), 4, &mut rng);
        let per_node: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|v| g.edges.iter().enumerate().filter(|(_, e)| e.dst == v).map(|(i, _)| row(&msgs, i)).collect())
            .collect();
        for (agg, slot) in [
            (Aggregator::Mean, 0),
            (Aggregator::Max, 1),
            (Aggregator::Moment3, 2),
            (Aggregator::Variance, 3),
        ] {
            let (got, _) = aggregate(&g, msgs.view(), agg);
            let want: Vec<Vec<f64>> = per_node.iter().map(|m| stats(m, 4)[slot].clone()).collect();
            assert!(max_diff(&got, &want) < TOL, "{agg:?}");
        }
        let (sum, _) = aggregate(&g, msgs.view(), Aggregator::Sum);
        let want: Vec<Vec<f64>> = per_node.iter().map(|m| m.iter().fold(vec![0.0; 4], |a, b| add(&a, b))).collect();
        assert!(max_diff(&sum, &want) < TOL);
    }
}

#[test]
fn every_layer_matches_brute_force_on_100_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let g = random_graph(n, rng.random_range(0..=n), &mut rng);
        let labels: Vec<usize> = g.edges.iter().map(|e| e.label).collect();
        let h = random_matrix(n, 5, &mut rng);
        for v in Variant::ALL {
            let mut layer = ConvLayer::new(v, 5, 3, &labels, &mut rng);
            for p in &mut layer.params {
                p.value = random_matrix(p.value.nrows(), p.value.ncols(), &mut rng);
            }
            let (got, _) = layer.forward(&g, h.view()).unwrap();
            let diff = max_diff(&got, &brute_force(&layer, &g, &h));
            assert!(diff < TOL, "{v}: {diff}");
        }
    }
}

#[test]
fn three_node_star() {
    // Centre 0 joined to leaves 1 and 2, self-loops everywhere.
    let edges = vec![
        GraphEdge { src: 1, dst: 0, label: 27 },
        GraphEdge { src: 0, dst: 1, label: 27 },
        GraphEdge { src: 2, dst: 0, label: 20 },
        GraphEdge { src: 0, dst: 2, label: 20 },
    ];
    let g = Graph::with_self_loops(3, edges).unwrap();
    let h = ndarray::array![[1.0, 0.0], [3.0, -2.0], [-1.0, 5.0]];
    let msgs = h.select(ndarray::Axis(0), &g.edges.iter().map(|e| e.src).collect::<Vec<_>>());
    let (mean, _) = aggregate(&g, msgs.view(), Aggregator::Mean);
    let (max, _) = aggregate(&g, msgs.view(), Aggregator::Max);
    let (var, _) = aggregate(&g, msgs.view(), Aggregator::Variance);
    assert!((mean[[0, 0]] - 1.0).abs() < TOL && (mean[[0, 1]] - 1.0).abs() < TOL);
    assert_eq!(max.row(0).to_vec(), vec![3.0, 5.0]);
    assert!((mean[[1, 0]] - 2.0).abs() < TOL && (mean[[1, 1]] + 1.0).abs() < TOL);
    // Column 0 at the centre holds {1, 3, -1}: variance 8/3.
    assert!((var[[0, 0]] - 8.0 / 3.0).abs() < TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for v in Variant::ALL {
        let layer = ConvLayer::new(v, 2, 2, &[20, 27, 1], &mut rng);
        let (got, _) = layer.forward(&g, h.view()).unwrap();
        assert!(max_diff(&got, &brute_force(&layer, &g, &h)) < TOL, "{v}");
    }
}
