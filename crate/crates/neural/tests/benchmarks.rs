use std::path::PathBuf;
use std::time::Instant;

use facta_core::embed::HashEmbedder;
use facta_core::lingo::{load_readable_annotations, AnnotatedSentence};
use facta_core::synth::synthetic_corpus;
use facta_neural::dense::{mlp_train, stack_rows, MlpConfig};
use facta_neural::edge::{edge_classifier_train, GnnConfig};
use facta_neural::gnn::Variant;
use facta_neural::graphs::{corpus_graphs, graph_stats, planted_graphs, sentence_to_graph};
use facta_neural::pairwise::{gold_links, link_counts, sample_pairwise_dataset, sentence_nodes, LinkType, PAIR_DIM};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn fixture() -> Vec<AnnotatedSentence> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/annotated.txt");
    load_readable_annotations(path).unwrap()
}

#[test]
fn pairwise_datasets_are_twice_the_positives() {
    let corpus = fixture();
    let p = HashEmbedder::default();
    let counts = link_counts(&corpus);
    for (ty, n) in counts {
        let ds = sample_pairwise_dataset(&corpus, ty, &p, 3).unwrap();
        assert_eq!(ds.positives, n, "{ty}");
        assert_eq!(ds.examples.iter().filter(|e| e.label == 1).count(), ds.positives);
        assert_eq!(ds.examples.iter().filter(|e| e.label == 0).count(), ds.negatives);
        assert_eq!(ds.negatives + ds.shortfall, ds.positives);
        if ds.shortfall == 0 {
            assert_eq!(ds.examples.len(), 2 * n, "{ty}");
        }
        for e in &ds.examples {
            assert_eq!(e.features.len(), PAIR_DIM);
            let ty_seg = &e.features[PAIR_DIM - 4..];
            assert_eq!(ty_seg.iter().sum::<f64>(), 1.0);
            assert_eq!(ty_seg[ty.slot().unwrap()], 1.0);
        }
    }
    assert!(counts.iter().all(|(_, n)| *n > 0), "{counts:?}");
}

#[test]
fn negatives_share_no_fact_and_are_seeded() {
    let corpus = synthetic_corpus(300, 5);
    let p = HashEmbedder::default();
    let a = sample_pairwise_dataset(&corpus, LinkType::EntRel, &p, 1).unwrap();
    let b = sample_pairwise_dataset(&corpus, LinkType::EntRel, &p, 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.negatives + a.shortfall, a.positives);
    assert!(a.negatives > 0);
    for e in a.examples.iter().filter(|e| e.label == 0) {
        let s = &corpus[e.sentence];
        let nodes = sentence_nodes(s);
        let (na, nb) = (&nodes.nodes[e.a], &nodes.nodes[e.b]);
        for f in &s.facts {
            let mentions = |n: &facta_neural::pairwise::GraphNode| {
                f.head == n.span || f.tail == n.span || f.relation.iter().any(|&i| n.span.contains(i))
            };
            assert!(!(mentions(na) && mentions(nb)));
        }
    }
}

#[test]
fn single_type_corpus_leaves_other_types_empty() {
    // Only compound facts: entity to entity links.
    let text = "brush members 4 a\n  brush members | | 4 a\n";
    let corpus = facta_core::lingo::parse_readable_annotations(text, std::path::Path::new("x")).unwrap();
    let p = HashEmbedder::default();
    for ty in [LinkType::EntRel, LinkType::RelRel, LinkType::RelEnt] {
        assert!(sample_pairwise_dataset(&corpus, ty, &p, 0).unwrap().examples.is_empty());
    }
    assert_eq!(sample_pairwise_dataset(&corpus, LinkType::EntEnt, &p, 0).unwrap().positives, 1);
}

#[test]
fn table_three_totals_are_twice_the_link_counts() {
    for (links, total) in [(2_071, 4_142), (163_552, 327_104), (84_550, 169_100), (181_361, 362_722)] {
        assert_eq!(2 * links, total);
    }
}

/// Planted hyperplane in 400 dimensions with a margin.
fn separable(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..PAIR_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let x: Vec<f64> = (0..PAIR_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / norm;
        if m.abs() < 1.0 {
            continue;
        }
        labels.push(usize::from(m > 0.0));
        rows.push(x);
    }
    (stack_rows(&rows).unwrap(), labels)
}

#[test]
fn mlp_separates_planted_data() {
    let start = Instant::now();
    let (x, y) = separable(3000, 7);
    let (_, report) = mlp_train(&x, &y, &MlpConfig::default()).unwrap();
    println!("perfect at epoch {:?}, test {:.4}, {:.1}s", report.perfect_at, report.test_accuracy, start.elapsed().as_secs_f64());
    assert_eq!(report.test_accuracy, 1.0);
    assert!(report.perfect_at.is_some_and(|e| e <= 200));
    assert!(report.final_loss() < report.losses[0]);
}

#[test]
fn figure_eight_relrel_candidate() {
    let corpus = fixture();
    let s = corpus.iter().find(|s| s.text().starts_with("The space provided between")).unwrap();
    let g = sentence_to_graph(s, LinkType::RelRel, &HashEmbedder::default(), 0).unwrap().unwrap();
    assert!(g
        .candidates
        .iter()
        .any(|c| c.link == LinkType::RelRel && g.nodes[c.u].text == "provided" && g.nodes[c.v].text == "between"));
    let nodes = sentence_nodes(s);
    let ent_ent: Vec<_> = gold_links(s, &nodes).into_iter().filter(|l| l.ty == LinkType::EntEnt).collect();
    assert_eq!(ent_ent.len(), 1);
    assert_eq!(nodes.nodes[ent_ent[0].a].text, "brush members");
    assert_eq!(nodes.nodes[ent_ent[0].b].text, "4 a");
}

#[test]
fn one_graph_per_sentence_with_target_links() {
    let corpus = synthetic_corpus(400, 8);
    let p = HashEmbedder::default();
    for ty in LinkType::POSITIVE {
        let graphs = corpus_graphs(&corpus, ty, &p, 1).unwrap();
        let expected = corpus
            .iter()
            .filter(|s| gold_links(s, &sentence_nodes(s)).iter().any(|l| l.ty == ty))
            .count();
        assert_eq!(graphs.len(), expected, "{ty}");
        let st = graph_stats(&graphs);
        let links = link_counts(&corpus)[ty.slot().unwrap()].1;
        assert_eq!(st.positive_edges, links);
        // Negatives never outnumber positives, and match them when the pool allows.
        for g in &graphs {
            let pos = g.candidates.iter().filter(|c| c.link != LinkType::Nil).count();
            assert!(g.candidates.len() - pos <= pos);
        }
    }
}

#[test]
fn planted_rule_is_learned_by_rgcn() {
    let start = Instant::now();
    let graphs = planted_graphs(1500, 4);
    let cfg = GnnConfig {
        variant: Variant::Rgcn,
        nodes_per_batch: 200,
        seed: 1,
        ..Default::default()
    };
    let (_, r) = edge_classifier_train(&graphs, &cfg).unwrap();
    println!("rgcn {:.3} on {} test edges, {:.1}s", r.test_accuracy, r.test_edges, start.elapsed().as_secs_f64());
    assert!(r.test_accuracy >= 0.95, "{r:?}");
}

#[test]
fn every_variant_trains_on_planted_graphs() {
    let graphs = planted_graphs(600, 9);
    for v in Variant::ALL {
        let cfg = GnnConfig {
            variant: v,
            hidden: 16,
            epochs: 3,
            nodes_per_batch: 200,
            ..Default::default()
        };
        let (_, r) = edge_classifier_train(&graphs, &cfg).unwrap();
        println!("{v}: loss {:.3} accuracy {:.3}", r.test_loss, r.test_accuracy);
        assert!(r.losses.iter().all(|l| l.is_finite()));
        assert!(r.test_edges > 0);
    }
}
