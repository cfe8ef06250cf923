//! Sentence graphs for edge classification: entity and relation nodes joined
//! by token dependencies, with labelled candidate edges for one link type.

use std::collections::BTreeSet;

use facta_core::embed::{entity_embedding, TokenEmbedder};
use facta_core::lingo::{dep_index, pos_index, AnnotatedSentence};
use facta_core::tagger::sentence_seed;
use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{Graph, GraphEdge, N_EDGE_LABELS};
use crate::pairwise::{
    associated_pairs, gold_links, negative_pool, sentence_nodes, token_edges, GraphNode, LinkType, NodeKind, EMB_DIM,
    POS_DIM,
};

/// `[emb 128 | pos 50 | node kind 2]`.
pub const NODE_DIM: usize = EMB_DIM + POS_DIM + 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub u: usize,
    pub v: usize,
    pub link: LinkType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceGraph {
    pub id: Option<(String, usize)>,
    pub nodes: Vec<GraphNode>,
    pub features: Array2<f64>,
    /// Structural edges in both directions plus a self-loop per node.
    pub graph: Graph,
    pub candidates: Vec<Candidate>,
}

impl SentenceGraph {
    pub fn n_nodes(&self) -> usize {
        self.graph.n
    }

    /// Binary targets: 1 for a typed link, 0 for `NIL`.
    pub fn targets(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| usize::from(c.link != LinkType::Nil)).collect()
    }
}

pub fn node_features(sentence: &AnnotatedSentence, node: &GraphNode, provider: &dyn TokenEmbedder) -> Result<Vec<f64>> {
    let tokens: Vec<&str> = sentence.tokens[node.span.start..=node.span.end].iter().map(|t| t.text.as_str()).collect();
    let pos_tag = &sentence.tokens[node.root].pos;
    let pos = pos_index(pos_tag).ok_or_else(|| Error::InvalidArgument(format!("unknown POS `{pos_tag}`")))?;
    let mut out = entity_embedding(provider, &tokens)?;
    if out.len() != EMB_DIM {
        return Err(Error::Dimension(format!("embedding dim {}, expected {EMB_DIM}", out.len())));
    }
    out.resize(NODE_DIM, 0.0);
    out[EMB_DIM + pos] = 1.0;
    out[EMB_DIM + POS_DIM + usize::from(node.kind == NodeKind::Relation)] = 1.0;
    Ok(out)
}

/// Token edges lifted to nodes. Edges inside one node or touching a token
/// that is not part of any node are dropped.
fn structural_edges(sentence: &AnnotatedSentence, token_node: &[Option<usize>]) -> Result<Vec<GraphEdge>> {
    let mut set = BTreeSet::new();
    for e in token_edges(sentence) {
        let label = dep_index(&e.label).ok_or_else(|| Error::InvalidArgument(format!("unknown dependency `{}`", e.label)))?;
        let (Some(Some(a)), Some(Some(b))) = (token_node.get(e.head), token_node.get(e.dependent)) else {
            continue;
        };
        if a != b {
            set.insert(GraphEdge { src: *a, dst: *b, label });
            set.insert(GraphEdge { src: *b, dst: *a, label });
        }
    }
    Ok(set.into_iter().collect())
}

/// The graph for one target link type, or `None` when the sentence has no
/// gold link of that type. Candidates are every such link plus as many
/// seeded `NIL` pairs of the same node kinds.
pub fn sentence_to_graph(
    sentence: &AnnotatedSentence,
    target: LinkType,
    provider: &dyn TokenEmbedder,
    seed: u64,
) -> Result<Option<SentenceGraph>> {
    if target == LinkType::Nil {
        return Err(Error::InvalidArgument("target must be a typed link".into()));
    }
    let nodes = sentence_nodes(sentence);
    let mut candidates: Vec<Candidate> = gold_links(sentence, &nodes)
        .into_iter()
        .filter(|l| l.ty == target)
        .map(|l| Candidate { u: l.a, v: l.b, link: l.ty })
        .collect();
    if candidates.is_empty() {
        return Ok(None);
    }
    let pool = negative_pool(&nodes, &associated_pairs(sentence, &nodes), target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, pool.len(), candidates.len().min(pool.len())).into_vec();
    picked.sort_unstable();
    candidates.extend(picked.into_iter().map(|k| Candidate {
        u: pool[k].0,
        v: pool[k].1,
        link: LinkType::Nil,
    }));

    let mut features = Array2::zeros((nodes.nodes.len(), NODE_DIM));
    for (i, node) in nodes.nodes.iter().enumerate() {
        let f = node_features(sentence, node, provider)?;
        features.row_mut(i).assign(&ndarray::ArrayView1::from(&f));
    }
    let graph = Graph::with_self_loops(nodes.nodes.len(), structural_edges(sentence, &nodes.token_node)?)?;
    Ok(Some(SentenceGraph {
        id: sentence.id.clone(),
        nodes: nodes.nodes,
        features,
        graph,
        candidates,
    }))
}

/// Graphs for every sentence that has a link of the target type.
pub fn corpus_graphs(
    corpus: &[AnnotatedSentence],
    target: LinkType,
    provider: &dyn TokenEmbedder,
    seed: u64,
) -> Result<Vec<SentenceGraph>> {
    let mut out = Vec::new();
    for (i, s) in corpus.iter().enumerate() {
        out.extend(sentence_to_graph(s, target, provider, sentence_seed(seed, i))?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSetStats {
    pub graphs: usize,
    pub nodes: usize,
    pub candidate_edges: usize,
    pub positive_edges: usize,
}

pub fn graph_stats(graphs: &[SentenceGraph]) -> GraphSetStats {
    GraphSetStats {
        graphs: graphs.len(),
        nodes: graphs.iter().map(|g| g.n_nodes()).sum(),
        candidate_edges: graphs.iter().map(|g| g.candidates.len()).sum(),
        positive_edges: graphs.iter().flat_map(|g| &g.candidates).filter(|c| c.link != LinkType::Nil).count(),
    }
}

/// Random graphs whose candidate label is 1 exactly when the two endpoints
/// have different node kinds. Features are random apart from the kind bits.
pub fn planted_graphs(n_graphs: usize, seed: u64) -> Vec<SentenceGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_graphs).map(|_| planted_graph(&mut rng)).collect()
}

fn planted_graph(rng: &mut ChaCha8Rng) -> SentenceGraph {
    let n = rng.random_range(4..=10);
    let kinds: Vec<NodeKind> = (0..n)
        .map(|_| if rng.random_bool(0.5) { NodeKind::Entity } else { NodeKind::Relation })
        .collect();
    let mut features = Array2::zeros((n, NODE_DIM));
    for (i, kind) in kinds.iter().enumerate() {
        let mut row = features.row_mut(i);
        let mut norm = 0.0;
        for j in 0..EMB_DIM {
            let x: f64 = StandardNormal.sample(rng);
            row[j] = x;
            norm += x * x;
        }
        for j in 0..EMB_DIM {
            row[j] /= norm.sqrt();
        }
        row[EMB_DIM + rng.random_range(0..POS_DIM)] = 1.0;
        row[EMB_DIM + POS_DIM + usize::from(*kind == NodeKind::Relation)] = 1.0;
    }
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        let label = rng.random_range(2..N_EDGE_LABELS);
        edges.insert(GraphEdge { src: u, dst: v, label });
        edges.insert(GraphEdge { src: v, dst: u, label });
    }
    let mut candidates = Vec::new();
    let mut seen = BTreeSet::new();
    let m = rng.random_range(2..=n);
    while candidates.len() < m {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u == v || !seen.insert((u, v)) {
            continue;
        }
        let link = if kinds[u] != kinds[v] { LinkType::EntRel } else { LinkType::Nil };
        candidates.push(Candidate { u, v, link });
    }
    let nodes = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| GraphNode {
            kind,
            span: facta_core::lingo::Span::new(i, i),
            root: i,
            text: format!("n{i}"),
        })
        .collect();
    SentenceGraph {
        id: None,
        nodes,
        features,
        graph: Graph::with_self_loops(n, edges.into_iter().collect()).expect("planted edges in range"),
        candidates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use facta_core::embed::HashEmbedder;
    use facta_core::lingo::parse_readable_annotations;
    use std::path::Path;

    #[test]
    fn no_graph_without_target_links() {
        let s = parse_readable_annotations("the fan drives the rotor\n  the fan | drives | the rotor\n", Path::new("x"))
            .unwrap()
            .remove(0);
        let p = HashEmbedder::default();
        assert!(sentence_to_graph(&s, LinkType::RelRel, &p, 0).unwrap().is_none());
        let g = sentence_to_graph(&s, LinkType::EntRel, &p, 0).unwrap().unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.features.ncols(), NODE_DIM);
        for row in g.features.rows() {
            assert_eq!(row.slice(ndarray::s![EMB_DIM..EMB_DIM + POS_DIM]).sum(), 1.0);
            assert_eq!(row.slice(ndarray::s![EMB_DIM + POS_DIM..]).sum(), 1.0);
        }
        assert!((0..3).all(|v| g.graph.incoming(v).iter().any(|&e| g.graph.edges[e].src == v)));
    }

    #[test]
    fn planted_labels_follow_the_rule() {
        for g in planted_graphs(50, 3) {
            for c in &g.candidates {
                assert_eq!(c.link != LinkType::Nil, g.nodes[c.u].kind != g.nodes[c.v].kind);
                let bit = |i: usize| g.features[[i, EMB_DIM + POS_DIM + 1]];
                assert_eq!(c.link != LinkType::Nil, bit(c.u) != bit(c.v));
            }
        }
    }
}
