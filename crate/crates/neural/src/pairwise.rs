//! Link types between the entities and relation tokens of a sentence, the
//! 400-d pair features and the balanced pairwise datasets.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use facta_core::embed::{entity_embedding, TokenEmbedder};
use facta_core::lingo::{adjacency_edges, dep_index, pos_index, AnnotatedSentence, DependencyEdge, Span, DEP_LABELS, POS_TAGS};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMB_DIM: usize = facta_core::embed::DEFAULT_DIM;
pub const POS_DIM: usize = POS_TAGS.len();
pub const DEP_DIM: usize = DEP_LABELS.len();
pub const TYPE_DIM: usize = 4;
/// One side of a pair: embedding then POS.
pub const ITEM_DIM: usize = EMB_DIM + POS_DIM;
pub const PAIR_DIM: usize = 2 * ITEM_DIM + DEP_DIM + TYPE_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinkType {
    EntEnt,
    EntRel,
    RelRel,
    RelEnt,
    Nil,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Entity,
    Relation,
}

impl LinkType {
    pub const POSITIVE: [LinkType; 4] = [LinkType::EntEnt, LinkType::EntRel, LinkType::RelRel, LinkType::RelEnt];

    pub fn as_str(self) -> &'static str {
        match self {
            LinkType::EntEnt => "ENTENT",
            LinkType::EntRel => "ENTREL",
            LinkType::RelRel => "RELREL",
            LinkType::RelEnt => "RELENT",
            LinkType::Nil => "NIL",
        }
    }

    /// Slot in the 4-wide type segment; `None` for `NIL`.
    pub fn slot(self) -> Option<usize> {
        LinkType::POSITIVE.iter().position(|t| *t == self)
    }

    /// Node kinds at the two ends of a link of this type.
    pub fn kinds(self) -> Option<(NodeKind, NodeKind)> {
        use NodeKind::{Entity, Relation};
        match self {
            LinkType::EntEnt => Some((Entity, Entity)),
            LinkType::EntRel => Some((Entity, Relation)),
            LinkType::RelRel => Some((Relation, Relation)),
            LinkType::RelEnt => Some((Relation, Entity)),
            LinkType::Nil => None,
        }
    }
}

impl fmt::Display for LinkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [LinkType::EntEnt, LinkType::EntRel, LinkType::RelRel, LinkType::RelEnt, LinkType::Nil]
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown link type `{s}`")))
    }
}

/// An entity span or a single relation token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: NodeKind,
    pub span: Span,
    /// Token whose POS and dependencies stand for the node.
    pub root: usize,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceNodes {
    /// Ordered by position in the sentence.
    pub nodes: Vec<GraphNode>,
    pub token_node: Vec<Option<usize>>,
}

impl SentenceNodes {
    pub fn of_token(&self, i: usize) -> Option<usize> {
        self.token_node.get(i).copied().flatten()
    }
}

fn entity_root(sentence: &AnnotatedSentence, span: Span) -> usize {
    (span.start..=span.end)
        .rev()
        .find(|&i| sentence.tokens[i].pos.starts_with("NN"))
        .unwrap_or(span.end)
}

/// Nodes of a sentence: the entity spans of its facts and every relation
/// token outside those spans.
pub fn sentence_nodes(sentence: &AnnotatedSentence) -> SentenceNodes {
    let entities = sentence.entity_spans();
    let mut token_node = vec![None; sentence.tokens.len()];
    let mut items: Vec<(Span, NodeKind)> = entities.iter().map(|s| (*s, NodeKind::Entity)).collect();
    let rel: BTreeSet<usize> = sentence.facts.iter().flat_map(|f| f.relation.iter().copied()).collect();
    for i in rel {
        if !entities.iter().any(|s| s.contains(i)) {
            items.push((Span::new(i, i), NodeKind::Relation));
        }
    }
    items.sort();
    let mut nodes = Vec::with_capacity(items.len());
    for (span, kind) in items {
        // Overlapping entity spans keep the first claim on a token.
        for t in span.start..=span.end {
            token_node[t].get_or_insert(nodes.len());
        }
        let root = match kind {
            NodeKind::Entity => entity_root(sentence, span),
            NodeKind::Relation => span.start,
        };
        nodes.push(GraphNode {
            kind,
            span,
            root,
            text: span.text(&sentence.tokens),
        });
    }
    SentenceNodes { nodes, token_node }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub ty: LinkType,
}

fn node_of_span(nodes: &SentenceNodes, span: Span) -> Option<usize> {
    nodes.nodes.iter().position(|n| n.span == span)
}

/// The links every gold fact implies: head to first relation token, between
/// consecutive relation tokens, last relation token to tail, and head to
/// tail when the relation is empty.
pub fn gold_links(sentence: &AnnotatedSentence, nodes: &SentenceNodes) -> Vec<Link> {
    let mut out = BTreeSet::new();
    for f in &sentence.facts {
        let (Some(h), Some(t)) = (node_of_span(nodes, f.head), node_of_span(nodes, f.tail)) else {
            continue;
        };
        let rel: Vec<usize> = f.relation.iter().filter_map(|&i| nodes.of_token(i)).filter(|&n| n != h && n != t).collect();
        if rel.is_empty() {
            if f.relation.is_empty() && h != t {
                out.insert(Link { a: h, b: t, ty: LinkType::EntEnt });
            }
            continue;
        }
        out.insert(Link { a: h, b: rel[0], ty: LinkType::EntRel });
        for w in rel.windows(2) {
            if w[0] != w[1] {
                out.insert(Link { a: w[0], b: w[1], ty: LinkType::RelRel });
            }
        }
        out.insert(Link { a: rel[rel.len() - 1], b: t, ty: LinkType::RelEnt });
    }
    out.into_iter().collect()
}

/// Unordered node pairs that appear together in at least one fact.
pub fn associated_pairs(sentence: &AnnotatedSentence, nodes: &SentenceNodes) -> HashSet<(usize, usize)> {
    let mut out = HashSet::new();
    for f in &sentence.facts {
        let mut members: BTreeSet<usize> = f.relation.iter().filter_map(|&i| nodes.of_token(i)).collect();
        members.extend(node_of_span(nodes, f.head));
        members.extend(node_of_span(nodes, f.tail));
        for &a in &members {
            for &b in &members {
                if a < b {
                    out.insert((a, b));
                }
            }
        }
    }
    out
}

/// Ordered pairs whose node kinds match `ty` and that share no fact.
pub fn negative_pool(nodes: &SentenceNodes, associated: &HashSet<(usize, usize)>, ty: LinkType) -> Vec<(usize, usize)> {
    let Some((ka, kb)) = ty.kinds() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (a, na) in nodes.nodes.iter().enumerate() {
        for (b, nb) in nodes.nodes.iter().enumerate() {
            if a != b && na.kind == ka && nb.kind == kb && !associated.contains(&(a.min(b), a.max(b))) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Token-level structure: the sentence's dependencies, or adjacency edges
/// when it has none.
pub fn token_edges(sentence: &AnnotatedSentence) -> Vec<DependencyEdge> {
    if sentence.deps.is_empty() {
        adjacency_edges(&sentence.tokens)
    } else {
        sentence.deps.clone()
    }
}

/// Label of the token edge joining the two roots, `NIL` if none.
pub fn dep_between(edges: &[DependencyEdge], a: usize, b: usize) -> &str {
    edges
        .iter()
        .find(|e| (e.head == a && e.dependent == b) || (e.head == b && e.dependent == a))
        .map_or("NIL", |e| e.label.as_str())
}

/// One side of a pair.
pub struct PairItem<'a> {
    pub tokens: Vec<&'a str>,
    pub pos: &'a str,
}

impl<'a> PairItem<'a> {
    pub fn of_node(sentence: &'a AnnotatedSentence, node: &GraphNode) -> Self {
        PairItem {
            tokens: sentence.tokens[node.span.start..=node.span.end].iter().map(|t| t.text.as_str()).collect(),
            pos: &sentence.tokens[node.root].pos,
        }
    }
}

pub fn one_hot(n: usize, slot: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[slot] = 1.0;
    v
}

fn push_item(out: &mut Vec<f64>, item: &PairItem, provider: &dyn TokenEmbedder) -> Result<()> {
    if provider.dim() != EMB_DIM {
        return Err(Error::Dimension(format!("embedding dim {}, expected {EMB_DIM}", provider.dim())));
    }
    let pos = pos_index(item.pos).ok_or_else(|| Error::InvalidArgument(format!("unknown POS `{}`", item.pos)))?;
    out.extend(entity_embedding(provider, &item.tokens)?);
    out.extend(one_hot(POS_DIM, pos));
    Ok(())
}

/// `[emb a | pos a | emb b | pos b | dep | type]`, 400 values.
pub fn build_pair_features(
    a: &PairItem,
    b: &PairItem,
    link_type: LinkType,
    dep_label: &str,
    provider: &dyn TokenEmbedder,
) -> Result<Vec<f64>> {
    let ty = link_type
        .slot()
        .ok_or_else(|| Error::InvalidArgument("NIL has no type slot".into()))?;
    let dep = dep_index(dep_label).ok_or_else(|| Error::InvalidArgument(format!("unknown dependency `{dep_label}`")))?;
    let mut out = Vec::with_capacity(PAIR_DIM);
    push_item(&mut out, a, provider)?;
    push_item(&mut out, b, provider)?;
    out.extend(one_hot(DEP_DIM, dep));
    out.extend(one_hot(TYPE_DIM, ty));
    debug_assert_eq!(out.len(), PAIR_DIM);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairExample {
    pub features: Vec<f64>,
    pub label: usize,
    pub link_type: LinkType,
    pub sentence: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDataset {
    pub link_type: LinkType,
    /// Positives and negatives, shuffled.
    pub examples: Vec<PairExample>,
    pub positives: usize,
    pub negatives: usize,
    /// Negatives that could not be drawn because the pool ran out.
    pub shortfall: usize,
}

fn pair_example(
    sentence: &AnnotatedSentence,
    nodes: &SentenceNodes,
    edges: &[DependencyEdge],
    (a, b): (usize, usize),
    link_type: LinkType,
    label: usize,
    index: usize,
    provider: &dyn TokenEmbedder,
) -> Result<PairExample> {
    let (na, nb) = (&nodes.nodes[a], &nodes.nodes[b]);
    let features = build_pair_features(
        &PairItem::of_node(sentence, na),
        &PairItem::of_node(sentence, nb),
        link_type,
        dep_between(edges, na.root, nb.root),
        provider,
    )?;
    Ok(PairExample {
        features,
        label,
        link_type,
        sentence: index,
        a,
        b,
    })
}

/// All gold links of one type plus as many negatives drawn uniformly from
/// same-kind pairs that share no fact, across the whole corpus.
pub fn sample_pairwise_dataset(
    corpus: &[AnnotatedSentence],
    link_type: LinkType,
    provider: &dyn TokenEmbedder,
    seed: u64,
) -> Result<PairwiseDataset> {
    if link_type == LinkType::Nil {
        return Err(Error::InvalidArgument("NIL is the negative label, not a dataset".into()));
    }
    let mut examples = Vec::new();
    let mut pool: Vec<(usize, usize, usize)> = Vec::new();
    let mut prepared = Vec::with_capacity(corpus.len());
    for (i, s) in corpus.iter().enumerate() {
        let nodes = sentence_nodes(s);
        let edges = token_edges(s);
        for l in gold_links(s, &nodes).into_iter().filter(|l| l.ty == link_type) {
            examples.push(pair_example(s, &nodes, &edges, (l.a, l.b), link_type, 1, i, provider)?);
        }
        let assoc = associated_pairs(s, &nodes);
        pool.extend(negative_pool(&nodes, &assoc, link_type).into_iter().map(|(a, b)| (i, a, b)));
        prepared.push((nodes, edges));
    }
    let positives = examples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = positives.min(pool.len());
    let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), take).into_vec();
    picked.sort_unstable();
    for k in picked {
        let (i, a, b) = pool[k];
        let (nodes, edges) = &prepared[i];
        examples.push(pair_example(&corpus[i], nodes, edges, (a, b), link_type, 0, i, provider)?);
    }
    examples.shuffle(&mut rng);
    Ok(PairwiseDataset {
        link_type,
        positives,
        negatives: take,
        shortfall: positives - take,
        examples,
    })
}

/// Per-type link counts over a corpus.
pub fn link_counts(corpus: &[AnnotatedSentence]) -> [(LinkType, usize); 4] {
    let mut counts = LinkType::POSITIVE.map(|t| (t, 0));
    for s in corpus {
        let nodes = sentence_nodes(s);
        for l in gold_links(s, &nodes) {
            counts[l.ty.slot().expect("gold links are typed")].1 += 1;
        }
    }
    counts
}
