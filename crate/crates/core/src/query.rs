//! Exploration primitives over a knowledge base: entity search, breadth-first
//! neighborhoods, per-sentence fact graphs, and JSON / DOT export.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{normalize_entity, KnowledgeBase};

pub const DEFAULT_EDGE_CAP: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub key: String,
    pub freq: usize,
    pub surface_forms: Vec<String>,
}

/// Entities whose key contains the normalized term: an exact key first, then
/// by frequency, then by key.
pub fn search_entities(kb: &KnowledgeBase, term: &str) -> Vec<EntityMatch> {
    let needle = normalize_entity(term);
    if needle.is_empty() {
        return Vec::new();
    }
    let mut hits: Vec<(&str, usize)> = kb
        .entity_keys()
        .filter(|k| k.contains(needle.as_str()))
        .map(|k| (k, kb.entity_frequency(k)))
        .collect();
    hits.sort_by(|a, b| {
        (b.0 == needle)
            .cmp(&(a.0 == needle))
            .then_with(|| b.1.cmp(&a.1))
            .then_with(|| a.0.cmp(b.0))
    });
    hits.into_iter()
        .map(|(k, freq)| EntityMatch {
            key: k.to_string(),
            freq,
            surface_forms: kb.surface_forms(k).into_iter().map(|(s, _)| s).collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceRef {
    pub patent: String,
    pub sent: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub key: String,
    pub surface_forms: Vec<String>,
    pub freq: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub head: String,
    pub rel: String,
    pub tail: String,
    /// Distinct patents, sorted.
    pub patents: Vec<String>,
    pub sentences: Vec<SentenceRef>,
    /// Number of supporting records.
    pub count: usize,
}

impl Edge {
    pub fn multiplicity(&self) -> usize {
        self.patents.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub center: Option<String>,
    pub depth: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub truncated: bool,
    #[serde(default)]
    pub empty: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
}

fn group_edges(kb: &KnowledgeBase, ids: impl IntoIterator<Item = usize>) -> Vec<Edge> {
    let mut groups: BTreeMap<(&str, &str, &str), (BTreeSet<&str>, BTreeSet<SentenceRef>, usize)> =
        BTreeMap::new();
    for id in ids {
        let r = &kb.records()[id];
        let g = groups
            .entry((&r.head_key, &r.rel_key, &r.tail_key))
            .or_default();
        g.0.insert(&r.fact.patent);
        g.1.insert(SentenceRef {
            patent: r.fact.patent.clone(),
            sent: r.fact.sent,
        });
        g.2 += 1;
    }
    groups
        .into_iter()
        .map(|((h, r, t), (patents, sentences, count))| Edge {
            head: h.into(),
            rel: r.into(),
            tail: t.into(),
            patents: patents.into_iter().map(String::from).collect(),
            sentences: sentences.into_iter().collect(),
            count,
        })
        .collect()
}

fn nodes_for(kb: &KnowledgeBase, edges: &[Edge], center: Option<&str>) -> Vec<Node> {
    let mut keys: BTreeSet<&str> = edges
        .iter()
        .flat_map(|e| [e.head.as_str(), e.tail.as_str()])
        .collect();
    if let Some(c) = center {
        keys.insert(c);
    }
    keys.into_iter()
        .map(|k| Node {
            key: k.to_string(),
            surface_forms: kb.surface_forms(k).into_iter().map(|(s, _)| s).collect(),
            freq: kb.entity_frequency(k),
        })
        .collect()
}

/// Breadth-first distances from `center` over fact edges in both directions,
/// up to `depth`.
pub fn bfs_distances(kb: &KnowledgeBase, center: &str, depth: usize) -> HashMap<String, usize> {
    let mut dist: HashMap<String, usize> = HashMap::new();
    dist.insert(center.to_string(), 0);
    let mut queue = VecDeque::from([center.to_string()]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == depth {
            continue;
        }
        for &id in kb.entity_records(&u) {
            let r = &kb.records()[id];
            for v in [&r.head_key, &r.tail_key] {
                if !dist.contains_key(v) {
                    dist.insert(v.clone(), d + 1);
                    queue.push_back(v.clone());
                }
            }
        }
    }
    dist
}

/// Facts reached by a breadth-first walk of `depth` steps from the entity:
/// both endpoints within `depth` and at least one within `depth - 1`. When
/// more than `cap` edges result, the most frequent are kept.
pub fn neighborhood(kb: &KnowledgeBase, entity: &str, depth: usize, cap: usize) -> Result<Subgraph> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let key = normalize_entity(entity);
    if !kb.has_entity(&key) {
        return Err(Error::NotFound(format!("entity `{key}`")));
    }
    let dist = bfs_distances(kb, &key, depth);
    let mut ids = BTreeSet::new();
    for (node, &d) in &dist {
        if d >= depth {
            continue;
        }
        for &id in kb.entity_records(node) {
            let r = &kb.records()[id];
            if dist.contains_key(&r.head_key) && dist.contains_key(&r.tail_key) {
                ids.insert(id);
            }
        }
    }
    let mut edges = group_edges(kb, ids);
    let truncated = edges.len() > cap;
    if truncated {
        edges.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| (&a.head, &a.rel, &a.tail).cmp(&(&b.head, &b.rel, &b.tail)))
        });
        edges.truncate(cap);
        edges.sort_by(|a, b| (&a.head, &a.rel, &a.tail).cmp(&(&b.head, &b.rel, &b.tail)));
    }
    Ok(Subgraph {
        nodes: nodes_for(kb, &edges, Some(&key)),
        center: Some(key),
        depth,
        edges,
        truncated,
        empty: false,
        sentence: None,
    })
}

/// All facts extracted from one sentence.
pub fn sentence_graph(kb: &KnowledgeBase, patent: &str, sent: usize) -> Subgraph {
    let ids: Vec<usize> = kb
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.fact.patent == patent && r.fact.sent == sent)
        .map(|(i, _)| i)
        .collect();
    let edges = group_edges(kb, ids);
    Subgraph {
        center: None,
        depth: 0,
        nodes: nodes_for(kb, &edges, None),
        empty: edges.is_empty(),
        edges,
        truncated: false,
        sentence: kb.sentence_text(patent, sent).map(String::from),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(Error::InvalidArgument(format!("unknown export format `{other}`"))),
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export(subgraph: &Subgraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => serde_json::to_string_pretty(subgraph).expect("subgraphs serialize"),
        ExportFormat::Dot => {
            let mut out = String::from("digraph facts {\n");
            out.push_str("  // an edge label ending in [id] names the only patent it was found in\n");
            for n in &subgraph.nodes {
                let _ = writeln!(out, "  \"{}\";", dot_escape(&n.key));
            }
            for e in &subgraph.edges {
                let mut label = e.rel.clone();
                if e.multiplicity() == 1 {
                    if !label.is_empty() {
                        label.push(' ');
                    }
                    let _ = write!(label, "[{}]", e.patents[0]);
                }
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{}\"];",
                    dot_escape(&e.head),
                    dot_escape(&e.tail),
                    dot_escape(&label)
                );
            }
            out.push_str("}\n");
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::Fact;

    fn fact(h: &str, r: &str, t: &str, p: &str, s: usize) -> Fact {
        Fact {
            head: h.into(),
            rel: r.split_whitespace().map(String::from).collect(),
            tail: t.into(),
            patent: p.into(),
            sent: s,
            spans: Default::default(),
        }
    }

    fn kb() -> KnowledgeBase {
        KnowledgeBase::from_facts([
            fact("the fan", "drives", "the air", "P1", 0),
            fact("the fan", "has", "a blade", "P1", 0),
            fact("a motor", "rotates", "the fan", "P2", 1),
            fact("the fan", "reduces", "pressure drop", "P2", 2),
            fact("a blade", "has", "a tip", "P3", 0),
            fact("a lid", "covers", "a box", "P3", 1),
            fact("the inlet pressure drop", "of", "the duct", "P3", 2),
        ])
    }

    #[test]
    fn search() {
        let kb = kb();
        let hits = search_entities(&kb, "pressure drop");
        assert_eq!(hits[0].key, "pressure drop");
        assert_eq!(hits.len(), 2);
        assert!(search_entities(&kb, "turbine").is_empty());
        assert_eq!(search_entities(&kb, "The fan")[0].key, "fan");
    }

    #[test]
    fn neighborhoods() {
        let kb = kb();
        let g1 = neighborhood(&kb, "fan", 1, DEFAULT_EDGE_CAP).unwrap();
        assert_eq!(g1.edges.len(), 4);
        let g2 = neighborhood(&kb, "fan", 2, DEFAULT_EDGE_CAP).unwrap();
        assert_eq!(g2.edges.len(), 5);
        for e in &g1.edges {
            assert!(g2.edges.contains(e));
        }
        let lid = neighborhood(&kb, "lid", 1, 200).unwrap();
        assert_eq!(lid.nodes.len(), 2);
        assert!(matches!(neighborhood(&kb, "turbine", 1, 200), Err(Error::NotFound(_))));
        assert!(neighborhood(&kb, "fan", 0, 200).is_err());
        let capped = neighborhood(&kb, "fan", 1, 2).unwrap();
        assert!(capped.truncated);
        assert_eq!(capped.edges.len(), 2);
    }

    #[test]
    fn isolated_entity_is_single_node() {
        let kb = KnowledgeBase::from_facts([fact("a cap", "", "a cap", "P", 0)]);
        let g = neighborhood(&kb, "cap", 1, 200).unwrap();
        assert_eq!(g.nodes.len(), 1);
    }

    #[test]
    fn sentence_graphs() {
        let mut kb = kb();
        kb.set_sentence_text("P1", 0, "The fan has a blade and drives the air.");
        let g = sentence_graph(&kb, "P1", 0);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.nodes.len(), 3);
        assert!(g.sentence.is_some());
        let one = sentence_graph(&kb, "P2", 1);
        assert_eq!((one.nodes.len(), one.edges.len()), (2, 1));
        assert!(sentence_graph(&kb, "P9", 0).empty);
    }

    #[test]
    fn exports() {
        let empty = Subgraph::default();
        assert_eq!(export(&empty, ExportFormat::Dot), "digraph facts {\n  // an edge label ending in [id] names the only patent it was found in\n}\n");
        let v: serde_json::Value = serde_json::from_str(&export(&empty, ExportFormat::Json)).unwrap();
        assert!(v["edges"].as_array().unwrap().is_empty());
        let g = sentence_graph(&kb(), "P2", 1);
        let dot = export(&g, ExportFormat::Dot);
        assert!(dot.contains("\"motor\" -> \"fan\" [label=\"rotates [P2]\"];"));
        assert_eq!(dot, export(&g, ExportFormat::Dot));
    }
}
