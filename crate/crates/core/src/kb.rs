//! A provenance-tracked fact store with entity and relation indexes, corpus
//! statistics and JSONL persistence.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::Fact;

pub const KB_VERSION: u64 = 1;

const DETERMINERS: [&str; 4] = ["a", "an", "the", "said"];

/// Index key of an entity: lowercase, single spaces, leading determiners
/// removed (unless nothing else is left).
pub fn normalize_entity(text: &str) -> String {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let mut start = 0;
    while start + 1 < words.len() && DETERMINERS.contains(&words[start]) {
        start += 1;
    }
    words[start..].join(" ")
}

pub fn normalize_relation(rel: &[String]) -> String {
    rel.iter()
        .flat_map(|r| r.split_whitespace())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactRecord {
    pub fact: Fact,
    pub head_key: String,
    pub rel_key: String,
    pub tail_key: String,
}

impl FactRecord {
    pub fn new(fact: Fact) -> Self {
        FactRecord {
            head_key: normalize_entity(&fact.head),
            rel_key: normalize_relation(&fact.rel),
            tail_key: normalize_entity(&fact.tail),
            fact,
        }
    }

    fn dedup_key(&self) -> (String, String, String, String, usize) {
        (
            self.head_key.clone(),
            self.rel_key.clone(),
            self.tail_key.clone(),
            self.fact.patent.clone(),
            self.fact.sent,
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KbStats {
    pub n_patents: usize,
    pub n_sentences: usize,
    pub n_facts: usize,
    pub n_unique_entities: usize,
    pub n_unique_relationships: usize,
    /// Facts per sentence, over sentences with at least one fact.
    pub avg_facts_per_sentence: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationGroup {
    pub relation: String,
    pub multiplicity: usize,
    pub patents: Vec<String>,
    pub records: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Indexes {
    entities: HashMap<String, Vec<usize>>,
    relations: HashMap<String, Vec<usize>>,
}

impl Indexes {
    fn add(&mut self, id: usize, r: &FactRecord) {
        self.entities.entry(r.head_key.clone()).or_default().push(id);
        if r.tail_key != r.head_key {
            self.entities.entry(r.tail_key.clone()).or_default().push(id);
        }
        self.relations.entry(r.rel_key.clone()).or_default().push(id);
    }
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    records: Vec<FactRecord>,
    seen: HashMap<(String, String, String, String, usize), usize>,
    index: Indexes,
    sentences: HashMap<(String, usize), String>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Self {
        let mut kb = Self::new();
        for f in facts {
            kb.insert(f);
        }
        kb
    }

    /// Insert a fact; a repeated (head, relation, tail, patent, sentence)
    /// key returns the existing record id.
    pub fn insert(&mut self, fact: Fact) -> usize {
        let record = FactRecord::new(fact);
        let key = record.dedup_key();
        if let Some(&id) = self.seen.get(&key) {
            return id;
        }
        let id = self.records.len();
        self.index.add(id, &record);
        self.seen.insert(key, id);
        self.records.push(record);
        id
    }

    /// Remember the text of a source sentence for drill-down views.
    pub fn set_sentence_text(&mut self, patent: &str, sent: usize, text: impl Into<String>) {
        self.sentences.insert((patent.to_string(), sent), text.into());
    }

    pub fn sentence_text(&self, patent: &str, sent: usize) -> Option<&str> {
        self.sentences.get(&(patent.to_string(), sent)).map(String::as_str)
    }

    pub fn records(&self) -> &[FactRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn entity_records(&self, key: &str) -> &[usize] {
        self.index.entities.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn relation_records(&self, key: &str) -> &[usize] {
        self.index.relations.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn has_entity(&self, key: &str) -> bool {
        self.index.entities.contains_key(key)
    }

    pub fn entity_keys(&self) -> impl Iterator<Item = &str> {
        self.index.entities.keys().map(String::as_str)
    }

    /// Number of records mentioning the entity.
    pub fn entity_frequency(&self, key: &str) -> usize {
        self.entity_records(key).len()
    }

    /// Surface forms of an entity with their counts, most frequent first.
    pub fn surface_forms(&self, key: &str) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &id in self.entity_records(key) {
            let r = &self.records[id];
            if r.head_key == key {
                *counts.entry(&r.fact.head).or_default() += 1;
            }
            if r.tail_key == key {
                *counts.entry(&r.fact.tail).or_default() += 1;
            }
        }
        let mut v: Vec<(String, usize)> = counts.into_iter().map(|(s, c)| (s.to_string(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    pub fn stats(&self) -> KbStats {
        let mut patents = HashSet::new();
        let mut sentences = HashSet::new();
        for r in &self.records {
            patents.insert(r.fact.patent.as_str());
            sentences.insert((r.fact.patent.as_str(), r.fact.sent));
        }
        let n_unique_relationships = self.index.relations.keys().filter(|k| !k.is_empty()).count();
        KbStats {
            n_patents: patents.len(),
            n_sentences: sentences.len(),
            n_facts: self.records.len(),
            n_unique_entities: self.index.entities.len(),
            n_unique_relationships,
            avg_facts_per_sentence: if sentences.is_empty() {
                0.0
            } else {
                self.records.len() as f64 / sentences.len() as f64
            },
        }
    }

    /// Entities with at least `min_tokens` tokens, by record frequency then key.
    pub fn top_entities(&self, min_tokens: usize, k: usize) -> Vec<(String, usize)> {
        let mut v: Vec<(String, usize)> = self
            .index
            .entities
            .iter()
            .filter(|(key, _)| key.split_whitespace().count() >= min_tokens)
            .map(|(key, ids)| (key.clone(), ids.len()))
            .collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }

    /// Relations linking `head` to `tail`, grouped by normalized relation,
    /// with the number of distinct patents each appears in.
    pub fn multi_patent_relations(&self, head: &str, tail: &str) -> Vec<RelationGroup> {
        let (h, t) = (normalize_entity(head), normalize_entity(tail));
        let mut groups: BTreeMap<&str, (BTreeSet<&str>, Vec<usize>)> = BTreeMap::new();
        for &id in self.entity_records(&h) {
            let r = &self.records[id];
            if r.head_key == h && r.tail_key == t {
                let g = groups.entry(&r.rel_key).or_default();
                g.0.insert(&r.fact.patent);
                g.1.push(id);
            }
        }
        groups
            .into_iter()
            .map(|(rel, (patents, records))| RelationGroup {
                relation: rel.to_string(),
                multiplicity: patents.len(),
                patents: patents.into_iter().map(String::from).collect(),
                records,
            })
            .collect()
    }

    /// True when the incremental indexes equal a from-scratch rebuild.
    pub fn indexes_consistent(&self) -> bool {
        let mut fresh = Indexes::default();
        for (id, r) in self.records.iter().enumerate() {
            fresh.add(id, r);
        }
        fresh == self.index
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "{}", serde_json::json!({ "kb_version": KB_VERSION }))?;
        for r in &self.records {
            serde_json::to_writer(&mut w, &r.fact)?;
            w.write_all(b"\n")?;
        }
        let mut texts: Vec<_> = self.sentences.iter().collect();
        texts.sort();
        for ((patent, sent), text) in texts {
            serde_json::to_writer(
                &mut w,
                &SentenceLine {
                    sentence_text: text.clone(),
                    patent: patent.clone(),
                    sent: *sent,
                },
            )?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::with_capacity(1 << 20, fs::File::open(path)?);
        let line_err = |line: usize, message: String| Error::Line {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut kb = KnowledgeBase::new();
        let mut header_seen = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                #[derive(Deserialize)]
                struct Header {
                    kb_version: u64,
                }
                let h: Header = serde_json::from_str(&line)
                    .map_err(|e| line_err(i + 1, format!("bad header: {e}")))?;
                if h.kb_version != KB_VERSION {
                    return Err(Error::Version {
                        found: h.kb_version,
                        expected: KB_VERSION,
                    });
                }
                header_seen = true;
                continue;
            }
            let entry: Line = serde_json::from_str(&line).map_err(|e| line_err(i + 1, e.to_string()))?;
            match entry {
                Line::Sentence(s) => kb.set_sentence_text(&s.patent, s.sent, s.sentence_text),
                Line::Fact(f) => {
                    kb.insert(f);
                }
            }
        }
        if !header_seen {
            return Err(line_err(1, "missing kb_version header".into()));
        }
        Ok(kb)
    }
}

#[derive(Serialize, Deserialize)]
struct SentenceLine {
    sentence_text: String,
    patent: String,
    sent: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Sentence(SentenceLine),
    Fact(Fact),
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fact(h: &str, r: &str, t: &str, p: &str, s: usize) -> Fact {
        Fact {
            head: h.into(),
            rel: r.split_whitespace().map(String::from).collect(),
            tail: t.into(),
            patent: p.into(),
            sent: s,
            spans: Default::default(),
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_entity("The  Space"), "space");
        assert_eq!(normalize_entity("said the housing"), "housing");
        assert_eq!(normalize_entity("the"), "the");
        assert_eq!(normalize_entity("An Organic phosphite"), "organic phosphite");
    }

    #[test]
    fn insert_is_idempotent() {
        let mut kb = KnowledgeBase::new();
        let a = kb.insert(fact("The space", "allows", "a strip", "P1", 0));
        let b = kb.insert(fact("The space", "allows", "a strip", "P1", 0));
        assert_eq!(a, b);
        assert_eq!(kb.len(), 1);
        kb.insert(fact("the space", "allows", "a strip", "P2", 0));
        assert_eq!(kb.entity_records("space"), [0, 1]);
        assert_eq!(kb.surface_forms("space").len(), 2);
        assert!(kb.indexes_consistent());
    }

    #[test]
    fn empty_stats() {
        assert_eq!(KnowledgeBase::new().stats(), KbStats::default());
    }

    #[test]
    fn stats_and_multiplicity() {
        let kb = KnowledgeBase::from_facts([
            fact("the fan", "drives", "the air", "P1", 0),
            fact("the fan", "drives", "the air", "P2", 3),
            fact("the fan", "drives", "the air", "P3", 1),
            fact("the fan", "cools", "the air", "P1", 0),
            fact("one way", "", "valves", "P1", 1),
        ]);
        let s = kb.stats();
        assert_eq!((s.n_patents, s.n_sentences, s.n_facts), (3, 4, 5));
        assert_eq!((s.n_unique_entities, s.n_unique_relationships), (4, 2));
        assert!((s.avg_facts_per_sentence - 1.25).abs() < 1e-12);
        let g = kb.multi_patent_relations("The fan", "air");
        assert_eq!(g[0].relation, "cools");
        assert_eq!(g[0].multiplicity, 1);
        assert_eq!(g[0].patents, ["P1"]);
        assert_eq!(g[1].multiplicity, 3);
        assert!(kb.multi_patent_relations("x", "y").is_empty());
        assert_eq!(kb.top_entities(2, 30), [("one way".to_string(), 1)]);
        assert_eq!(kb.top_entities(1, 1), [("air".to_string(), 4)]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        let mut kb = KnowledgeBase::from_facts([
            fact("the fan", "drives", "the air", "P1", 0),
            fact("a hub", "holds", "the blade", "P2", 1),
        ]);
        kb.set_sentence_text("P1", 0, "The fan drives the air.");
        kb.save(&path).unwrap();
        let back = KnowledgeBase::load(&path).unwrap();
        assert_eq!(back.stats(), kb.stats());
        assert_eq!(back.records(), kb.records());
        assert_eq!(back.sentence_text("P1", 0), Some("The fan drives the air."));
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        fs::write(&path, "{\"kb_version\":2}\n").unwrap();
        assert!(matches!(KnowledgeBase::load(&path), Err(Error::Version { found: 2, .. })));
        fs::write(&path, "{\"kb_version\":1}\n{\"head\":\"a\",\"rel\":[],\"tail\":\"b\"}\n{\"head\":\"a\",\"re").unwrap();
        match KnowledgeBase::load(&path) {
            Err(Error::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
