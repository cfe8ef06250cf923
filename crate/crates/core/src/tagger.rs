//! Linear-chain sequence tagging: a structured averaged perceptron with
//! Viterbi decoding, the two tag schemes used for fact extraction, and the
//! `{HEAD ~ ...}` / `{TAIL ~ ...}` entity-pair marking protocol.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lingo::{AnnotatedSentence, Span, Token};

pub const MODEL_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagScheme {
    pub name: String,
    pub tags: Vec<String>,
}

impl TagScheme {
    pub fn new(name: impl Into<String>, tags: Vec<String>) -> Self {
        TagScheme {
            name: name.into(),
            tags,
        }
    }

    pub fn stage1() -> Self {
        Self::new("stage1", Stage1Tag::ALL.iter().map(|t| t.as_str().into()).collect())
    }

    pub fn stage2() -> Self {
        Self::new("stage2", Stage2Tag::ALL.iter().map(|t| t.as_str().into()).collect())
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let unique: HashSet<&String> = self.tags.iter().collect();
        if self.tags.is_empty() || unique.len() != self.tags.len() {
            return Err(Error::InvalidArgument(format!(
                "tag scheme `{}` must have unique, non-empty tags",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage1Tag {
    Ent,
    Rel,
    Others,
}

impl Stage1Tag {
    pub const ALL: [Stage1Tag; 3] = [Stage1Tag::Ent, Stage1Tag::Rel, Stage1Tag::Others];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage1Tag::Ent => "ENT",
            Stage1Tag::Rel => "REL",
            Stage1Tag::Others => "OTHERS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage2Tag {
    Head,
    Tail,
    Rel,
    Oth,
}

impl Stage2Tag {
    pub const ALL: [Stage2Tag; 4] = [Stage2Tag::Head, Stage2Tag::Tail, Stage2Tag::Rel, Stage2Tag::Oth];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage2Tag::Head => "HEAD",
            Stage2Tag::Tail => "TAIL",
            Stage2Tag::Rel => "REL",
            Stage2Tag::Oth => "OTH",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

// ---------------------------------------------------------------------------
// Marking protocol
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Head,
    Tail,
}

impl Role {
    fn marker(self) -> &'static str {
        match self {
            Role::Head => "HEAD",
            Role::Tail => "TAIL",
        }
    }
}

/// A sentence with one entity pair wrapped in marker blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedSentence {
    pub tokens: Vec<Token>,
    /// Whole `{ HEAD ~ ... }` block, in marked indices.
    pub head_block: Span,
    pub tail_block: Span,
    /// Entity tokens only, in marked indices.
    pub head_span: Span,
    pub tail_span: Span,
    /// Original index of each marked token; `None` for marker tokens.
    pub original: Vec<Option<usize>>,
}

fn marker_token(text: &str, pos: &str, at: usize) -> Token {
    Token {
        text: text.into(),
        index: 0,
        pos: pos.into(),
        start: at,
        end: at,
    }
}

/// Insert `{ HEAD ~` / `}` around `head` and `{ TAIL ~` / `}` around `tail`.
/// Blocks appear in surface order, so a tail before the head is marked first.
pub fn mark_pair(tokens: &[Token], head: Span, tail: Span) -> Result<MarkedSentence> {
    let n = tokens.len();
    for (name, s) in [("head", head), ("tail", tail)] {
        if s.start > s.end || s.end >= n {
            return Err(Error::InvalidArgument(format!(
                "{name} span {s} out of bounds for {n} tokens"
            )));
        }
    }
    if head == tail {
        return Err(Error::InvalidArgument(format!("head and tail are the same span {head}")));
    }
    if head.overlaps(&tail) {
        return Err(Error::InvalidArgument(format!(
            "head span {head} overlaps tail span {tail}"
        )));
    }

    let mut out = Vec::with_capacity(n + 8);
    let mut original = Vec::with_capacity(n + 8);
    let mut head_block = Span::new(0, 0);
    let mut tail_block = Span::new(0, 0);
    for (i, tok) in tokens.iter().enumerate() {
        for (role, span) in [(Role::Head, head), (Role::Tail, tail)] {
            if span.start == i {
                let at = tok.start;
                let first = out.len();
                out.push(marker_token("{", "-LRB-", at));
                out.push(marker_token(role.marker(), "NNP", at));
                out.push(marker_token("~", "NFP", at));
                original.extend([None, None, None]);
                match role {
                    Role::Head => head_block.start = first,
                    Role::Tail => tail_block.start = first,
                }
            }
        }
        out.push(tok.clone());
        original.push(Some(i));
        for (role, span) in [(Role::Head, head), (Role::Tail, tail)] {
            if span.end == i {
                out.push(marker_token("}", "-RRB-", tok.end));
                original.push(None);
                match role {
                    Role::Head => head_block.end = out.len() - 1,
                    Role::Tail => tail_block.end = out.len() - 1,
                }
            }
        }
    }
    for (i, t) in out.iter_mut().enumerate() {
        t.index = i;
    }
    Ok(MarkedSentence {
        tokens: out,
        head_span: Span::new(head_block.start + 3, head_block.end - 1),
        tail_span: Span::new(tail_block.start + 3, tail_block.end - 1),
        head_block,
        tail_block,
        original,
    })
}

impl MarkedSentence {
    /// Drop the marker tokens, recovering the original token sequence.
    pub fn strip_markers(&self) -> Vec<Token> {
        self.tokens
            .iter()
            .zip(&self.original)
            .filter_map(|(t, o)| o.map(|i| Token { index: i, ..t.clone() }))
            .collect()
    }

    pub fn marked_index(&self, original: usize) -> Option<usize> {
        self.original.iter().position(|o| *o == Some(original))
    }
}

impl fmt::Display for MarkedSentence {
    /// `{HEAD ~ The space} provided between {TAIL ~ brush members} ...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut prev: Option<&str> = None;
        for (i, t) in self.tokens.iter().enumerate() {
            let marker = self.original[i].is_none();
            let glue = prev == Some("{") || (marker && t.text == "}");
            if prev.is_some() && !glue {
                f.write_str(" ")?;
            }
            f.write_str(&t.text)?;
            prev = Some(if marker { t.text.as_str() } else { "" });
        }
        Ok(())
    }
}

/// Where a token sits relative to the marker blocks of a sentence.
#[derive(Clone, Debug, Default)]
pub struct MarkerLayout {
    head: Option<Span>,
    tail: Option<Span>,
    /// Prefix counts of cue tokens (relative pronoun, comma, conjunction,
    /// finite verb); entry `i` covers tokens before `i`.
    cues: Vec<[u16; 4]>,
}

fn cue_flags(t: &Token) -> [u16; 4] {
    [
        matches!(t.pos.as_str(), "WDT" | "WP") as u16,
        (t.text == ",") as u16,
        (t.pos == "CC") as u16,
        matches!(t.pos.as_str(), "VBZ" | "VBP" | "VBD" | "MD") as u16,
    ]
}

impl MarkerLayout {
    pub fn detect(tokens: &[Token]) -> Self {
        let mut layout = MarkerLayout::default();
        layout.cues.reserve(tokens.len() + 1);
        let mut acc = [0u16; 4];
        layout.cues.push(acc);
        for t in tokens {
            for (a, c) in acc.iter_mut().zip(cue_flags(t)) {
                *a += c;
            }
            layout.cues.push(acc);
        }
        let mut i = 0;
        while i + 2 < tokens.len() {
            if tokens[i].text == "{" && tokens[i + 2].text == "~" {
                let role = match tokens[i + 1].text.as_str() {
                    "HEAD" => Some(Role::Head),
                    "TAIL" => Some(Role::Tail),
                    _ => None,
                };
                if let Some(role) = role {
                    if let Some(close) = (i + 3..tokens.len()).find(|&j| tokens[j].text == "}") {
                        let span = Span::new(i, close);
                        match role {
                            Role::Head => layout.head = Some(span),
                            Role::Tail => layout.tail = Some(span),
                        }
                        i = close + 1;
                        continue;
                    }
                }
            }
            i += 1;
        }
        layout
    }

    pub fn is_marked(&self) -> bool {
        self.head.is_some() && self.tail.is_some()
    }

    fn block(&self, i: usize) -> Option<Role> {
        if self.head.is_some_and(|s| s.contains(i)) {
            Some(Role::Head)
        } else if self.tail.is_some_and(|s| s.contains(i)) {
            Some(Role::Tail)
        } else {
            None
        }
    }

    fn region(&self, i: usize) -> &'static str {
        let (Some(h), Some(t)) = (self.head, self.tail) else {
            return "none";
        };
        let head_first = h.start < t.start;
        let (first, second) = if head_first { (h, t) } else { (t, h) };
        match (i < first.start, i > second.end, head_first) {
            (true, _, true) => "before:HT",
            (true, _, false) => "before:TH",
            (_, true, true) => "after:HT",
            (_, true, false) => "after:TH",
            (false, false, true) => "between:HT",
            (false, false, false) => "between:TH",
        }
    }

    /// Which cue kinds occur strictly between token `i` and `block`, as a
    /// four-character signature, prefixed by the side of the block.
    fn cues_towards(&self, i: usize, block: Span) -> String {
        let (side, lo, hi) = if i < block.start {
            ('R', i + 1, block.start)
        } else {
            ('L', block.end + 1, i)
        };
        let mut sig = String::with_capacity(5);
        sig.push(side);
        for k in 0..4 {
            let n = if hi > lo { self.cues[hi][k] - self.cues[lo][k] } else { 0 };
            sig.push(if n > 0 { '1' } else { '0' });
        }
        sig
    }

    fn distance(&self, i: usize) -> usize {
        [self.head, self.tail]
            .into_iter()
            .flatten()
            .map(|s| {
                if s.contains(i) {
                    0
                } else if i < s.start {
                    s.start - i
                } else {
                    i - s.end
                }
            })
            .min()
            .unwrap_or(usize::MAX)
    }
}

fn distance_bucket(d: usize) -> &'static str {
    match d {
        0 => "0",
        1 => "1",
        2 => "2",
        3 => "3",
        4..=5 => "4-5",
        6..=10 => "6-10",
        _ => "11+",
    }
}

fn word_shape(word: &str) -> String {
    let mut shape = String::new();
    let mut last = None;
    for c in word.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if last != Some(s) {
            shape.push(s);
            last = Some(s);
        }
    }
    shape
}

fn suffix(word: &str, n: usize) -> String {
    let chars: Vec<char> = word.chars().collect();
    chars[chars.len().saturating_sub(n)..].iter().collect()
}

/// Feature template family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureTemplate {
    /// Word-only features, for POS tagging.
    Lexical,
    /// Word, POS and marker-block features, for the fact taggers.
    Contextual,
}

const BOS: &str = "<s>";
const EOS: &str = "</s>";

fn emit_features(
    tokens: &[Token],
    lower: &[String],
    layout: &MarkerLayout,
    i: usize,
    template: FeatureTemplate,
    buf: &mut String,
    f: &mut impl FnMut(&str),
) {
    use std::fmt::Write;
    let word = |k: isize| -> &str {
        let j = i as isize + k;
        if j < 0 {
            BOS
        } else if j as usize >= tokens.len() {
            EOS
        } else {
            lower[j as usize].as_str()
        }
    };
    let pos = |k: isize| -> &str {
        let j = i as isize + k;
        if j < 0 {
            BOS
        } else if j as usize >= tokens.len() {
            EOS
        } else {
            tokens[j as usize].pos.as_str()
        }
    };
    let mut emit = |args: fmt::Arguments| {
        buf.clear();
        buf.write_fmt(args).expect("write to string");
        f(buf);
    };
    let raw = tokens[i].text.as_str();

    emit(format_args!("bias"));
    emit(format_args!("w={}", word(0)));
    emit(format_args!("w-1={}", word(-1)));
    emit(format_args!("w+1={}", word(1)));
    emit(format_args!("shape={}", word_shape(raw)));
    emit(format_args!("suf3={}", suffix(word(0), 3)));

    match template {
        FeatureTemplate::Lexical => {
            emit(format_args!("w-2={}", word(-2)));
            emit(format_args!("w+2={}", word(2)));
            emit(format_args!("suf2={}", suffix(word(0), 2)));
            emit(format_args!("suf1={}", suffix(word(0), 1)));
            emit(format_args!("w-1|w={}|{}", word(-1), word(0)));
            if i == 0 {
                emit(format_args!("first"));
            }
        }
        FeatureTemplate::Contextual => {
            emit(format_args!("p={}", pos(0)));
            emit(format_args!("p-1={}", pos(-1)));
            emit(format_args!("p+1={}", pos(1)));
            emit(format_args!("p-1|p={}|{}", pos(-1), pos(0)));
            emit(format_args!("p|p+1={}|{}", pos(0), pos(1)));
            if layout.is_marked() {
                match layout.block(i) {
                    Some(Role::Head) => emit(format_args!("in_head=1")),
                    Some(Role::Tail) => emit(format_args!("in_tail=1")),
                    None => {
                        let region = layout.region(i);
                        let dist = distance_bucket(layout.distance(i));
                        emit(format_args!("region={region}"));
                        emit(format_args!("dist={dist}"));
                        emit(format_args!("region|dist={region}|{dist}"));
                        emit(format_args!("region|p={region}|{}", pos(0)));
                        emit(format_args!("region|w={region}|{}", word(0)));
                        emit(format_args!("region|dist|p={region}|{dist}|{}", pos(0)));
                        let after_block = i > 0 && layout.block(i - 1).is_some();
                        let before_block = layout.block(i + 1).is_some();
                        if after_block {
                            emit(format_args!("after_block|p={}", pos(0)));
                        }
                        if before_block {
                            emit(format_args!("before_block|p={}", pos(0)));
                        }
                        let (h, t) = (layout.head.expect("marked"), layout.tail.expect("marked"));
                        let to_h = layout.cues_towards(i, h);
                        let to_t = layout.cues_towards(i, t);
                        emit(format_args!("cues_h={to_h}"));
                        emit(format_args!("cues_t={to_t}"));
                        emit(format_args!("cues_ht={to_h}|{to_t}"));
                        emit(format_args!("cues_ht|p={to_h}|{to_t}|{}", pos(0)));
                        let at = |j: Option<usize>| j.filter(|&j| j < tokens.len()).map_or(EOS, |j| lower[j].as_str());
                        emit(format_args!("region|h-1={region}|{}", h.start.checked_sub(1).map_or(BOS, |j| lower[j].as_str())));
                        emit(format_args!("region|h+1={region}|{}", at(Some(h.end + 1))));
                        emit(format_args!("region|t-1={region}|{}", t.start.checked_sub(1).map_or(BOS, |j| lower[j].as_str())));
                        emit(format_args!("region|t+1={region}|{}", at(Some(t.end + 1))));
                    }
                }
            }
        }
    }
}

/// Feature strings for one position. Deterministic in the token texts, POS
/// tags and marker layout of the sentence.
pub fn featurize(tokens: &[Token], position: usize) -> Vec<String> {
    featurize_with(tokens, position, FeatureTemplate::Contextual)
}

pub fn featurize_with(tokens: &[Token], position: usize, template: FeatureTemplate) -> Vec<String> {
    let lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let layout = MarkerLayout::detect(tokens);
    let mut out = Vec::new();
    let mut buf = String::new();
    emit_features(tokens, &lower, &layout, position, template, &mut buf, &mut |s| {
        out.push(s.to_string())
    });
    out
}

fn for_each_sentence_feature(
    tokens: &[Token],
    template: FeatureTemplate,
    mut f: impl FnMut(usize, &str),
) {
    let lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let layout = MarkerLayout::detect(tokens);
    let mut buf = String::new();
    for i in 0..tokens.len() {
        emit_features(tokens, &lower, &layout, i, template, &mut buf, &mut |s| f(i, s));
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub epoch_accuracy: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TaggerModel {
    pub scheme: TagScheme,
    pub template: FeatureTemplate,
    pub averaged: bool,
    pub meta: TrainingMeta,
    feature_names: Vec<String>,
    lookup: HashMap<u64, u32>,
    /// `feature * n_tags + tag`
    weights: Vec<f64>,
    /// Row 0 is the start state, row `p + 1` the previous tag `p`.
    transitions: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Example {
    pub tokens: Vec<Token>,
    pub tags: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub template: FeatureTemplate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            seed: 0,
            template: FeatureTemplate::Contextual,
        }
    }
}

impl TaggerModel {
    fn empty(scheme: TagScheme, template: FeatureTemplate) -> Self {
        let k = scheme.len();
        TaggerModel {
            scheme,
            template,
            averaged: false,
            meta: TrainingMeta::default(),
            feature_names: Vec::new(),
            lookup: HashMap::new(),
            weights: Vec::new(),
            transitions: vec![0.0; (k + 1) * k],
        }
    }

    fn intern(&mut self, name: &str) -> u32 {
        let h = fnv1a(name);
        if let Some(&id) = self.lookup.get(&h) {
            return id;
        }
        let id = self.feature_names.len() as u32;
        self.feature_names.push(name.to_string());
        self.lookup.insert(h, id);
        self.weights.extend(std::iter::repeat_n(0.0, self.scheme.len()));
        id
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn emissions(&self, tokens: &[Token]) -> Vec<f64> {
        let k = self.scheme.len();
        let mut scores = vec![0.0; tokens.len() * k];
        for_each_sentence_feature(tokens, self.template, |i, name| {
            if let Some(&id) = self.lookup.get(&fnv1a(name)) {
                let w = &self.weights[id as usize * k..(id as usize + 1) * k];
                for (s, w) in scores[i * k..(i + 1) * k].iter_mut().zip(w) {
                    *s += w;
                }
            }
        });
        scores
    }

    fn viterbi(&self, emissions: &[f64], n: usize) -> Vec<usize> {
        let k = self.scheme.len();
        if n == 0 {
            return Vec::new();
        }
        let mut score = vec![0.0; n * k];
        let mut back = vec![0usize; n * k];
        for j in 0..k {
            score[j] = self.transitions[j] + emissions[j];
        }
        for t in 1..n {
            for j in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for p in 0..k {
                    let s = score[(t - 1) * k + p] + self.transitions[(p + 1) * k + j];
                    if s > best {
                        best = s;
                        arg = p;
                    }
                }
                score[t * k + j] = best + emissions[t * k + j];
                back[t * k + j] = arg;
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut last = 0;
        for j in 0..k {
            if score[(n - 1) * k + j] > best {
                best = score[(n - 1) * k + j];
                last = j;
            }
        }
        let mut path = vec![0; n];
        path[n - 1] = last;
        for t in (1..n).rev() {
            path[t - 1] = back[t * k + path[t]];
        }
        path
    }

    /// Viterbi-optimal tag indices. Ties go to the lowest tag index.
    pub fn tag_ids(&self, tokens: &[Token]) -> Vec<usize> {
        let e = self.emissions(tokens);
        self.viterbi(&e, tokens.len())
    }

    pub fn tag(&self, tokens: &[Token]) -> Vec<String> {
        self.tag_ids(tokens)
            .into_iter()
            .map(|i| self.scheme.tags[i].clone())
            .collect()
    }

    /// Token accuracy against gold tags.
    pub fn accuracy(&self, examples: &[Example]) -> f64 {
        let mut correct = 0usize;
        let mut total = 0usize;
        for ex in examples {
            let pred = self.tag_ids(&ex.tokens);
            correct += pred.iter().zip(&ex.tags).filter(|(a, b)| a == b).count();
            total += ex.tags.len();
        }
        if total == 0 {
            1.0
        } else {
            correct as f64 / total as f64
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let k = self.scheme.len();
        let mut features: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        for (id, name) in self.feature_names.iter().enumerate() {
            let row: BTreeMap<&str, f64> = (0..k)
                .filter(|&j| self.weights[id * k + j] != 0.0)
                .map(|j| (self.scheme.tags[j].as_str(), self.weights[id * k + j]))
                .collect();
            if !row.is_empty() {
                features.insert(name, row);
            }
        }
        let mut transitions: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        for p in 0..=k {
            let from = if p == 0 { BOS } else { self.scheme.tags[p - 1].as_str() };
            let row: BTreeMap<&str, f64> = (0..k)
                .map(|j| (self.scheme.tags[j].as_str(), self.transitions[p * k + j]))
                .collect();
            transitions.insert(from, row);
        }
        serde_json::json!({
            "version": MODEL_VERSION,
            "scheme": self.scheme,
            "template": self.template,
            "averaged": self.averaged,
            "meta": self.meta,
            "features": features,
            "transitions": transitions,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            version: u64,
            scheme: TagScheme,
            template: FeatureTemplate,
            averaged: bool,
            #[serde(default)]
            meta: TrainingMeta,
            features: BTreeMap<String, BTreeMap<String, f64>>,
            transitions: BTreeMap<String, BTreeMap<String, f64>>,
        }
        let raw: Raw = serde_json::from_value(value.clone())?;
        if raw.version != MODEL_VERSION {
            return Err(Error::Version {
                found: raw.version,
                expected: MODEL_VERSION,
            });
        }
        raw.scheme.validate()?;
        let k = raw.scheme.len();
        let mut model = TaggerModel::empty(raw.scheme, raw.template);
        model.averaged = raw.averaged;
        model.meta = raw.meta;
        let tag_id = |scheme: &TagScheme, t: &str| {
            scheme
                .index(t)
                .ok_or_else(|| Error::Schema(format!("unknown tag `{t}` in model")))
        };
        for (name, row) in &raw.features {
            let id = model.intern(name) as usize;
            for (tag, w) in row {
                let j = tag_id(&model.scheme, tag)?;
                model.weights[id * k + j] = *w;
            }
        }
        for (from, row) in &raw.transitions {
            let p = if from == BOS { 0 } else { tag_id(&model.scheme, from)? + 1 };
            for (tag, w) in row {
                let j = tag_id(&model.scheme, tag)?;
                model.transitions[p * k + j] = *w;
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(&self.to_json())?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        Self::from_json(&value)
    }
}

struct Averager {
    totals: Vec<f64>,
    stamps: Vec<u64>,
    ttotals: Vec<f64>,
    tstamps: Vec<u64>,
}

impl Averager {
    fn update(model: &mut TaggerModel, avg: &mut Averager, idx: usize, delta: f64, clock: u64) {
        avg.totals[idx] += (clock - avg.stamps[idx]) as f64 * model.weights[idx];
        avg.stamps[idx] = clock;
        model.weights[idx] += delta;
    }

    fn update_transition(
        model: &mut TaggerModel,
        avg: &mut Averager,
        idx: usize,
        delta: f64,
        clock: u64,
    ) {
        avg.ttotals[idx] += (clock - avg.tstamps[idx]) as f64 * model.transitions[idx];
        avg.tstamps[idx] = clock;
        model.transitions[idx] += delta;
    }
}

/// Result of training: the averaged model plus the raw final-epoch weights.
pub struct Trained {
    pub averaged: TaggerModel,
    pub last: TaggerModel,
}

/// Train a structured averaged perceptron. Examples are visited in a seeded
/// shuffled order each epoch.
pub fn train(examples: &[Example], scheme: TagScheme, config: &TrainConfig) -> Result<TaggerModel> {
    Ok(train_both(examples, scheme, config)?.averaged)
}

pub fn train_both(examples: &[Example], scheme: TagScheme, config: &TrainConfig) -> Result<Trained> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    scheme.validate()?;
    let k = scheme.len();
    for ex in examples {
        if ex.tokens.len() != ex.tags.len() {
            return Err(Error::Data("token and tag counts differ".into()));
        }
        if let Some(t) = ex.tags.iter().find(|&&t| t >= k) {
            return Err(Error::Data(format!("tag index {t} outside scheme `{}`", scheme.name)));
        }
    }

    let mut model = TaggerModel::empty(scheme, config.template);
    let mut feats: Vec<Vec<Vec<u32>>> = Vec::with_capacity(examples.len());
    for ex in examples {
        let mut per_pos: Vec<Vec<u32>> = vec![Vec::new(); ex.tokens.len()];
        let mut names: Vec<(usize, String)> = Vec::new();
        for_each_sentence_feature(&ex.tokens, config.template, |i, name| {
            names.push((i, name.to_string()))
        });
        for (i, name) in names {
            let id = model.intern(&name);
            per_pos[i].push(id);
        }
        feats.push(per_pos);
    }

    let mut avg = Averager {
        totals: vec![0.0; model.weights.len()],
        stamps: vec![0; model.weights.len()],
        ttotals: vec![0.0; model.transitions.len()],
        tstamps: vec![0; model.transitions.len()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut clock: u64 = 0;
    let mut epoch_accuracy = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut correct = 0usize;
        let mut total = 0usize;
        for &e in &order {
            clock += 1;
            let ex = &examples[e];
            let n = ex.tokens.len();
            if n == 0 {
                continue;
            }
            let mut emis = vec![0.0; n * k];
            for (i, ids) in feats[e].iter().enumerate() {
                for &id in ids {
                    let w = &model.weights[id as usize * k..(id as usize + 1) * k];
                    for (s, w) in emis[i * k..(i + 1) * k].iter_mut().zip(w) {
                        *s += w;
                    }
                }
            }
            let pred = model.viterbi(&emis, n);
            total += n;
            correct += pred.iter().zip(&ex.tags).filter(|(a, b)| a == b).count();
            if pred == ex.tags {
                continue;
            }
            for i in 0..n {
                let (g, p) = (ex.tags[i], pred[i]);
                if g != p {
                    for &id in &feats[e][i] {
                        let base = id as usize * k;
                        Averager::update(&mut model, &mut avg, base + g, 1.0, clock);
                        Averager::update(&mut model, &mut avg, base + p, -1.0, clock);
                    }
                }
                let gp = if i == 0 { 0 } else { ex.tags[i - 1] + 1 };
                let pp = if i == 0 { 0 } else { pred[i - 1] + 1 };
                if (gp, g) != (pp, p) {
                    Averager::update_transition(&mut model, &mut avg, gp * k + g, 1.0, clock);
                    Averager::update_transition(&mut model, &mut avg, pp * k + p, -1.0, clock);
                }
            }
        }
        epoch_accuracy.push(if total == 0 { 1.0 } else { correct as f64 / total as f64 });
    }

    let meta = TrainingMeta {
        epochs: config.epochs,
        seed: config.seed,
        epoch_accuracy,
    };
    let mut last = model.clone();
    last.meta = meta.clone();

    let c = clock as f64;
    for i in 0..model.weights.len() {
        let total = avg.totals[i] + (clock - avg.stamps[i]) as f64 * model.weights[i];
        model.weights[i] = total / c;
    }
    for i in 0..model.transitions.len() {
        let total = avg.ttotals[i] + (clock - avg.tstamps[i]) as f64 * model.transitions[i];
        model.transitions[i] = total / c;
    }
    model.averaged = true;
    model.meta = meta;
    Ok(Trained {
        averaged: model,
        last,
    })
}

// ---------------------------------------------------------------------------
// Training example generation
// ---------------------------------------------------------------------------

/// Stage-1 tags: ENT for tokens inside any fact entity, else REL for any fact
/// relation token, else OTHERS.
pub fn make_stage1_example(sentence: &AnnotatedSentence) -> Result<Vec<(Token, Stage1Tag)>> {
    sentence.validate()?;
    let n = sentence.tokens.len();
    let mut tags = vec![Stage1Tag::Others; n];
    for f in &sentence.facts {
        for &i in &f.relation {
            tags[i] = Stage1Tag::Rel;
        }
    }
    for f in &sentence.facts {
        for span in [f.head, f.tail] {
            for tag in &mut tags[span.start..=span.end] {
                *tag = Stage1Tag::Ent;
            }
        }
    }
    Ok(sentence.tokens.iter().cloned().zip(tags).collect())
}

/// Stage-2 tags for a marked pair: marker blocks HEAD/TAIL, the given relation
/// tokens REL, everything else OTH.
pub fn stage2_tags(marked: &MarkedSentence, relation: &[usize]) -> Vec<Stage2Tag> {
    let mut tags = vec![Stage2Tag::Oth; marked.tokens.len()];
    for &r in relation {
        if let Some(m) = marked.marked_index(r) {
            tags[m] = Stage2Tag::Rel;
        }
    }
    for i in marked.head_block.start..=marked.head_block.end {
        tags[i] = Stage2Tag::Head;
    }
    for i in marked.tail_block.start..=marked.tail_block.end {
        tags[i] = Stage2Tag::Tail;
    }
    tags
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSampling {
    /// One unrelated pair per fact, drawn without replacement.
    #[default]
    PerFact,
    /// Every unrelated ordered pair.
    All,
}

#[derive(Clone, Debug, Default)]
pub struct Stage2Examples {
    pub positives: Vec<(MarkedSentence, Vec<Stage2Tag>)>,
    pub negatives: Vec<(MarkedSentence, Vec<Stage2Tag>)>,
    /// Facts that got no negative because the unrelated-pair pool ran out.
    pub missing_negatives: usize,
}

/// Ordered entity pairs of the sentence with no fact in that direction, in
/// (head start, tail start) order. The reverse of a fact counts as
/// unrelated, which teaches Stage 2 the direction of a relation.
pub fn unrelated_pairs(sentence: &AnnotatedSentence) -> Vec<(Span, Span)> {
    let entities = sentence.entity_spans();
    let related: HashSet<(Span, Span)> = sentence.facts.iter().map(|f| (f.head, f.tail)).collect();
    let mut pool = Vec::new();
    for &a in &entities {
        for &b in &entities {
            if a != b && !a.overlaps(&b) && !related.contains(&(a, b)) {
                pool.push((a, b));
            }
        }
    }
    pool
}

pub fn make_stage2_examples(
    sentence: &AnnotatedSentence,
    rng_seed: u64,
    sampling: NegativeSampling,
) -> Result<Stage2Examples> {
    sentence.validate()?;
    let mut out = Stage2Examples::default();
    for f in &sentence.facts {
        let marked = mark_pair(&sentence.tokens, f.head, f.tail)?;
        let tags = stage2_tags(&marked, &f.relation);
        out.positives.push((marked, tags));
    }
    let mut pool = unrelated_pairs(sentence);
    let wanted = match sampling {
        NegativeSampling::PerFact => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            pool.shuffle(&mut rng);
            sentence.facts.len()
        }
        NegativeSampling::All => pool.len(),
    };
    let take = wanted.min(pool.len());
    out.missing_negatives = match sampling {
        NegativeSampling::PerFact => sentence.facts.len() - take,
        NegativeSampling::All => 0,
    };
    for &(h, t) in &pool[..take] {
        let marked = mark_pair(&sentence.tokens, h, t)?;
        let tags = stage2_tags(&marked, &[]);
        out.negatives.push((marked, tags));
    }
    Ok(out)
}

/// Stage-1 training examples for every annotated sentence.
pub fn stage1_training_examples(sentences: &[AnnotatedSentence]) -> Result<Vec<Example>> {
    sentences
        .iter()
        .map(|s| {
            let tagged = make_stage1_example(s)?;
            let (tokens, tags): (Vec<Token>, Vec<usize>) = tagged
                .into_iter()
                .map(|(t, tag)| (t, tag as usize))
                .unzip();
            Ok(Example { tokens, tags })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stage2Counts {
    pub facts: usize,
    pub positives: usize,
    pub negatives: usize,
    pub missing_negatives: usize,
}

/// Per-sentence seed derived from a corpus seed and the sentence position.
pub fn sentence_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn stage2_training_examples(
    sentences: &[AnnotatedSentence],
    seed: u64,
    sampling: NegativeSampling,
) -> Result<(Vec<Example>, Stage2Counts)> {
    let mut examples = Vec::new();
    let mut counts = Stage2Counts::default();
    for (i, s) in sentences.iter().enumerate() {
        let gen = make_stage2_examples(s, sentence_seed(seed, i), sampling)?;
        counts.facts += s.facts.len();
        counts.positives += gen.positives.len();
        counts.negatives += gen.negatives.len();
        counts.missing_negatives += gen.missing_negatives;
        for (marked, tags) in gen.positives.into_iter().chain(gen.negatives) {
            examples.push(Example {
                tokens: marked.tokens,
                tags: tags.into_iter().map(|t| t as usize).collect(),
            });
        }
    }
    Ok((examples, counts))
}
