//! Tokenization, part-of-speech tagging, noun-phrase chunking and the
//! annotation file format that carries gold tags, dependencies and facts.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagger::{self, Example, FeatureTemplate, TagScheme, TaggerModel, TrainConfig};

/// The closed part-of-speech inventory (50 tags).
pub const POS_TAGS: [&str; 50] = [
    "$", "``", ",", "-LRB-", "-RRB-", ".", ":", "ADD", "AFX", "CC", "CD", "DT", "EX", "FW", "HYPH",
    "IN", "JJ", "JJR", "JJS", "LS", "MD", "NFP", "NN", "NNP", "NNPS", "NNS", "PDT", "POS", "PRP",
    "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ",
    "WDT", "WP", "WP$", "WRB", "XX", "_SP", "''",
];

/// Dependency labels: 38 parser labels plus `ADJ` (token adjacency) and `NIL`
/// (no relation).
pub const DEP_LABELS: [&str; 40] = [
    "ADJ", "NIL", "acl", "acomp", "advcl", "advmod", "agent", "amod", "appos", "attr", "aux",
    "auxpass", "cc", "ccomp", "compound", "conj", "csubj", "csubjpass", "dative", "dep", "dobj",
    "intj", "mark", "meta", "neg", "nmod", "npadvmod", "nsubj", "nsubjpass", "nummod", "oprd",
    "parataxis", "pcomp", "pobj", "preconj", "prep", "prt", "punct", "relcl", "xcomp",
];

pub fn pos_index(tag: &str) -> Option<usize> {
    POS_TAGS.iter().position(|t| *t == tag)
}

pub fn dep_index(label: &str) -> Option<usize> {
    DEP_LABELS.iter().position(|l| *l == label)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub index: usize,
    pub pos: String,
    /// Char offsets into the source text, end exclusive.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, index: usize, start: usize, end: usize) -> Self {
        Token {
            text: text.into(),
            index,
            pos: String::new(),
            start,
            end,
        }
    }
}

/// Inclusive token range.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn text(&self, tokens: &[Token]) -> String {
        join_tokens(&tokens[self.start..=self.end])
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

pub fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounPhrase {
    pub span: Span,
    /// Rightmost nominal of the span.
    pub root: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

fn is_detached(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | ';' | ':' | '(' | ')' | '"' | '\'' | '/' | '?' | '!'
    )
}

/// Split cleaned text into tokens. Whitespace separates tokens and the
/// characters `. , ; : ( ) " ' /` become tokens of their own, except that a
/// `.` or `,` between two digits stays inside the number (`1,3`, `7.5`).
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut cur_start = 0;

    let flush = |cur: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !cur.is_empty() {
            let idx = tokens.len();
            tokens.push(Token::new(std::mem::take(cur), idx, start, end));
        }
    };

    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut cur, cur_start, i, &mut tokens);
            continue;
        }
        if is_detached(c) {
            let numeric_sep = matches!(c, '.' | ',')
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
                && !cur.is_empty();
            if !numeric_sep {
                flush(&mut cur, cur_start, i, &mut tokens);
                let idx = tokens.len();
                tokens.push(Token::new(c.to_string(), idx, i, i + 1));
                continue;
            }
        }
        if cur.is_empty() {
            cur_start = i;
        }
        cur.push(c);
    }
    flush(&mut cur, cur_start, chars.len(), &mut tokens);
    tokens
}

/// Anything that assigns POS tags to a token sequence.
pub trait PosTagger: Send + Sync {
    fn tag_tokens(&self, tokens: &mut [Token]);
}

/// Rule-based tagger from closed-class word lists and suffix rules. Used
/// where no trained model is available, e.g. chunking claims during cleaning.
#[derive(Clone, Debug, Default)]
pub struct LexiconTagger;

const VERBS_3SG: &[&str] = &[
    "comprises", "includes", "allows", "extends", "provides", "contains", "defines", "forms",
    "receives", "rotates", "slides", "moves", "indicates", "increases", "decreases", "adopts",
    "seeks", "relates", "involves", "pertains", "reduces", "holds", "supports", "connects",
    "engages", "surrounds", "drives", "melts", "flows", "carries", "generates", "produces",
    "controls", "transmits", "comprise", "consists", "requires", "permits", "enables", "causes",
    "prevents", "bounds", "grips", "modulates", "achieves", "improves", "absorbs", "couples",
    "operates", "passes", "rests", "lies", "sits", "acts", "uses", "has", "does", "is", "shows",
    "minimizes", "maximizes", "cools", "heats", "blows", "sucks", "draws", "directs",
];

fn lexicon_tag(word: &str) -> Option<&'static str> {
    let lw = word.to_lowercase();
    let tag = match lw.as_str() {
        "a" | "an" | "the" | "this" | "these" | "those" | "each" | "every" | "another" | "some"
        | "no" | "either" | "neither" => "DT",
        "all" | "both" | "any" => "DT",
        "such" => "JJ",
        "of" | "in" | "on" | "at" | "by" | "for" | "with" | "from" | "into" | "onto" | "through"
        | "between" | "among" | "over" | "under" | "about" | "above" | "below" | "within"
        | "without" | "via" | "upon" | "during" | "before" | "after" | "along" | "across"
        | "around" | "against" | "toward" | "towards" | "behind" | "beyond" | "near" | "per"
        | "than" | "whether" | "if" | "because" | "while" | "although" | "though" | "until"
        | "since" | "unless" | "as" | "like" | "throughout" | "inside" | "outside" => "IN",
        "to" => "TO",
        "and" | "or" | "but" | "nor" => "CC",
        "it" | "they" | "them" | "he" | "she" | "we" | "i" | "you" | "itself" | "themselves" => {
            "PRP"
        }
        "its" | "their" | "his" | "her" | "our" | "my" | "your" => "PRP$",
        "which" | "that" => "WDT",
        "who" | "what" | "whom" => "WP",
        "whose" => "WP$",
        "where" | "when" | "how" | "why" | "wherein" | "whereby" => "WRB",
        "can" | "may" | "must" | "will" | "would" | "should" | "could" | "might" | "shall" => "MD",
        "be" => "VB",
        "are" | "have" | "do" => "VBP",
        "was" | "were" | "had" | "did" => "VBD",
        "been" => "VBN",
        "being" | "having" => "VBG",
        "said" => "JJ",
        "claim" => "NN",
        "claims" => "NNS",
        "set" => "VBN",
        "not" | "also" | "often" | "further" | "then" | "thus" | "generally" | "particularly"
        | "more" | "most" | "very" | "only" | "substantially" | "approximately" | "previously"
        | "otherwise" | "still" | "already" | "forth" | "thereby" | "therebetween" | "thereto"
        | "hereafter" | "wherefrom" | "therein" | "thereof" | "together" | "preferably" => "RB",
        "out" | "up" | "down" | "off" => "RP",
        "there" => "EX",
        "one" | "two" | "three" | "four" | "five" | "six" | "seven" | "eight" | "nine" | "ten" => {
            "CD"
        }
        "." | "?" | "!" => ".",
        "," => ",",
        ":" | ";" => ":",
        "(" | "{" | "[" => "-LRB-",
        ")" | "}" | "]" => "-RRB-",
        "\"" => "``",
        "'" => "''",
        "-" => "HYPH",
        "/" => "SYM",
        "~" => "NFP",
        "$" => "$",
        "%" => "NN",
        _ => return None,
    };
    Some(tag)
}

fn is_number(word: &str) -> bool {
    let mut digits = 0;
    for c in word.chars() {
        if c.is_ascii_digit() {
            digits += 1;
        } else if !matches!(c, '.' | ',' | '%') {
            return false;
        }
    }
    digits > 0
}

// Nouns whose endings would otherwise trip the suffix rules.
const NOUN_EXCEPTIONS: &[&str] = &[
    "housing", "spring", "ring", "bearing", "opening", "casing", "coating", "fitting", "wiring",
    "ceiling", "string", "wing", "thing", "building", "tubing", "lining", "winding", "seating",
    "assembly", "supply", "family", "bed", "seed", "speed", "feed", "shed", "reed", "sled",
];

fn suffix_tag(word: &str, prev: Option<&str>) -> &'static str {
    let lw = word.to_lowercase();
    if VERBS_3SG.contains(&lw.as_str()) {
        return "VBZ";
    }
    if NOUN_EXCEPTIONS.contains(&lw.as_str()) {
        return "NN";
    }
    if matches!(prev, Some("TO") | Some("MD")) {
        return "VB";
    }
    let n = lw.chars().count();
    if n > 4 && lw.ends_with("ing") {
        return "VBG";
    }
    if n > 3 && lw.ends_with("ed") {
        return "VBN";
    }
    if n > 3 && lw.ends_with("ly") {
        return "RB";
    }
    const ADJ_SUFFIXES: [&str; 8] = ["al", "ive", "ous", "able", "ible", "ic", "ful", "less"];
    if n > 4 && ADJ_SUFFIXES.iter().any(|s| lw.ends_with(s)) {
        return "JJ";
    }
    if n > 3
        && lw.ends_with('s')
        && !lw.ends_with("ss")
        && !lw.ends_with("us")
        && !lw.ends_with("is")
    {
        return "NNS";
    }
    "NN"
}

impl PosTagger for LexiconTagger {
    fn tag_tokens(&self, tokens: &mut [Token]) {
        let mut prev: Option<&'static str> = None;
        for i in 0..tokens.len() {
            let word = tokens[i].text.as_str();
            let tag = if is_number(word) {
                "CD"
            } else if word.chars().count() == 1
                && word.chars().all(|c| c.is_ascii_lowercase())
                && prev == Some("CD")
            {
                // reference labels such as the "a" in "4 a"
                "NN"
            } else if let Some(t) = lexicon_tag(word) {
                t
            } else if i > 0 && word.chars().next().is_some_and(|c| c.is_uppercase()) {
                "NNP"
            } else {
                suffix_tag(word, prev)
            };
            tokens[i].pos = tag.to_string();
            prev = Some(tag);
        }
    }
}

/// A trained averaged-perceptron POS tagger over [`POS_TAGS`].
#[derive(Clone, Debug)]
pub struct PosModel {
    pub model: TaggerModel,
}

impl PosTagger for PosModel {
    fn tag_tokens(&self, tokens: &mut [Token]) {
        let tags = self.model.tag(tokens);
        for (t, tag) in tokens.iter_mut().zip(tags) {
            t.pos = tag;
        }
    }
}

pub fn pos_scheme() -> TagScheme {
    TagScheme::new("pos", POS_TAGS.iter().map(|s| s.to_string()).collect())
}

/// Train a POS tagger on `(tokens, gold tags)` pairs.
pub fn train_pos_tagger(
    corpus: &[(Vec<String>, Vec<String>)],
    epochs: usize,
    seed: u64,
) -> Result<PosModel> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty POS training corpus".into()));
    }
    let scheme = pos_scheme();
    let mut examples = Vec::with_capacity(corpus.len());
    for (words, tags) in corpus {
        if words.len() != tags.len() {
            return Err(Error::Data(format!(
                "{} tokens but {} tags",
                words.len(),
                tags.len()
            )));
        }
        let tokens: Vec<Token> = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::new(w.clone(), i, 0, 0))
            .collect();
        let tag_ids = tags
            .iter()
            .map(|t| {
                scheme
                    .index(t)
                    .ok_or_else(|| Error::Data(format!("unknown POS tag `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        examples.push(Example {
            tokens,
            tags: tag_ids,
        });
    }
    let config = TrainConfig {
        epochs,
        seed,
        template: FeatureTemplate::Lexical,
    };
    let model = tagger::train(&examples, scheme, &config)?;
    Ok(PosModel { model })
}

#[derive(Clone, Copy, Debug)]
pub struct ChunkOptions {
    /// Start a new phrase at a number that directly follows a noun, so that
    /// reference numerals ("members 4 a") chunk separately.
    pub split_reference_numerals: bool,
}

impl Default for ChunkOptions {
    fn default() -> Self {
        ChunkOptions {
            split_reference_numerals: true,
        }
    }
}

fn is_determiner(tag: &str) -> bool {
    matches!(tag, "DT" | "PDT" | "PRP$")
}

fn is_modifier(tag: &str) -> bool {
    matches!(
        tag,
        "JJ" | "JJR" | "JJS" | "VBG" | "VBN" | "CD" | "NN" | "NNS" | "NNP" | "NNPS" | "HYPH"
    )
}

fn is_nominal(tag: &str) -> bool {
    matches!(tag, "NN" | "NNS" | "NNP" | "NNPS" | "CD")
}

fn is_pronoun(tag: &str) -> bool {
    matches!(tag, "PRP" | "WDT" | "WP")
}

/// Maximal spans matching
/// `(DT|PDT|PRP$)? (JJ|JJR|JJS|VBG|VBN|CD|NN|NNS|NNP|NNPS|HYPH)* (NN|NNS|NNP|NNPS|PRP|WDT|WP|CD)`.
/// Pronouns only ever form single-token phrases.
pub fn chunk_noun_phrases(tokens: &[Token]) -> Vec<NounPhrase> {
    chunk_noun_phrases_with(tokens, ChunkOptions::default())
}

pub fn chunk_noun_phrases_with(tokens: &[Token], options: ChunkOptions) -> Vec<NounPhrase> {
    let tags: Vec<&str> = tokens.iter().map(|t| t.pos.as_str()).collect();
    let n = tags.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if is_pronoun(tags[i]) {
            out.push(NounPhrase {
                span: Span::new(i, i),
                root: i,
            });
            i += 1;
            continue;
        }
        let start = i;
        let mut k = i;
        if is_determiner(tags[k]) {
            k += 1;
        }
        let body = k;
        let mut last_nominal = None;
        while k < n && is_modifier(tags[k]) {
            if options.split_reference_numerals
                && k > body
                && tags[k] == "CD"
                && matches!(tags[k - 1], "NN" | "NNS" | "NNP" | "NNPS")
            {
                break;
            }
            if is_nominal(tags[k]) {
                last_nominal = Some(k);
            }
            k += 1;
        }
        match last_nominal {
            Some(end) => {
                out.push(NounPhrase {
                    span: Span::new(start, end),
                    root: end,
                });
                i = end + 1;
            }
            None => i += 1,
        }
    }
    out
}

/// One edge `(i, i+1, "ADJ")` per consecutive token pair.
pub fn adjacency_edges(tokens: &[Token]) -> Vec<DependencyEdge> {
    (1..tokens.len())
        .map(|i| DependencyEdge {
            head: i - 1,
            dependent: i,
            label: "ADJ".into(),
        })
        .collect()
}

/// A gold fact over token indices of one sentence. Relation indices are in
/// reading order of the fact, which is not always sentence order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldFact {
    pub head: Span,
    pub relation: Vec<usize>,
    pub tail: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotatedSentence {
    /// `(patent id, sentence index)` when known.
    pub id: Option<(String, usize)>,
    pub tokens: Vec<Token>,
    pub deps: Vec<DependencyEdge>,
    pub facts: Vec<GoldFact>,
}

impl AnnotatedSentence {
    pub fn text(&self) -> String {
        join_tokens(&self.tokens)
    }

    /// The fact as display strings `(head, relation, tail)`.
    pub fn fact_strings(&self, fact: &GoldFact) -> (String, String, String) {
        let rel: Vec<&str> = fact
            .relation
            .iter()
            .map(|&i| self.tokens[i].text.as_str())
            .collect();
        (
            fact.head.text(&self.tokens),
            rel.join(" "),
            fact.tail.text(&self.tokens),
        )
    }

    /// Distinct entity spans referenced by the gold facts, ordered by start.
    pub fn entity_spans(&self) -> Vec<Span> {
        let mut spans: Vec<Span> = self
            .facts
            .iter()
            .flat_map(|f| [f.head, f.tail])
            .collect();
        spans.sort();
        spans.dedup();
        spans
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for f in &self.facts {
            for span in [f.head, f.tail] {
                if span.start > span.end || span.end >= n {
                    return Err(Error::Data(format!(
                        "fact span {span} out of bounds for {n} tokens"
                    )));
                }
            }
            if let Some(&i) = f.relation.iter().find(|&&i| i >= n) {
                return Err(Error::Data(format!(
                    "relation index {i} out of bounds for {n} tokens"
                )));
            }
        }
        Ok(())
    }
}

fn parse_span(s: &str) -> Option<Span> {
    let (a, b) = s.split_once('-')?;
    let a: usize = a.trim().parse().ok()?;
    let b: usize = b.trim().parse().ok()?;
    (a <= b).then(|| Span::new(a, b))
}

fn parse_indices(s: &str) -> Option<Vec<usize>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

/// Parse annotation TSV: one token per line
/// `index<TAB>text<TAB>pos<TAB>dep_head<TAB>dep_label` (`_` when absent),
/// blank lines between sentences, `#FACT<TAB>head<TAB>rel<TAB>tail` fact lines
/// with inclusive `start-end` spans and comma-separated relation indices, and
/// an optional `#SENT<TAB>patent<TAB>index` id line.
pub fn parse_annotations(input: &str, path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let err = |line: usize, message: String| Error::Line {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut cur = AnnotatedSentence::default();
    let mut fact_lines: Vec<(usize, GoldFact)> = Vec::new();

    let finish = |cur: &mut AnnotatedSentence,
                      fact_lines: &mut Vec<(usize, GoldFact)>,
                      out: &mut Vec<AnnotatedSentence>|
     -> Result<()> {
        if cur.tokens.is_empty() && fact_lines.is_empty() && cur.id.is_none() {
            return Ok(());
        }
        let n = cur.tokens.len();
        for (line, f) in fact_lines.drain(..) {
            let bad = [f.head, f.tail].iter().any(|s| s.end >= n)
                || f.relation.iter().any(|&i| i >= n);
            if bad {
                return Err(err(line, format!("fact index out of bounds for {n} tokens")));
            }
            cur.facts.push(f);
        }
        // offsets from a single-space join
        let mut offset = 0;
        for t in cur.tokens.iter_mut() {
            let len = t.text.chars().count();
            t.start = offset;
            t.end = offset + len;
            offset += len + 1;
        }
        out.push(std::mem::take(cur));
        Ok(())
    };

    for (lineno, raw) in input.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut cur, &mut fact_lines, &mut out)?;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols[0] == "#FACT" {
            if cols.len() != 4 {
                return Err(err(line_no, format!("#FACT needs 3 fields, got {}", cols.len() - 1)));
            }
            let head = parse_span(cols[1])
                .ok_or_else(|| err(line_no, format!("bad head span `{}`", cols[1])))?;
            let relation = parse_indices(cols[2])
                .ok_or_else(|| err(line_no, format!("bad relation indices `{}`", cols[2])))?;
            let tail = parse_span(cols[3])
                .ok_or_else(|| err(line_no, format!("bad tail span `{}`", cols[3])))?;
            fact_lines.push((line_no, GoldFact { head, relation, tail }));
            continue;
        }
        if cols[0] == "#SENT" {
            if cols.len() != 3 {
                return Err(err(line_no, "#SENT needs 2 fields".into()));
            }
            let idx = cols[2]
                .parse()
                .map_err(|_| err(line_no, format!("bad sentence index `{}`", cols[2])))?;
            cur.id = Some((cols[1].to_string(), idx));
            continue;
        }
        if cols[0].starts_with('#') {
            continue;
        }
        if cols.len() != 5 {
            return Err(err(line_no, format!("expected 5 columns, got {}", cols.len())));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| err(line_no, format!("bad token index `{}`", cols[0])))?;
        if index != cur.tokens.len() {
            return Err(err(
                line_no,
                format!("token index {index}, expected {}", cur.tokens.len()),
            ));
        }
        if cols[1].is_empty() {
            return Err(err(line_no, "empty token text".into()));
        }
        let pos = cols[2];
        if pos_index(pos).is_none() {
            return Err(err(line_no, format!("unknown POS tag `{pos}`")));
        }
        match (cols[3], cols[4]) {
            ("_", "_") => {}
            (h, label) => {
                let head: usize = h
                    .parse()
                    .map_err(|_| err(line_no, format!("bad dependency head `{h}`")))?;
                if dep_index(label).is_none() {
                    return Err(err(line_no, format!("unknown dependency label `{label}`")));
                }
                cur.deps.push(DependencyEdge {
                    head,
                    dependent: index,
                    label: label.to_string(),
                });
            }
        }
        let mut tok = Token::new(cols[1], index, 0, 0);
        tok.pos = pos.to_string();
        cur.tokens.push(tok);
    }
    finish(&mut cur, &mut fact_lines, &mut out)?;
    for s in &out {
        if let Some(d) = s.deps.iter().find(|d| d.head >= s.tokens.len()) {
            return Err(Error::Data(format!(
                "{}: dependency head {} out of bounds",
                path.display(),
                d.head
            )));
        }
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_annotations(&text, path)
}

pub fn format_annotations(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for (k, s) in sentences.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        if let Some((patent, idx)) = &s.id {
            out.push_str(&format!("#SENT\t{patent}\t{idx}\n"));
        }
        let heads: HashMap<usize, &DependencyEdge> =
            s.deps.iter().map(|d| (d.dependent, d)).collect();
        for t in &s.tokens {
            let (h, l) = match heads.get(&t.index) {
                Some(d) => (d.head.to_string(), d.label.as_str()),
                None => ("_".to_string(), "_"),
            };
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", t.index, t.text, t.pos, h, l));
        }
        for f in &s.facts {
            let rel: Vec<String> = f.relation.iter().map(|i| i.to_string()).collect();
            out.push_str(&format!("#FACT\t{}\t{}\t{}\n", f.head, rel.join(","), f.tail));
        }
    }
    out
}

pub fn save_annotations(path: impl AsRef<Path>, sentences: &[AnnotatedSentence]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_annotations(sentences).as_bytes())?;
    Ok(())
}

/// Parse the readable annotation format: one pre-tokenized sentence per
/// unindented line, followed by indented `head | relation | tail` fact lines.
/// Entities and relation words resolve to token positions; `word@k` picks the
/// k-th occurrence (1-based). Without `@k` an entity resolves to its first
/// occurrence and a relation word to the occurrence closest to the span
/// between the two entities, then closest to the tail. A `> patent index`
/// line sets the id of the next sentence. POS tags come from
/// [`LexiconTagger`].
pub fn parse_readable_annotations(input: &str, path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let err = |line: usize, message: String| Error::Line {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out: Vec<AnnotatedSentence> = Vec::new();
    let mut pending_id = None;
    for (lineno, raw) in input.lines().enumerate() {
        let line_no = lineno + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        if let Some(rest) = raw.strip_prefix('>') {
            let mut parts = rest.split_whitespace();
            let (Some(patent), Some(idx), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(line_no, "id line needs `> patent index`".into()));
            };
            let idx = idx
                .parse()
                .map_err(|_| err(line_no, format!("bad sentence index `{idx}`")))?;
            pending_id = Some((patent.to_string(), idx));
            continue;
        }
        if !raw.starts_with(char::is_whitespace) {
            let mut tokens: Vec<Token> = Vec::new();
            let mut offset = 0;
            for (i, w) in raw.split_whitespace().enumerate() {
                let len = w.chars().count();
                tokens.push(Token::new(w, i, offset, offset + len));
                offset += len + 1;
            }
            LexiconTagger.tag_tokens(&mut tokens);
            out.push(AnnotatedSentence {
                id: pending_id.take(),
                tokens,
                deps: Vec::new(),
                facts: Vec::new(),
            });
            continue;
        }
        let sentence = out
            .last_mut()
            .ok_or_else(|| err(line_no, "fact line before any sentence".into()))?;
        let fields: Vec<&str> = raw.trim().split('|').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(line_no, format!("fact needs 3 fields, got {}", fields.len())));
        }
        let head = resolve_entity(&sentence.tokens, fields[0]).map_err(|m| err(line_no, m))?;
        let tail = resolve_entity(&sentence.tokens, fields[2]).map_err(|m| err(line_no, m))?;
        let relation =
            resolve_relation(&sentence.tokens, fields[1], head, tail).map_err(|m| err(line_no, m))?;
        sentence.facts.push(GoldFact {
            head,
            relation,
            tail,
        });
    }
    for s in &out {
        s.validate()?;
    }
    Ok(out)
}

pub fn load_readable_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_readable_annotations(&text, path)
}

fn split_occurrence(s: &str) -> std::result::Result<(&str, Option<usize>), String> {
    match s.rsplit_once('@') {
        Some((text, k)) => {
            let k: usize = k.parse().map_err(|_| format!("bad occurrence in `{s}`"))?;
            if k == 0 {
                return Err(format!("occurrences count from 1 in `{s}`"));
            }
            Ok((text, Some(k)))
        }
        None => Ok((s, None)),
    }
}

fn resolve_entity(tokens: &[Token], field: &str) -> std::result::Result<Span, String> {
    let (text, k) = split_occurrence(field)?;
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err("empty entity".into());
    }
    let starts: Vec<usize> = (0..tokens.len().saturating_sub(words.len() - 1))
        .filter(|&i| words.iter().enumerate().all(|(j, w)| tokens[i + j].text == *w))
        .collect();
    let start = starts
        .get(k.unwrap_or(1) - 1)
        .ok_or_else(|| format!("entity `{field}` not found"))?;
    Ok(Span::new(*start, start + words.len() - 1))
}

fn resolve_relation(
    tokens: &[Token],
    field: &str,
    head: Span,
    tail: Span,
) -> std::result::Result<Vec<usize>, String> {
    let lo = head.start.min(tail.start);
    let hi = head.end.max(tail.end);
    let gap = |i: usize| {
        if i < lo {
            lo - i
        } else {
            i.saturating_sub(hi)
        }
    };
    let to_tail = |i: usize| {
        if i < tail.start {
            tail.start - i
        } else {
            i.saturating_sub(tail.end)
        }
    };
    let mut chosen = Vec::new();
    for w in field.split_whitespace() {
        let (text, k) = split_occurrence(w)?;
        let all: Vec<usize> = (0..tokens.len()).filter(|&i| tokens[i].text == text).collect();
        let pick = match k {
            Some(k) => all.get(k - 1).copied(),
            None => all
                .iter()
                .copied()
                .filter(|&i| !head.contains(i) && !tail.contains(i) && !chosen.contains(&i))
                .min_by_key(|&i| (gap(i), to_tail(i), i)),
        };
        let i = pick.ok_or_else(|| format!("relation word `{w}` not found"))?;
        if head.contains(i) || tail.contains(i) {
            return Err(format!("relation word `{w}` lies inside an entity"));
        }
        chosen.push(i);
    }
    Ok(chosen)
}
