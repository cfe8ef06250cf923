//! Patent documents: the canonical JSON form, an adapter for saved patent
//! web pages, section-heading filtering, sentence segmentation and the
//! per-sentence and per-patent length limits.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};

use crate::clean::{clean_claim, clean_with_report, protect_abbreviations, CleanConfig, TextKind};
use crate::error::{Error, Result};
use crate::lingo::tokenize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub text: String,
    pub is_dependent: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentDocument {
    pub patent_id: String,
    pub title: String,
    /// `(heading, paragraphs)` in source order; headings lowercased and trimmed.
    pub sections: Vec<(String, Vec<String>)>,
    pub claims: Vec<Claim>,
}

pub fn normalize_heading(heading: &str) -> String {
    heading.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

static CLAIM_REFERENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bclaims?\s+\d+").unwrap());

/// Byte offset of a serde_json error position (1-based line and column).
fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in input.split(|b| *b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(input.len());
        }
        offset += l.len() + 1;
    }
    input.len()
}

/// Parse the canonical patent JSON. A section headed `claim` or `claims`
/// is moved into the claim list, flagging claims that cite another claim as
/// dependent.
pub fn parse_patent_json(bytes: &[u8]) -> Result<PatentDocument> {
    #[derive(Deserialize)]
    struct Raw {
        patent_id: Option<String>,
        #[serde(default)]
        title: String,
        #[serde(default)]
        sections: Vec<(String, Vec<String>)>,
        #[serde(default)]
        claims: Vec<Claim>,
    }
    let raw: Raw = serde_json::from_slice(bytes).map_err(|e| {
        if e.is_data() {
            Error::Schema(e.to_string())
        } else {
            Error::Parse {
                offset: byte_offset(bytes, e.line(), e.column()),
                message: e.to_string(),
            }
        }
    })?;
    let patent_id = raw
        .patent_id
        .filter(|p| !p.trim().is_empty())
        .ok_or_else(|| Error::Schema("missing patent_id".into()))?;
    let mut doc = PatentDocument {
        patent_id,
        title: raw.title,
        sections: Vec::new(),
        claims: raw.claims,
    };
    for (heading, paragraphs) in raw.sections {
        let heading = normalize_heading(&heading);
        if heading == "claim" || heading == "claims" {
            doc.claims.extend(paragraphs.into_iter().map(|text| Claim {
                is_dependent: CLAIM_REFERENCE.is_match(&text),
                text,
            }));
        } else {
            doc.sections.push((heading, paragraphs));
        }
    }
    Ok(doc)
}

pub fn patent_to_json(doc: &PatentDocument) -> String {
    serde_json::to_string(doc).expect("patent documents always serialize")
}

// ---------------------------------------------------------------------------
// Saved web pages
// ---------------------------------------------------------------------------

fn selector(s: &str) -> Selector {
    Selector::parse(s).expect("static selector")
}

fn has_class(el: &ElementRef, class: &str) -> bool {
    el.value()
        .attr("class")
        .is_some_and(|c| c.split_whitespace().any(|x| x == class))
}

fn is_equation(el: &ElementRef) -> bool {
    matches!(el.value().name(), "maths" | "math") || has_class(el, "maths")
}

fn collect_text(el: ElementRef, out: &mut String) {
    for child in el.children() {
        if let Some(t) = child.value().as_text() {
            out.push_str(t);
        } else if let Some(e) = ElementRef::wrap(child) {
            if !is_equation(&e) {
                collect_text(e, out);
            }
        }
    }
}

fn element_text(el: ElementRef) -> String {
    let mut s = String::new();
    collect_text(el, &mut s);
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn walk_description(el: ElementRef, sections: &mut Vec<(String, Vec<String>)>) {
    for child in el.children() {
        let Some(e) = ElementRef::wrap(child) else {
            continue;
        };
        if is_equation(&e) {
            continue;
        }
        let name = e.value().name();
        if matches!(name, "heading" | "h1" | "h2" | "h3" | "h4") {
            sections.push((normalize_heading(&element_text(e)), Vec::new()));
        } else if name == "p" || has_class(&e, "description-paragraph") {
            let text = element_text(e);
            if !text.is_empty() {
                if sections.is_empty() {
                    sections.push(("description".into(), Vec::new()));
                }
                sections.last_mut().expect("non-empty").1.push(text);
            }
        } else {
            walk_description(e, sections);
        }
    }
}

/// Parse a saved patent web page. Requires a publication number and a
/// description block; title, abstract and claims are read when present.
/// Equation blocks (`<maths>`) are skipped.
pub fn parse_patent_html(bytes: &[u8]) -> Result<PatentDocument> {
    let text = String::from_utf8_lossy(bytes);
    let html = Html::parse_document(&text);

    let patent_id = html
        .select(&selector("[itemprop=publicationNumber]"))
        .next()
        .map(element_text)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::MissingLandmark("[itemprop=publicationNumber]".into()))?;
    let description = html
        .select(&selector("section[itemprop=description], div.description"))
        .next()
        .ok_or_else(|| Error::MissingLandmark("section[itemprop=description]".into()))?;

    let title = html
        .select(&selector("[itemprop=title]"))
        .next()
        .or_else(|| html.select(&selector("title")).next())
        .map(element_text)
        .unwrap_or_default();

    let mut sections = Vec::new();
    if let Some(abs) = html.select(&selector("div.abstract")).next() {
        let text = element_text(abs);
        if !text.is_empty() {
            sections.push(("abstract".to_string(), vec![text]));
        }
    }
    walk_description(description, &mut sections);

    let mut claims = Vec::new();
    let claim_sel = selector("div.claim, div.claim-dependent");
    for el in html.select(&claim_sel) {
        let nested = el.ancestors().filter_map(ElementRef::wrap).any(|a| {
            a.value().name() == "div" && (has_class(&a, "claim") || has_class(&a, "claim-dependent"))
        });
        if nested {
            continue;
        }
        let text = element_text(el);
        if !text.is_empty() {
            claims.push(Claim {
                text,
                is_dependent: has_class(&el, "claim-dependent"),
            });
        }
    }
    Ok(PatentDocument {
        patent_id,
        title,
        sections,
        claims,
    })
}

// ---------------------------------------------------------------------------
// Heading filter
// ---------------------------------------------------------------------------

/// Section headings whose content is discarded outright.
pub const DEFAULT_DISCARD_HEADINGS: &[&str] = &[
    "background of the invention",
    "background",
    "background art",
    "background of the disclosure",
    "background and summary of the invention",
    "description of the related art",
    "description of related art",
    "related art",
    "prior art",
    "brief description of the drawings",
    "brief description of the drawing",
    "brief description of drawings",
    "description of the drawings",
    "cross-reference to related applications",
    "cross reference to related applications",
    "cross-reference to related application",
    "related applications",
    "statement regarding federally sponsored research or development",
    "incorporation by reference",
    "best mode for carrying out the invention",
    "examples",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadingFilter {
    pub discard_exact: HashSet<String>,
    pub discard_terms: Vec<String>,
    pub max_heading_length: usize,
    pub numeric_trigger: bool,
}

impl Default for HeadingFilter {
    fn default() -> Self {
        HeadingFilter {
            discard_exact: DEFAULT_DISCARD_HEADINGS.iter().map(|s| s.to_string()).collect(),
            discard_terms: vec!["example".into(), "fig".into()],
            max_heading_length: 12,
            numeric_trigger: true,
        }
    }
}

impl HeadingFilter {
    /// Add headings from a discard-list file: one heading per line, `#`
    /// starts a comment.
    pub fn extend_from_list(&mut self, text: &str) {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            let h = normalize_heading(line);
            if !h.is_empty() {
                self.discard_exact.insert(h);
            }
        }
    }

    pub fn is_discardable(&self, heading: &str) -> bool {
        is_discardable_heading(heading, self)
    }
}

pub fn is_discardable_heading(heading: &str, filter: &HeadingFilter) -> bool {
    let h = normalize_heading(heading);
    filter.discard_exact.contains(&h)
        || filter.discard_terms.iter().any(|t| h.contains(t.as_str()))
        || (filter.numeric_trigger && h.chars().any(|c| c.is_ascii_digit()))
        || h.split_whitespace().count() > filter.max_heading_length
}

// ---------------------------------------------------------------------------
// Sentences
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSentence {
    pub text: String,
    pub patent_id: String,
    pub section_heading: String,
    pub sentence_index: usize,
}

/// Split a paragraph at sentence-final `.`, `?` or `!` (followed by space and
/// a non-lowercase character, or by the end), and after `:`, `;` and line
/// breaks. Delimiters stay with the segment they end.
pub fn segment_sentences(paragraph: &str) -> Vec<String> {
    let chars: Vec<char> = paragraph.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut flush = |cur: &mut String| {
        let t = cur.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
        cur.clear();
    };
    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            flush(&mut cur);
            continue;
        }
        cur.push(c);
        let boundary = match c {
            ':' | ';' => true,
            '.' | '?' | '!' => {
                let rest = &chars[i + 1..];
                match rest.first() {
                    None => true,
                    Some(w) if w.is_whitespace() => rest
                        .iter()
                        .find(|c| !c.is_whitespace())
                        .is_none_or(|n| !n.is_lowercase()),
                    _ => false,
                }
            }
            _ => false,
        };
        if boundary {
            flush(&mut cur);
        }
    }
    flush(&mut cur);
    out
}

pub const MAX_SENTENCE_TOKENS: usize = 100;
pub const MAX_PATENT_SENTENCES: usize = 400;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LengthFilterReport {
    pub kept: Vec<RawSentence>,
    pub dropped_long: usize,
    /// Patents dropped whole for exceeding the sentence cap.
    pub dropped_patents: Vec<String>,
}

/// Keep sentences with fewer than 100 tokens; drop a patent entirely when it
/// keeps more than 400. Sentence indices are renumbered per patent.
pub fn apply_length_filters(
    sentences: Vec<RawSentence>,
    token_counter: impl Fn(&str) -> usize,
) -> LengthFilterReport {
    let mut report = LengthFilterReport::default();
    let mut by_patent: BTreeMap<String, Vec<RawSentence>> = BTreeMap::new();
    let mut order = Vec::new();
    for s in sentences {
        if token_counter(&s.text) >= MAX_SENTENCE_TOKENS {
            report.dropped_long += 1;
            continue;
        }
        if !by_patent.contains_key(&s.patent_id) {
            order.push(s.patent_id.clone());
        }
        by_patent.entry(s.patent_id.clone()).or_default().push(s);
    }
    for pid in order {
        let group = by_patent.remove(&pid).unwrap_or_default();
        if group.len() > MAX_PATENT_SENTENCES {
            report.dropped_patents.push(pid);
            continue;
        }
        for (i, mut s) in group.into_iter().enumerate() {
            s.sentence_index = i;
            report.kept.push(s);
        }
    }
    report
}

pub fn count_tokens(text: &str) -> usize {
    tokenize(text).len()
}

fn mix_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

/// Keep one randomly chosen paragraph per section. Deterministic per
/// `(seed, patent_id)`.
pub fn sample_one_paragraph_per_section(doc: &PatentDocument, seed: u64) -> PatentDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &doc.patent_id));
    let sections = doc
        .sections
        .iter()
        .map(|(h, paras)| {
            let kept = if paras.is_empty() {
                Vec::new()
            } else {
                vec![paras[rng.random_range(0..paras.len())].clone()]
            };
            (h.clone(), kept)
        })
        .collect();
    PatentDocument {
        sections,
        ..doc.clone()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IngestReport {
    pub sections_kept: usize,
    pub sections_discarded: Vec<String>,
    pub claim_warnings: usize,
}

/// Segment and clean every retained section, plus the title and claims, into
/// raw sentences (before length filtering).
pub fn document_sentences(
    doc: &PatentDocument,
    filter: &HeadingFilter,
    config: &CleanConfig,
) -> (Vec<RawSentence>, IngestReport) {
    let mut out = Vec::new();
    let mut report = IngestReport::default();
    let push = |text: String, heading: &str, out: &mut Vec<RawSentence>| {
        if !text.is_empty() {
            out.push(RawSentence {
                sentence_index: out.len(),
                text,
                patent_id: doc.patent_id.clone(),
                section_heading: heading.to_string(),
            });
        }
    };
    if !doc.title.trim().is_empty() {
        let t = clean_with_report(&doc.title, TextKind::Body, config).text;
        push(t, "title", &mut out);
    }
    for (heading, paragraphs) in &doc.sections {
        if filter.is_discardable(heading) {
            report.sections_discarded.push(heading.clone());
            continue;
        }
        report.sections_kept += 1;
        for p in paragraphs {
            for s in segment_sentences(&protect_abbreviations(p, config)) {
                let t = clean_with_report(&s, TextKind::Body, config).text;
                push(t, heading, &mut out);
            }
        }
    }
    for claim in &doc.claims {
        // drop the claim number first so segmentation does not split on it
        let unnumbered = clean_claim(&claim.text, false).text;
        let protected = protect_abbreviations(&unnumbered, config);
        for (k, s) in segment_sentences(&protected).into_iter().enumerate() {
            // only the opening segment carries the claim number and reference
            let kind = TextKind::Claim {
                is_dependent: claim.is_dependent && k == 0,
            };
            let c = clean_with_report(&s, kind, config);
            if c.warning.is_some() {
                report.claim_warnings += 1;
            }
            push(c.text, "claim", &mut out);
        }
    }
    (out, report)
}
