//! Sentence cleaning rules for patent text: abbreviation protection, bracket
//! elimination, `and/or` normalization, punctuation stripping and the
//! claim-specific trimming of numbers and claim references.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lingo::{chunk_noun_phrases_with, tokenize, ChunkOptions, LexiconTagger, PosTagger};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StripMode {
    Delete,
    #[default]
    Space,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub abbreviations: Vec<String>,
    pub bracket_passes: usize,
    pub strip_chars: Vec<char>,
    pub strip_mode: StripMode,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            abbreviations: ["FIG.", "FIGS.", "Pat.", "No.", "cc.", "wt.", "mg.", "%."]
                .map(String::from)
                .to_vec(),
            bracket_passes: 3,
            strip_chars: vec!['\\', '-', '_'],
            strip_mode: StripMode::Space,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TextKind {
    Body,
    Claim { is_dependent: bool },
}

static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r" {2,}").unwrap());
static INNERMOST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\([^()]*\)|\{[^{}]*\}|\[[^\[\]]*\]|<[^<>]*>").unwrap()
});
static ANDOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\band/or\b").unwrap());
static CLAIM_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+\.\s*").unwrap());

fn collapse_spaces(text: &str) -> String {
    SPACES.replace_all(text, " ").into_owned()
}

/// Drop the trailing `.` of every configured abbreviation that starts at a
/// word boundary, so that sentence segmentation does not split there.
pub fn protect_abbreviations(text: &str, config: &CleanConfig) -> String {
    let mut abbrevs: Vec<&str> = config
        .abbreviations
        .iter()
        .map(String::as_str)
        .filter(|a| a.ends_with('.') && a.len() > 1)
        .collect();
    abbrevs.sort_by_key(|a| std::cmp::Reverse(a.len()));

    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    'scan: while i < text.len() {
        let boundary = text[..i]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        for a in &abbrevs {
            let needs_boundary = a.starts_with(|c: char| c.is_alphanumeric());
            if (boundary || !needs_boundary) && text[i..].starts_with(a) {
                out.push_str(&a[..a.len() - 1]);
                i += a.len();
                continue 'scan;
            }
        }
        let c = text[i..].chars().next().expect("char at boundary");
        out.push(c);
        i += c.len_utf8();
    }
    out
}

/// Remove innermost bracketed text, with its brackets, for `()`, `{}`, `[]`
/// and `<>`, `bracket_passes` times. Unmatched brackets survive.
pub fn remove_bracketed(text: &str, config: &CleanConfig) -> String {
    let mut cur = text.to_string();
    for _ in 0..config.bracket_passes.max(1) {
        cur = INNERMOST.replace_all(&cur, "").into_owned();
    }
    collapse_spaces(&cur)
}

pub fn normalize_andor(text: &str) -> String {
    ANDOR.replace_all(text, "and").into_owned()
}

/// Replace (or delete) the configured characters, collapse spaces and trim
/// leading whitespace.
pub fn strip_special_punct(text: &str, config: &CleanConfig) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if config.strip_chars.contains(&c) {
            if config.strip_mode == StripMode::Space {
                out.push(' ');
            }
        } else {
            out.push(c);
        }
    }
    collapse_spaces(&out).trim_start().to_string()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cleaned {
    pub text: String,
    pub warning: Option<String>,
}

/// Strip a leading claim number; for dependent claims also remove the text
/// from the end of the first noun phrase through the noun phrase that
/// contains the token `claim`.
pub fn clean_claim(text: &str, is_dependent: bool) -> Cleaned {
    let text = CLAIM_NUMBER.replace(text, "").into_owned();
    if !is_dependent {
        return Cleaned {
            text,
            warning: None,
        };
    }
    let mut tokens = tokenize(&text);
    LexiconTagger.tag_tokens(&mut tokens);
    let nps = chunk_noun_phrases_with(
        &tokens,
        ChunkOptions {
            split_reference_numerals: false,
        },
    );
    let claim_np = nps.iter().position(|np| {
        (np.span.start..=np.span.end).any(|i| tokens[i].text.eq_ignore_ascii_case("claim"))
    });
    match claim_np {
        Some(k) if k > 0 => {
            let cut_from = tokens[nps[0].span.end].end;
            let cut_to = tokens[nps[k].span.end].end;
            let byte = |c: usize| text.char_indices().nth(c).map_or(text.len(), |(b, _)| b);
            let mut out = text[..byte(cut_from)].to_string();
            out.push_str(&text[byte(cut_to)..]);
            Cleaned {
                text: out,
                warning: None,
            }
        }
        Some(_) => Cleaned {
            text,
            warning: Some("claim reference is the first noun phrase".into()),
        },
        None => Cleaned {
            text,
            warning: Some("dependent claim without a `claim` noun phrase".into()),
        },
    }
}

/// Full cleaning: abbreviations, brackets, `and/or`, punctuation, claim
/// trimming, then a final trim.
pub fn clean_with_report(text: &str, kind: TextKind, config: &CleanConfig) -> Cleaned {
    let t = protect_abbreviations(text, config);
    let t = remove_bracketed(&t, config);
    let t = normalize_andor(&t);
    let t = strip_special_punct(&t, config);
    let (t, warning) = match kind {
        TextKind::Body => (t, None),
        TextKind::Claim { is_dependent } => {
            let c = clean_claim(&t, is_dependent);
            (c.text, c.warning)
        }
    };
    Cleaned {
        text: collapse_spaces(t.trim()),
        warning,
    }
}

pub fn clean_pipeline(text: &str, kind: TextKind, config: &CleanConfig) -> String {
    clean_with_report(text, kind, config).text
}
