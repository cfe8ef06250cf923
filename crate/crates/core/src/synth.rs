//! Synthetic data with known structure: annotated sentences whose facts follow
//! fixed templates, patent documents built from them, and random fact sets
//! for knowledge-base tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Claim, PatentDocument};
use crate::extract::{Fact, FactSpans};
use crate::lingo::{AnnotatedSentence, GoldFact, LexiconTagger, PosTagger, Span, Token};

const ADJECTIVES: &[&str] = &[
    "radial", "central", "axial", "thermal", "flexible", "conductive", "porous", "hydraulic",
    "metallic", "elastic", "electrical", "lateral", "vertical", "helical", "cylindrical",
];
const MODIFIERS: &[&str] = &["air", "heat", "drive", "control", "support", "fluid", "power", "signal"];
const NOUNS: &[&str] = &[
    "rotor", "fan", "shaft", "hub", "blade", "motor", "impeller", "duct", "valve", "pump",
    "chamber", "nozzle", "sensor", "controller", "frame", "plate", "cover", "spring", "seal",
    "gear", "wheel", "cavity", "inlet", "outlet", "filter", "panel", "bracket", "sleeve",
    "flange", "piston", "cylinder", "diffuser", "vane", "rim", "coil", "magnet", "stator",
    "board", "circuit", "channel", "port", "tube", "pipe", "wall", "lid", "cap", "ring", "core",
    "member", "strip", "layer", "substrate", "film", "wafer", "electrode", "module", "unit",
    "assembly", "device", "element",
];
const DETERMINERS: &[&str] = &["the", "a", "this", "each"];
const VERBS: &[&str] = &[
    "comprises", "includes", "drives", "supports", "connects", "engages", "surrounds",
    "contains", "defines", "receives", "holds", "carries", "generates", "produces", "controls",
    "transmits", "reduces", "cools", "heats", "directs",
];
const INTRANSITIVE: &[&str] = &["extends", "rotates", "slides", "moves", "flows", "passes", "rests", "lies"];
const PARTICIPLES: &[&str] = &[
    "mounted", "attached", "coupled", "connected", "secured", "disposed", "positioned", "fixed",
    "formed", "arranged",
];
const PREPOSITIONS: &[&str] = &["on", "to", "in", "within", "at", "with"];
const FRONTED: &[&str] = &["through", "into", "on", "within", "along"];

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    words: Vec<String>,
    facts: Vec<GoldFact>,
}

impl Builder<'_> {
    fn word(&mut self, w: &str) -> usize {
        self.words.push(w.to_string());
        self.words.len() - 1
    }

    fn pick(&mut self, list: &[&str]) -> usize {
        let w = *list.choose(self.rng).expect("non-empty list");
        self.word(w)
    }

    fn entity(&mut self) -> Span {
        let start = self.pick(DETERMINERS);
        if self.rng.random_bool(0.35) {
            self.pick(ADJECTIVES);
        }
        if self.rng.random_bool(0.25) {
            self.pick(MODIFIERS);
        }
        let end = self.pick(NOUNS);
        Span::new(start, end)
    }

    fn fact(&mut self, head: Span, rel: Vec<usize>, tail: Span) {
        self.facts.push(GoldFact {
            head,
            relation: rel,
            tail,
        });
    }
}

/// Number of sentence templates used by [`synthetic_sentence`].
pub const TEMPLATES: usize = 7;

/// One annotated sentence from template `template % TEMPLATES`.
pub fn synthetic_sentence_from(template: usize, rng: &mut ChaCha8Rng) -> AnnotatedSentence {
    let mut b = Builder {
        rng,
        words: Vec::new(),
        facts: Vec::new(),
    };
    match template % TEMPLATES {
        0 => {
            // E1 V E2 .
            let e1 = b.entity();
            let v = b.pick(VERBS);
            let e2 = b.entity();
            b.fact(e1, vec![v], e2);
        }
        1 => {
            // E1 V E2 and E3 .
            let e1 = b.entity();
            let v = b.pick(VERBS);
            let e2 = b.entity();
            b.word("and");
            let e3 = b.entity();
            b.fact(e1, vec![v], e2);
            b.fact(e1, vec![v], e3);
        }
        2 => {
            // E1 is VBN P E2 .
            let e1 = b.entity();
            let is = b.word("is");
            let vbn = b.pick(PARTICIPLES);
            let p = b.pick(PREPOSITIONS);
            let e2 = b.entity();
            b.fact(e1, vec![is, vbn, p], e2);
        }
        3 => {
            // E1 V E2 of E3 .
            let e1 = b.entity();
            let v = b.pick(VERBS);
            let e2 = b.entity();
            let of = b.word("of");
            let e3 = b.entity();
            b.fact(e1, vec![v], e2);
            b.fact(e2, vec![of], e3);
        }
        4 => {
            // E1 , which V E2 , V' E3 .
            let e1 = b.entity();
            b.word(",");
            b.word("which");
            let v = b.pick(VERBS);
            let e2 = b.entity();
            b.word(",");
            let v2 = b.pick(VERBS);
            let e3 = b.entity();
            b.fact(e1, vec![v], e2);
            b.fact(e1, vec![v2], e3);
        }
        5 => {
            // E0 V E2 P which E1 Vi .   (E1 :: Vi P :: E2)
            let e0 = b.entity();
            let v = b.pick(VERBS);
            let e2 = b.entity();
            let p = b.pick(FRONTED);
            b.word("which");
            let e1 = b.entity();
            let vi = b.pick(INTRANSITIVE);
            b.fact(e0, vec![v], e2);
            b.fact(e1, vec![vi, p], e2);
        }
        _ => {
            // E1 V E2 NUM L .   (E2 ::  :: NUM L)
            let e1 = b.entity();
            let v = b.pick(VERBS);
            let e2 = b.entity();
            let n = b.rng.random_range(2..=60).to_string();
            let num = b.word(&n);
            let letter = b.pick(&["a", "b", "c"]);
            b.fact(e1, vec![v], e2);
            b.fact(e2, vec![], Span::new(num, letter));
        }
    }
    b.word(".");
    let mut first = b.words[0].clone();
    if let Some(c) = first.get(0..1) {
        first = c.to_uppercase() + &first[1..];
    }
    b.words[0] = first;

    let mut tokens: Vec<Token> = Vec::with_capacity(b.words.len());
    let mut offset = 0;
    for (i, w) in b.words.iter().enumerate() {
        let len = w.chars().count();
        tokens.push(Token::new(w.clone(), i, offset, offset + len));
        offset += len + 1;
    }
    LexiconTagger.tag_tokens(&mut tokens);
    AnnotatedSentence {
        id: None,
        tokens,
        deps: Vec::new(),
        facts: b.facts,
    }
}

pub fn synthetic_sentence(rng: &mut ChaCha8Rng) -> AnnotatedSentence {
    let t = rng.random_range(0..TEMPLATES);
    synthetic_sentence_from(t, rng)
}

/// `n` annotated sentences, deterministic per seed.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<AnnotatedSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| synthetic_sentence(&mut rng)).collect()
}

/// Surface text of tokens with punctuation attached to the previous word.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && !matches!(t.text.as_str(), "," | "." | ";" | ":") {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

/// Patents whose sections hold synthetic sentences, grouped into paragraphs
/// of up to four sentences.
pub fn synthetic_patents(n_patents: usize, sentences_per_patent: usize, seed: u64) -> Vec<PatentDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let headings = ["abstract", "summary of the invention", "detailed description"];
    (0..n_patents)
        .map(|p| {
            let mut sections: Vec<(String, Vec<String>)> =
                headings.iter().map(|h| (h.to_string(), Vec::new())).collect();
            let mut para = Vec::new();
            for k in 0..sentences_per_patent {
                para.push(detokenize(&synthetic_sentence(&mut rng).tokens));
                if para.len() == 4 || k + 1 == sentences_per_patent {
                    let s = rng.random_range(0..sections.len());
                    sections[s].1.push(para.join(" "));
                    para.clear();
                }
            }
            sections.retain(|(_, p)| !p.is_empty());
            PatentDocument {
                patent_id: format!("SYN{p:05}"),
                title: format!("Fan assembly {p}"),
                sections,
                claims: vec![Claim {
                    text: "1. A fan comprising a rotor.".into(),
                    is_dependent: false,
                }],
            }
        })
        .collect()
}

/// Random facts over a skewed entity and relation vocabulary, for knowledge
/// base tests. Facts are spread over `n_patents` patents with up to 20
/// sentences each.
pub fn synthetic_facts(n: usize, n_patents: usize, seed: u64) -> Vec<Fact> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entities = Vec::new();
    for a in ADJECTIVES.iter().take(6) {
        for m in MODIFIERS.iter().take(4) {
            for n in NOUNS {
                entities.push(format!("{a} {m} {n}"));
            }
        }
    }
    for n in NOUNS {
        entities.push(n.to_string());
        for a in ADJECTIVES {
            entities.push(format!("{a} {n}"));
        }
    }
    let mut relations: Vec<String> = VERBS.iter().map(|v| v.to_string()).collect();
    for p in PARTICIPLES {
        for q in PREPOSITIONS {
            relations.push(format!("is {p} {q}"));
        }
    }
    let skewed = |rng: &mut ChaCha8Rng, len: usize| {
        let u: f64 = rng.random();
        ((u * u * u) * len as f64) as usize % len
    };
    (0..n)
        .map(|_| {
            let h = skewed(&mut rng, entities.len());
            let mut t = skewed(&mut rng, entities.len());
            if t == h {
                t = (t + 1) % entities.len();
            }
            let det = DETERMINERS.choose(&mut rng).expect("non-empty");
            let rel = if rng.random_bool(0.02) {
                Vec::new()
            } else {
                relations[skewed(&mut rng, relations.len())]
                    .split(' ')
                    .map(String::from)
                    .collect()
            };
            Fact {
                head: format!("{det} {}", entities[h]),
                rel,
                tail: entities[t].clone(),
                patent: format!("SYN{:05}", rng.random_range(0..n_patents.max(1))),
                sent: rng.random_range(0..20),
                spans: FactSpans::default(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lingo::chunk_noun_phrases;

    #[test]
    fn entities_are_noun_phrases() {
        for s in synthetic_corpus(500, 3) {
            s.validate().unwrap();
            let nps: Vec<Span> = chunk_noun_phrases(&s.tokens).iter().map(|n| n.span).collect();
            for e in s.entity_spans() {
                assert!(nps.contains(&e), "{} {:?} {:?}", s.text(), e, nps);
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(synthetic_corpus(20, 9), synthetic_corpus(20, 9));
        assert_eq!(synthetic_facts(50, 5, 1), synthetic_facts(50, 5, 1));
        assert_eq!(synthetic_patents(2, 7, 4), synthetic_patents(2, 7, 4));
    }

    #[test]
    fn all_templates_appear() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 0..TEMPLATES {
            let s = synthetic_sentence_from(t, &mut rng);
            assert!(!s.facts.is_empty());
        }
    }
}
