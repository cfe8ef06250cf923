//! From sentences to facts: Stage-1 entity identification, ordered pair
//! enumeration, Stage-2 relation tagging per marked pair, compound entities
//! and the exclusion filters.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::clean::{clean_pipeline, CleanConfig, TextKind};
use crate::corpus::RawSentence;
use crate::error::{Error, Result};
use crate::lingo::{
    chunk_noun_phrases, tokenize, AnnotatedSentence, LexiconTagger, NounPhrase, PosModel, PosTagger, Span, Token,
};
use crate::tagger::{
    make_stage1_example, make_stage2_examples, mark_pair, MarkedSentence, NegativeSampling,
    Stage1Tag, Stage2Tag, TaggerModel,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FactSpans {
    pub head: Span,
    pub tail: Span,
    /// Relation token indices in fact order.
    pub rel: Vec<usize>,
    /// Relation tokens were reordered from sentence order.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reversed: bool,
}

/// One extracted `head :: relation :: tail` fact with provenance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub head: String,
    pub rel: Vec<String>,
    pub tail: String,
    #[serde(default)]
    pub patent: String,
    #[serde(default)]
    pub sent: usize,
    #[serde(default)]
    pub spans: FactSpans,
}

impl Fact {
    pub fn relation(&self) -> String {
        self.rel.join(" ")
    }

    pub fn is_compound(&self) -> bool {
        self.rel.is_empty()
    }
}

impl std::fmt::Display for Fact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} :: {} :: {}", self.head, self.relation(), self.tail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostFilters {
    pub drop_said: bool,
    pub drop_hedges: bool,
    pub reject_pronouns: bool,
    pub drop_there_here: bool,
    pub reject_behaviour_links: bool,
    pub reject_numeric: bool,
}

impl Default for PostFilters {
    fn default() -> Self {
        PostFilters {
            drop_said: true,
            drop_hedges: true,
            reject_pronouns: true,
            drop_there_here: true,
            reject_behaviour_links: true,
            reject_numeric: true,
        }
    }
}

impl PostFilters {
    pub fn none() -> Self {
        PostFilters {
            drop_said: false,
            drop_hedges: false,
            reject_pronouns: false,
            drop_there_here: false,
            reject_behaviour_links: false,
            reject_numeric: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub max_entities_per_sentence: usize,
    /// Strict: every NP token must be tagged ENT. Lenient: more than half.
    pub require_full_ent_coverage: bool,
    pub post_filters: PostFilters,
    /// Replace `which`/`that` entities by the nearest preceding entity.
    pub resolve_relative_pronouns: bool,
    pub clean: CleanConfig,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            max_entities_per_sentence: 20,
            require_full_ent_coverage: true,
            post_filters: PostFilters::default(),
            resolve_relative_pronouns: true,
            clean: CleanConfig::default(),
        }
    }
}

/// NPs whose tokens are tagged ENT, all of them (strict) or more than half.
pub fn identify_entities(
    stage1_tags: &[Stage1Tag],
    noun_phrases: &[NounPhrase],
    strict: bool,
) -> Vec<Span> {
    let mut out: Vec<Span> = noun_phrases
        .iter()
        .filter(|np| {
            let ent = (np.span.start..=np.span.end)
                .filter(|&i| stage1_tags.get(i) == Some(&Stage1Tag::Ent))
                .count();
            if strict {
                ent == np.span.len()
            } else {
                2 * ent > np.span.len()
            }
        })
        .map(|np| np.span)
        .collect();
    out.sort();
    out
}

/// All ordered pairs of distinct entities, or `None` when the sentence has
/// more than `max_entities` entities.
pub fn enumerate_pairs(entities: &[Span], max_entities: usize) -> Option<Vec<(Span, Span)>> {
    if entities.len() > max_entities {
        return None;
    }
    let mut pairs = Vec::with_capacity(entities.len() * entities.len().saturating_sub(1));
    for (i, &h) in entities.iter().enumerate() {
        for (j, &t) in entities.iter().enumerate() {
            if i != j {
                pairs.push((h, t));
            }
        }
    }
    Some(pairs)
}

/// Order relation tokens for a pair. Tokens come in sentence order, except
/// when the head follows the tail and the relation continues right after the
/// tail (a preposition fronted before `which`): that run moves to the end, so
/// "a hole through which the shaft extends" reads `extends through`.
pub fn assemble_relation(tokens: &[Token], head: Span, tail: Span, rel: &[usize]) -> (Vec<usize>, bool) {
    let mut sorted: Vec<usize> = rel.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if head.start < tail.start {
        return (sorted, false);
    }
    let set: HashSet<usize> = sorted.iter().copied().collect();
    let mut k = tail.end + 1;
    while k < tokens.len() && tokens[k].text == "," && !set.contains(&k) {
        k += 1;
    }
    let mut run = Vec::new();
    while set.contains(&k) {
        run.push(k);
        k += 1;
    }
    if run.is_empty() || run.len() == sorted.len() {
        return (sorted, false);
    }
    let mut out: Vec<usize> = sorted.into_iter().filter(|i| !run.contains(i)).collect();
    out.extend(run);
    (out, true)
}

/// Relation tokens for one pair from the Stage-2 model, or `None` when no
/// token is tagged REL.
pub fn extract_pair(tokens: &[Token], pair: (Span, Span), stage2: &TaggerModel) -> Result<Option<(Vec<usize>, bool)>> {
    let marked = mark_pair(tokens, pair.0, pair.1)?;
    let tags = stage2.tag(&marked.tokens);
    let rel_tag = Stage2Tag::Rel.as_str();
    let rel: Vec<usize> = tags
        .iter()
        .zip(&marked.original)
        .filter_map(|(t, o)| if t == rel_tag { *o } else { None })
        .filter(|&i| !pair.0.contains(i) && !pair.1.contains(i))
        .collect();
    if rel.is_empty() {
        return Ok(None);
    }
    Ok(Some(assemble_relation(tokens, pair.0, pair.1, &rel)))
}

/// Pairs of entities with nothing between them form compound facts with an
/// empty relation, unless the second one opens with a determiner ("the
/// subject an effective amount" is two entities, not one).
pub fn compound_entity_facts(entities: &[Span], tokens: &[Token]) -> Vec<Fact> {
    const DETERMINERS: [&str; 8] = ["a", "an", "the", "this", "these", "those", "each", "said"];
    let mut sorted = entities.to_vec();
    sorted.sort();
    sorted
        .windows(2)
        .filter(|w| w[1].start == w[0].end + 1)
        .filter(|w| {
            let first = &tokens[w[1].start];
            !matches!(first.pos.as_str(), "DT" | "PDT" | "PRP$")
                && !DETERMINERS.contains(&first.text.to_lowercase().as_str())
        })
        .map(|w| fact_from_spans(tokens, w[0], &[], w[1], false))
        .collect()
}

fn fact_from_spans(tokens: &[Token], head: Span, rel: &[usize], tail: Span, reversed: bool) -> Fact {
    Fact {
        head: head.text(tokens),
        rel: rel.iter().map(|&i| tokens[i].text.clone()).collect(),
        tail: tail.text(tokens),
        patent: String::new(),
        sent: 0,
        spans: FactSpans {
            head,
            tail,
            rel: rel.to_vec(),
            reversed,
        },
    }
}

/// Assemble facts over the given entities, asking `stage2` for the tags of
/// each ordered pair. Used both with a trained model and with gold tags.
pub fn assemble_facts(
    tokens: &[Token],
    entities: &[Span],
    max_entities: usize,
    mut stage2: impl FnMut(Span, Span) -> Result<Option<Vec<usize>>>,
) -> Result<Option<Vec<Fact>>> {
    let Some(pairs) = enumerate_pairs(entities, max_entities) else {
        return Ok(None);
    };
    let mut facts = Vec::new();
    for (h, t) in pairs {
        if let Some(rel) = stage2(h, t)? {
            let rel: Vec<usize> = rel.into_iter().filter(|&i| !h.contains(i) && !t.contains(i)).collect();
            if !rel.is_empty() {
                let (order, reversed) = assemble_relation(tokens, h, t, &rel);
                facts.push(fact_from_spans(tokens, h, &order, t, reversed));
            }
        }
    }
    facts.extend(compound_entity_facts(entities, tokens));
    Ok(Some(facts))
}

/// Original token indices tagged REL in a Stage-2 tag sequence.
pub fn rel_from_stage2_tags(marked: &MarkedSentence, tags: &[Stage2Tag]) -> Vec<usize> {
    tags.iter()
        .zip(&marked.original)
        .filter_map(|(t, o)| if *t == Stage2Tag::Rel { *o } else { None })
        .collect()
}

fn original_span(marked: &MarkedSentence, span: Span) -> Option<Span> {
    Some(Span::new(marked.original[span.start]?, marked.original[span.end]?))
}

/// Gold facts of an annotated sentence as [`Fact`]s, relation in gold order.
pub fn gold_facts(sentence: &AnnotatedSentence) -> Vec<Fact> {
    sentence
        .facts
        .iter()
        .map(|f| fact_from_spans(&sentence.tokens, f.head, &f.relation, f.tail, false))
        .collect()
}

/// Generate the Stage-1 and Stage-2 training tags of a sentence, then
/// assemble facts from those tags alone. On consistent annotations this
/// returns the gold facts.
pub fn gold_round_trip(sentence: &AnnotatedSentence, seed: u64) -> Result<Vec<Fact>> {
    let stage1 = make_stage1_example(sentence)?;
    let entities = sentence.entity_spans();
    for e in &entities {
        if (e.start..=e.end).any(|i| stage1[i].1 != Stage1Tag::Ent) {
            return Err(Error::Data(format!("entity {e:?} is not tagged ENT")));
        }
    }
    let examples = make_stage2_examples(sentence, seed, NegativeSampling::All)?;
    let mut by_pair: HashMap<(Span, Span), Vec<usize>> = HashMap::new();
    for (marked, tags) in examples.positives.iter().chain(&examples.negatives) {
        let (Some(h), Some(t)) = (
            original_span(marked, marked.head_span),
            original_span(marked, marked.tail_span),
        ) else {
            return Err(Error::Data("marker span without original tokens".into()));
        };
        by_pair.insert((h, t), rel_from_stage2_tags(marked, tags));
    }
    let facts = assemble_facts(&sentence.tokens, &entities, usize::MAX, |h, t| {
        Ok(by_pair.get(&(h, t)).cloned())
    })?;
    Ok(facts.unwrap_or_default())
}

const HEDGES: [[&str; 2]; 5] = [["can", "be"], ["may", "be"], ["could", "be"], ["so", "that"], ["such", "that"]];
const PRONOUNS: [&str; 4] = ["it", "they", "them", "any"];
const BEHAVIOUR_LINKS: [&str; 6] = ["until", "since", "when", "as", "while", "whereas"];

static THERE_HERE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^((there|here)(by|between|to|in|inafter|of|on|from|with|after|under|upon|at|through|into|for|fore)|wherefrom|whereto)$",
    )
    .unwrap()
});

fn is_number(word: &str) -> bool {
    word.chars().any(|c| c.is_ascii_digit())
        && word.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '%'))
}

/// Apply the exclusion rules to a fact built over `tokens`. Returns the
/// cleaned fact, or `None` when the fact is rejected.
pub fn post_filter(fact: &Fact, tokens: &[Token], filters: &PostFilters) -> Option<Fact> {
    let drop_token = |t: &Token| {
        (filters.drop_said && t.text.eq_ignore_ascii_case("said"))
            || (filters.drop_there_here && THERE_HERE.is_match(&t.text))
    };
    let entity = |span: Span| -> Vec<&Token> {
        tokens[span.start..=span.end].iter().filter(|t| !drop_token(t)).collect()
    };
    let head = entity(fact.spans.head);
    let tail = entity(fact.spans.tail);
    if head.is_empty() || tail.is_empty() {
        return None;
    }
    let was_compound = fact.spans.rel.is_empty();
    let mut rel: Vec<usize> = fact
        .spans
        .rel
        .iter()
        .copied()
        .filter(|&i| !drop_token(&tokens[i]))
        .collect();
    if filters.drop_hedges {
        let mut k = 0;
        while k + 1 < rel.len() {
            let a = tokens[rel[k]].text.to_lowercase();
            let b = tokens[rel[k + 1]].text.to_lowercase();
            if HEDGES.iter().any(|h| h[0] == a && h[1] == b) {
                rel.drain(k..k + 2);
            } else {
                k += 1;
            }
        }
    }
    if rel.is_empty() && !was_compound {
        return None;
    }
    let lower = |ts: &[&Token]| ts.iter().map(|t| t.text.to_lowercase()).collect::<Vec<_>>().join(" ");
    if filters.reject_pronouns && [&head, &tail].iter().any(|e| PRONOUNS.contains(&lower(e).as_str())) {
        return None;
    }
    if filters.reject_behaviour_links
        && !rel.is_empty()
        && rel
            .iter()
            .all(|&i| BEHAVIOUR_LINKS.contains(&tokens[i].text.to_lowercase().as_str()))
    {
        return None;
    }
    if filters.reject_numeric && [&head, &tail].iter().any(|e| e.iter().all(|t| is_number(&t.text))) {
        return None;
    }
    let join = |ts: &[&Token]| ts.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    Some(Fact {
        head: join(&head),
        rel: rel.iter().map(|&i| tokens[i].text.clone()).collect(),
        tail: join(&tail),
        patent: fact.patent.clone(),
        sent: fact.sent,
        spans: FactSpans {
            rel,
            ..fact.spans.clone()
        },
    })
}

/// Trained models for extraction. Without a POS model the lexicon tagger is
/// used.
pub struct Models {
    pub pos: Option<PosModel>,
    pub stage1: TaggerModel,
    pub stage2: TaggerModel,
}

pub const POS_MODEL_FILE: &str = "pos.json";
pub const STAGE1_MODEL_FILE: &str = "stage1.json";
pub const STAGE2_MODEL_FILE: &str = "stage2.json";

impl Models {
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let pos_path = dir.join(POS_MODEL_FILE);
        let pos = if pos_path.exists() {
            Some(PosModel {
                model: TaggerModel::load(&pos_path)?,
            })
        } else {
            None
        };
        Ok(Models {
            pos,
            stage1: TaggerModel::load(dir.join(STAGE1_MODEL_FILE))?,
            stage2: TaggerModel::load(dir.join(STAGE2_MODEL_FILE))?,
        })
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        if let Some(pos) = &self.pos {
            pos.model.save(dir.join(POS_MODEL_FILE))?;
        }
        self.stage1.save(dir.join(STAGE1_MODEL_FILE))?;
        self.stage2.save(dir.join(STAGE2_MODEL_FILE))?;
        Ok(())
    }

    pub fn tag_pos(&self, tokens: &mut [Token]) {
        match &self.pos {
            Some(p) => p.tag_tokens(tokens),
            None => LexiconTagger.tag_tokens(tokens),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SentenceOutcome {
    pub facts: Vec<Fact>,
    /// Entity count when the sentence exceeded the cap and was skipped.
    pub skipped_entities: Option<usize>,
}

fn stage1_tags(model: &TaggerModel, tokens: &[Token]) -> Vec<Stage1Tag> {
    model
        .tag(tokens)
        .iter()
        .map(|t| Stage1Tag::parse(t).unwrap_or(Stage1Tag::Others))
        .collect()
}

/// Nearest preceding non-pronoun entity for each `which`/`that` entity.
fn resolve_pronouns(tokens: &[Token], entities: &[Span], facts: Vec<Fact>) -> Vec<Fact> {
    let is_rel_pronoun = |s: Span| {
        s.len() == 1 && matches!(tokens[s.start].text.to_lowercase().as_str(), "which" | "that")
    };
    let antecedent = |s: Span| {
        entities
            .iter()
            .rev()
            .find(|e| e.end < s.start && !is_rel_pronoun(**e))
            .copied()
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for mut f in facts {
        let mut ok = true;
        for span in [&mut f.spans.head, &mut f.spans.tail] {
            if is_rel_pronoun(*span) {
                match antecedent(*span) {
                    Some(a) => *span = a,
                    None => ok = false,
                }
            }
        }
        if !ok || f.spans.head == f.spans.tail {
            continue;
        }
        f.head = f.spans.head.text(tokens);
        f.tail = f.spans.tail.text(tokens);
        if seen.insert((f.spans.head, f.spans.tail, f.rel.clone())) {
            out.push(f);
        }
    }
    out
}

/// Extract facts from one already-cleaned, tokenized and POS-tagged sentence.
pub fn extract_tokens(tokens: &[Token], models: &Models, config: &ExtractionConfig) -> Result<SentenceOutcome> {
    if tokens.is_empty() {
        return Ok(SentenceOutcome::default());
    }
    let nps = chunk_noun_phrases(tokens);
    let tags = stage1_tags(&models.stage1, tokens);
    let entities = identify_entities(&tags, &nps, config.require_full_ent_coverage);
    let assembled = assemble_facts(tokens, &entities, config.max_entities_per_sentence, |h, t| {
        Ok(extract_pair(tokens, (h, t), &models.stage2)?.map(|(rel, _)| rel))
    })?;
    let Some(mut facts) = assembled else {
        return Ok(SentenceOutcome {
            facts: Vec::new(),
            skipped_entities: Some(entities.len()),
        });
    };
    if config.resolve_relative_pronouns {
        facts = resolve_pronouns(tokens, &entities, facts);
    }
    let facts = facts
        .iter()
        .filter_map(|f| post_filter(f, tokens, &config.post_filters))
        .collect();
    Ok(SentenceOutcome {
        facts,
        skipped_entities: None,
    })
}

/// Clean, tokenize, POS-tag and extract one raw sentence.
pub fn extract_sentence(sentence: &RawSentence, models: &Models, config: &ExtractionConfig) -> Result<SentenceOutcome> {
    let text = clean_pipeline(&sentence.text, TextKind::Body, &config.clean);
    let mut tokens = tokenize(&text);
    models.tag_pos(&mut tokens);
    let mut outcome = extract_tokens(&tokens, models, config)?;
    for f in &mut outcome.facts {
        f.patent = sentence.patent_id.clone();
        f.sent = sentence.sentence_index;
    }
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SentenceIssue {
    pub patent: String,
    pub sent: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BatchReport {
    pub sentences: usize,
    pub sentences_with_facts: usize,
    pub facts: usize,
    pub skipped: Vec<SentenceIssue>,
    pub errors: Vec<SentenceIssue>,
}

/// Extract from many sentences on `jobs` threads. Facts come back ordered by
/// (patent, sentence, pair) whatever the scheduling.
pub fn extract_batch(
    sentences: &[RawSentence],
    models: &Models,
    config: &ExtractionConfig,
    jobs: usize,
) -> Result<(Vec<Fact>, BatchReport)> {
    let run = || -> Vec<(usize, Result<SentenceOutcome>)> {
        sentences
            .par_iter()
            .enumerate()
            .map(|(i, s)| (i, extract_sentence(s, models, config)))
            .collect()
    };
    let outcomes = if jobs <= 1 {
        sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (i, extract_sentence(s, models, config)))
            .collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)
    };

    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.sort_by(|&a, &b| {
        (&sentences[a].patent_id, sentences[a].sentence_index, a)
            .cmp(&(&sentences[b].patent_id, sentences[b].sentence_index, b))
    });
    let mut slots: Vec<Option<Result<SentenceOutcome>>> = (0..sentences.len()).map(|_| None).collect();
    for (i, o) in outcomes {
        slots[i] = Some(o);
    }
    let mut facts = Vec::new();
    let mut report = BatchReport {
        sentences: sentences.len(),
        ..Default::default()
    };
    for i in order {
        let s = &sentences[i];
        let issue = |message: String| SentenceIssue {
            patent: s.patent_id.clone(),
            sent: s.sentence_index,
            message,
        };
        match slots[i].take().expect("every sentence has an outcome") {
            Ok(o) => {
                if let Some(n) = o.skipped_entities {
                    report.skipped.push(issue(format!("{n} entities exceed the cap")));
                }
                if !o.facts.is_empty() {
                    report.sentences_with_facts += 1;
                }
                facts.extend(o.facts);
            }
            Err(e) => report.errors.push(issue(e.to_string())),
        }
    }
    report.facts = facts.len();
    Ok((facts, report))
}

pub fn facts_to_jsonl(facts: &[Fact]) -> String {
    let mut out = String::new();
    for f in facts {
        out.push_str(&serde_json::to_string(f).expect("facts serialize"));
        out.push('\n');
    }
    out
}

pub fn write_facts_jsonl(path: impl AsRef<Path>, facts: &[Fact]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    f.write_all(facts_to_jsonl(facts).as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn read_facts_jsonl(path: impl AsRef<Path>) -> Result<Vec<Fact>> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fact: Fact = serde_json::from_str(&line).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(fact);
    }
    Ok(out)
}

/// Read sentences as JSONL. `patent_id`, `section_heading` and
/// `sentence_index` may be omitted; the index then defaults to the line's
/// position among sentences of the same patent.
pub fn read_sentences_jsonl(path: impl AsRef<Path>) -> Result<Vec<RawSentence>> {
    #[derive(Deserialize)]
    struct Line {
        text: String,
        #[serde(default)]
        patent_id: String,
        #[serde(default)]
        section_heading: String,
        sentence_index: Option<usize>,
    }
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut counters: std::collections::HashMap<String, usize> = Default::default();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let counter = counters.entry(l.patent_id.clone()).or_default();
        let index = l.sentence_index.unwrap_or(*counter);
        *counter = index + 1;
        out.push(RawSentence {
            text: l.text,
            patent_id: l.patent_id,
            section_heading: l.section_heading,
            sentence_index: index,
        });
    }
    Ok(out)
}

pub fn write_sentences_jsonl(path: impl AsRef<Path>, sentences: &[RawSentence]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for s in sentences {
        serde_json::to_writer(&mut f, s)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}
