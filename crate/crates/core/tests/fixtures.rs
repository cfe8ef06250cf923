use std::path::PathBuf;

use facta_core::extract::{gold_facts, gold_round_trip};
use facta_core::lingo::{load_annotations, load_readable_annotations, AnnotatedSentence};
use facta_core::tagger::{
    make_stage2_examples, stage2_training_examples, unrelated_pairs, NegativeSampling,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn annotated() -> Vec<AnnotatedSentence> {
    load_readable_annotations(fixture("annotated.txt")).unwrap()
}

fn key(f: &facta_core::extract::Fact) -> (usize, usize, Vec<usize>, usize, usize) {
    (f.spans.head.start, f.spans.head.end, f.spans.rel.clone(), f.spans.tail.start, f.spans.tail.end)
}

#[test]
fn fixture_has_enough_sentences() {
    let s = annotated();
    assert!(s.len() >= 40, "{}", s.len());
    assert!(s.iter().all(|s| !s.facts.is_empty()));
}

#[test]
fn tsv_copy_matches_readable_source() {
    let tsv = load_annotations(fixture("annotated.tsv")).unwrap();
    assert_eq!(tsv, annotated());
}

#[test]
fn gold_round_trip_is_exact() {
    for s in annotated() {
        let mut gold: Vec<_> = gold_facts(&s).iter().map(key).collect();
        let mut back: Vec<_> = gold_round_trip(&s, 7).unwrap().iter().map(key).collect();
        gold.sort();
        back.sort();
        assert_eq!(gold, back, "{}", s.text());
    }
}

#[test]
fn round_trip_covers_compounds_and_reverse_relations() {
    let all: Vec<String> = annotated()
        .iter()
        .flat_map(|s| gold_round_trip(s, 0).unwrap())
        .map(|f| f.to_string())
        .collect();
    for want in [
        "one way ::  :: valves",
        "brush members ::  :: 4 a",
        "a write power setup value ::  :: ΔP",
        "the shaft :: extends through :: a hole",
        "a material :: injected into :: a mold cavity",
        "a vent follower :: is attached to :: a power transfer shaft",
        "copper :: melts at :: the temperature",
        "a selected quantity :: Upon attainment of :: the desired temperature level",
    ] {
        assert!(all.iter().any(|f| f == want), "missing {want}");
    }
}

#[test]
fn stage2_counts() {
    let sentences = annotated();
    for (i, s) in sentences.iter().enumerate() {
        let ex = make_stage2_examples(s, i as u64, NegativeSampling::PerFact).unwrap();
        let pool = unrelated_pairs(s).len();
        assert_eq!(ex.positives.len(), s.facts.len());
        assert!(ex.negatives.len() <= ex.positives.len());
        assert_eq!(ex.negatives.len(), s.facts.len().min(pool));
        assert_eq!(ex.negatives.len() + ex.missing_negatives, s.facts.len());
    }
    let (examples, counts) = stage2_training_examples(&sentences, 1, NegativeSampling::PerFact).unwrap();
    let facts: usize = sentences.iter().map(|s| s.facts.len()).sum();
    assert_eq!(counts.positives, facts);
    assert_eq!(examples.len(), counts.positives + counts.negatives);
}
