use std::collections::HashSet;
use std::time::Instant;

use facta_core::clean::CleanConfig;
use facta_core::corpus::{document_sentences, HeadingFilter};
use facta_core::extract::{extract_batch, extract_tokens, facts_to_jsonl, gold_facts, ExtractionConfig, Models};
use facta_core::synth::{synthetic_corpus, synthetic_patents};
use facta_core::tagger::{
    stage1_training_examples, stage2_training_examples, train, NegativeSampling, TagScheme,
    TrainConfig,
};

fn models() -> Models {
    let s = synthetic_corpus(1500, 1);
    let cfg = TrainConfig {
        epochs: 8,
        seed: 2,
        ..TrainConfig::default()
    };
    let stage1 = train(&stage1_training_examples(&s).unwrap(), TagScheme::stage1(), &cfg).unwrap();
    let (ex2, _) = stage2_training_examples(&s, 3, NegativeSampling::PerFact).unwrap();
    let stage2 = train(&ex2, TagScheme::stage2(), &cfg).unwrap();
    Models {
        pos: None,
        stage1,
        stage2,
    }
}

#[test]
fn extraction_recovers_synthetic_facts() {
    let m = models();
    let config = ExtractionConfig::default();
    let (mut gold_n, mut found_n, mut hit) = (0, 0, 0);
    for s in synthetic_corpus(300, 99) {
        let gold: HashSet<String> = gold_facts(&s).iter().map(|f| f.to_string()).collect();
        let got: HashSet<String> = extract_tokens(&s.tokens, &m, &config)
            .unwrap()
            .facts
            .iter()
            .map(|f| f.to_string())
            .collect();
        gold_n += gold.len();
        found_n += got.len();
        hit += gold.intersection(&got).count();
    }
    let (p, r) = (hit as f64 / found_n as f64, hit as f64 / gold_n as f64);
    eprintln!("precision {p:.3} recall {r:.3}");
    assert!(p > 0.9 && r > 0.9);
}

#[test]
fn batch_output_is_deterministic_across_thread_counts() {
    let m = models();
    let mut sentences = Vec::new();
    for doc in synthetic_patents(20, 12, 5) {
        sentences.extend(document_sentences(&doc, &HeadingFilter::default(), &CleanConfig::default()).0);
    }
    let config = ExtractionConfig::default();
    let t0 = Instant::now();
    let (a, report) = extract_batch(&sentences, &m, &config, 1).unwrap();
    let rate = sentences.len() as f64 / t0.elapsed().as_secs_f64();
    let (b, _) = extract_batch(&sentences, &m, &config, 4).unwrap();
    eprintln!("{} sentences, {} facts, {rate:.0} sentences/s", sentences.len(), a.len());
    assert_eq!(facts_to_jsonl(&a), facts_to_jsonl(&b));
    assert!(report.errors.is_empty());
    assert!(!a.is_empty());
}
