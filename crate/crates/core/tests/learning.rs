use std::path::PathBuf;
use std::time::Instant;

use facta_core::lingo::{load_readable_annotations, AnnotatedSentence};
use facta_core::synth::synthetic_corpus;
use facta_core::tagger::{
    stage1_training_examples, stage2_training_examples, train, NegativeSampling, TagScheme,
    TrainConfig,
};

fn annotated() -> Vec<AnnotatedSentence> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/annotated.txt");
    load_readable_annotations(p).unwrap()
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn memorizes_fixture() {
    let t0 = Instant::now();
    let s = annotated();
    let ex1 = stage1_training_examples(&s).unwrap();
    let m1 = train(&ex1, TagScheme::stage1(), &config(20)).unwrap();
    let (ex2, _) = stage2_training_examples(&s, 3, NegativeSampling::PerFact).unwrap();
    let m2 = train(&ex2, TagScheme::stage2(), &config(20)).unwrap();
    let (a1, a2) = (m1.accuracy(&ex1), m2.accuracy(&ex2));
    eprintln!("stage1 {a1:.4} stage2 {a2:.4} in {:?}", t0.elapsed());
    assert!(a1 >= 0.95 && a2 >= 0.95);
}

#[test]
fn generalizes_on_synthetic_rules() {
    let s = synthetic_corpus(2000, 5);
    let (train_s, test_s) = s.split_at(1600);
    let ex1 = stage1_training_examples(train_s).unwrap();
    let m1 = train(&ex1, TagScheme::stage1(), &config(10)).unwrap();
    let h1 = m1.accuracy(&stage1_training_examples(test_s).unwrap());
    let (ex2, _) = stage2_training_examples(train_s, 3, NegativeSampling::PerFact).unwrap();
    let m2 = train(&ex2, TagScheme::stage2(), &config(10)).unwrap();
    let (t2, _) = stage2_training_examples(test_s, 4, NegativeSampling::PerFact).unwrap();
    let h2 = m2.accuracy(&t2);
    eprintln!("held-out stage1 {h1:.4} stage2 {h2:.4}");
    assert!(h1 >= 0.95 && h2 >= 0.95);
}
