use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

fn facta(args: &[&str]) -> Output {
    facta_env(args, &[])
}

fn facta_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_facta"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.env_remove("FACTA_CONFIG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const FIGURE7: &str = "The space provided between brush members 4 a and 4 b allows a mounting strip to be included in the housing";

fn train_fixture_models(dir: &Path) {
    let ann = fixture("annotated.txt");
    let models = dir.join("models");
    ok(&facta(&["train", "stage1", "--annotations", p(&ann), "--models", p(&models), "--epochs", "20"]));
    ok(&facta(&[
        "train",
        "stage2",
        "--annotations",
        p(&ann),
        "--models",
        p(&models),
        "--epochs",
        "20",
        "--seed",
        "0",
        "--negatives",
        "all",
    ]));
}

fn fact_strings(path: &Path) -> BTreeSet<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            let rel: Vec<&str> = v["rel"].as_array().unwrap().iter().map(|r| r.as_str().unwrap()).collect();
            format!("{} :: {} :: {}", v["head"].as_str().unwrap(), rel.join(" "), v["tail"].as_str().unwrap())
        })
        .collect()
}

#[test]
fn extract_reproduces_the_figure_seven_facts() {
    let dir = tempfile::tempdir().unwrap();
    train_fixture_models(dir.path());
    let input = dir.path().join("s.jsonl");
    std::fs::write(
        &input,
        format!("{}\n", serde_json::json!({"text": FIGURE7, "patent_id": "US7000001", "sentence_index": 0})),
    )
    .unwrap();
    let out = dir.path().join("facts.jsonl");
    let report = dir.path().join("report.json");
    ok(&facta(&[
        "extract",
        "--in",
        p(&input),
        "--models",
        p(&dir.path().join("models")),
        "--out",
        p(&out),
        "--report",
        p(&report),
    ]));
    let expected: BTreeSet<String> = [
        "The space :: provided between :: brush members",
        "brush members ::  :: 4 a",
        "The space :: provided between :: 4 b",
        "The space :: allows :: a mounting strip",
        "a mounting strip :: included in :: the housing",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(fact_strings(&out), expected);
    let r = read_report(&report);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["counts"]["facts"], 5);
    assert_eq!(r["command"], "extract");
}

#[test]
fn extract_is_byte_identical_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    train_fixture_models(dir.path());
    let patents = fixture("patents");
    let sentences = dir.path().join("sentences.jsonl");
    ok(&facta(&["ingest", "--in", p(&patents), "--out", p(&sentences)]));
    let models = dir.path().join("models");
    let mut outputs = Vec::new();
    for jobs in ["1", "1", "4"] {
        let out = dir.path().join(format!("facts{}.jsonl", outputs.len()));
        ok(&facta(&["extract", "--in", p(&sentences), "--models", p(&models), "--out", p(&out), "--jobs", jobs]));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn ingest_is_deterministic_and_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let patents = fixture("patents");
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let report = dir.path().join("r.json");
    ok(&facta(&["ingest", "--in", p(&patents), "--out", p(&a), "--report", p(&report)]));
    ok(&facta(&["ingest", "--in", p(&patents), "--out", p(&b), "--jobs", "2"]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let r = read_report(&report);
    assert_eq!(r["counts"]["patents"], 2);
    let lines = std::fs::read_to_string(&a).unwrap().lines().count();
    assert_eq!(r["counts"]["sentences"], lines);
    assert!(lines > 0);
}

#[test]
fn kb_stats_on_empty_kb_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.jsonl");
    std::fs::write(&kb, "{\"kb_version\":1}\n").unwrap();
    let o = facta(&["kb", "stats", "--kb", p(&kb)]);
    ok(&o);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for k in ["n_patents", "n_sentences", "n_facts", "n_unique_entities", "n_unique_relationships"] {
        assert_eq!(v[k], 0);
    }
}

#[test]
fn kb_build_and_queries_over_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let kb = fixture("kb.jsonl");
    let o = facta(&["kb", "stats", "--kb", p(&kb)]);
    ok(&o);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_facts"], 25);

    let o = facta(&["kb", "top-entities", "--kb", p(&kb), "--min-tokens", "2", "-k", "3"]);
    ok(&o);
    let top: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(top, ["3\tpressure drop", "2\tairflow noise", "2\tbrush members"]);

    let o = facta(&["kb", "relations", "--kb", p(&kb), "--head", "the housing", "--tail", "a motor"]);
    ok(&o);
    assert_eq!(stdout(&o), "encloses\t2\t\n");

    let o = facta(&["query", "search", "--kb", p(&kb), "--q", "pressure drop"]);
    ok(&o);
    let hits: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(hits[0]["key"], "pressure drop");

    let dot = facta(&["query", "neighborhood", "--kb", p(&kb), "--entity", "housing", "--format", "dot"]);
    ok(&dot);
    assert_eq!(stdout(&dot).matches("->").count(), 4);
    assert_eq!(stdout(&dot), stdout(&facta(&["query", "neighborhood", "--kb", p(&kb), "--entity", "housing", "--format", "dot"])));

    let o = facta(&["query", "sentence-graph", "--kb", p(&kb), "--patent", "US7000001", "--sent", "0"]);
    ok(&o);
    let g: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(g["edges"].as_array().unwrap().len(), 5);

    // Rebuild from the fixture's own fact lines.
    let facts = dir.path().join("facts.jsonl");
    let lines: Vec<String> = std::fs::read_to_string(&kb)
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"head\""))
        .map(String::from)
        .collect();
    std::fs::write(&facts, lines.join("\n") + "\n").unwrap();
    let rebuilt = dir.path().join("kb.jsonl");
    ok(&facta(&["kb", "build", "--facts", p(&facts), "--out", p(&rebuilt)]));
    let o = facta(&["kb", "stats", "--kb", p(&rebuilt)]);
    assert_eq!(serde_json::from_str::<Value>(&stdout(&o)).unwrap(), v);
}

#[test]
fn exit_codes_are_categorised() {
    let dir = tempfile::tempdir().unwrap();
    let o = facta(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(facta(&[]).status.code(), Some(2));
    assert_eq!(facta(&["--help"]).status.code(), Some(0));

    let kb = fixture("kb.jsonl");
    let o = facta(&["query", "neighborhood", "--kb", p(&kb), "--entity", "housing", "--depth", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = facta(&["query", "neighborhood", "--kb", p(&kb), "--entity", "zeppelin"]);
    assert_eq!(o.status.code(), Some(3));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"kb_version\":1}\n{\"head\": 3}\n").unwrap();
    let o = facta(&["kb", "stats", "--kb", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));

    let missing = dir.path().join("missing.jsonl");
    assert_eq!(facta(&["kb", "stats", "--kb", p(&missing)]).status.code(), Some(1));

    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "flavour = mint\n").unwrap();
    let o = facta(&["kb", "stats", "--kb", p(&kb), "--config", p(&conf)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_environment_feed_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("facta.conf");
    let kb = fixture("kb.jsonl");
    std::fs::write(&conf, format!("kb = {}\nseed = 4\n", p(&kb))).unwrap();
    let report = dir.path().join("r.json");
    let o = facta_env(&["kb", "stats", "--config", p(&conf), "--report", p(&report)], &[("FACTA_SEED", "9")]);
    ok(&o);
    let r = read_report(&report);
    assert_eq!(r["settings"]["seed"], "9");
    assert_eq!(r["settings"]["kb"], p(&kb));
    assert_eq!(r["counts"]["stats"]["n_facts"], 25);
    assert!(r["timings_ms"]["load"].as_f64().unwrap() >= 0.0);
}

#[test]
fn run_report_goes_to_stderr_by_default() {
    let o = facta(&["kb", "stats", "--kb", p(&fixture("kb.jsonl"))]);
    ok(&o);
    let last = String::from_utf8(o.stderr).unwrap().lines().last().unwrap().to_string();
    let r: Value = serde_json::from_str(&last).unwrap();
    assert_eq!(r["command"], "kb stats");
    assert_eq!(r["exit_code"], 0);
}

#[test]
fn annotations_convert_matches_committed_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.tsv");
    ok(&facta(&["annotations", "convert", p(&fixture("annotated.txt")), p(&out)]));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(fixture("annotated.tsv")).unwrap());
}

#[test]
fn clean_applies_claim_rules() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "2. The fan (10) of claim 1, wherein the blade and/or hub is bent.\n").unwrap();
    let body = facta(&["clean", "--in", p(&input)]);
    ok(&body);
    let claim = facta(&["clean", "--in", p(&input), "--claim", "--dependent"]);
    ok(&claim);
    let (body, claim) = (stdout(&body), stdout(&claim));
    assert!(!body.contains("(10)") && !body.contains("and/or"), "{body}");
    assert!(!claim.contains("claim 1"), "{claim}");
    assert!(!claim.starts_with("2."), "{claim}");
}

#[test]
fn gradcheck_passes_and_flags_corruption() {
    let o = facta(&["gradcheck", "--subject", "gcn", "--seeds", "2"]);
    ok(&o);
    assert_eq!(stdout(&o).matches("PASS").count(), 2);
    let o = facta(&["gradcheck", "--subject", "dense", "--seeds", "2", "--corrupt"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).matches("FAIL").count(), 2);
}

#[test]
fn bench_gnn_emits_one_csv_row() {
    let o = facta(&["bench", "gnn", "--variant", "gcn", "--planted", "200", "--epochs", "3", "--nodes-per-batch", "200"]);
    ok(&o);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "variant,examples,loss,accuracy");
    assert_eq!(lines.len(), 2);
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols[0], "gcn");
    let acc: f64 = cols[3].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn bench_pairwise_on_the_fixture() {
    let o = facta(&["bench", "pairwise", "--annotations", p(&fixture("annotated.txt")), "--epochs", "5"]);
    ok(&o);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("type,examples,loss,accuracy"));
    let types: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(types, ["ENTENT", "ENTREL", "RELREL", "RELENT"]);
}

#[test]
fn pos_training_writes_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("m");
    let report = dir.path().join("r.json");
    ok(&facta(&[
        "train",
        "pos",
        "--synthetic",
        "300",
        "--models",
        p(&models),
        "--epochs",
        "5",
        "--report",
        p(&report),
    ]));
    assert!(models.join("pos.json").exists());
    assert!(read_report(&report)["counts"]["train_accuracy"].as_f64().unwrap() > 0.9);
}
