use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use facta_core::clean::{clean_pipeline, CleanConfig, TextKind};
use facta_core::corpus::{
    apply_length_filters, count_tokens, document_sentences, parse_patent_html, parse_patent_json, HeadingFilter,
    PatentDocument, RawSentence,
};
use facta_core::embed::HashEmbedder;
use facta_core::extract::{
    extract_batch, read_facts_jsonl, read_sentences_jsonl, write_facts_jsonl, write_sentences_jsonl,
    ExtractionConfig, Models, POS_MODEL_FILE, STAGE1_MODEL_FILE, STAGE2_MODEL_FILE,
};
use facta_core::kb::KnowledgeBase;
use facta_core::lingo::{load_annotations, load_readable_annotations, save_annotations, AnnotatedSentence};
use facta_core::query::{export, neighborhood, search_entities, sentence_graph, ExportFormat};
use facta_core::synth::synthetic_corpus;
use facta_core::tagger::{
    stage1_training_examples, stage2_training_examples, train, NegativeSampling, TagScheme, TaggerModel,
    TrainConfig,
};
use facta_neural::checkpoint::{report_csv, ReportRow};
use facta_neural::dense::{mlp_train, stack_rows, MlpConfig};
use facta_neural::edge::{edge_classifier_train, GnnConfig};
use facta_neural::gnn::Variant;
use facta_neural::gradcheck::{check_conv, check_dense, check_edge_classifier, check_mlp, Corruption, GradReport};
use facta_neural::graphs::{corpus_graphs, graph_stats, planted_graphs};
use facta_neural::pairwise::{sample_pairwise_dataset, LinkType};
use rayon::prelude::*;

use crate::config::Settings;
use crate::error::CliError;
use crate::{
    AnnotationsCommand, BenchCommand, CleanArgs, Command, CorpusArgs, ExtractArgs, GradcheckArgs, IngestArgs,
    KbCommand, QueryCommand, RunReport, ServeArgs, TrainArgs, TrainCommand,
};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: &Command, settings: &Settings, report: &mut RunReport, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, settings, report),
        Command::Clean(a) => clean(a, report, out),
        Command::Train(t) => train_command(t, settings, report),
        Command::Extract(a) => extract(a, settings, report),
        Command::Kb(k) => kb_command(k, settings, report, out),
        Command::Query(q) => query_command(q, settings, report, out),
        Command::Bench(b) => bench_command(b, settings, report, out),
        Command::Gradcheck(a) => gradcheck(a, report, out),
        Command::Serve(a) => serve(a, settings, report),
        Command::Annotations(AnnotationsCommand::Convert { input, output }) => convert(input, output, report),
    }
}

fn write_output(path: Option<&Path>, text: &str, report: &mut RunReport, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, text)?;
            report.output(p);
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))
}

// Ingest and clean
// ---------------------------------------------------------------------------

fn patent_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let is_patent = |p: &Path| {
        matches!(
            p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
            Some("json" | "html" | "htm")
        )
    };
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|p| p.is_file() && is_patent(p));
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(CliError::usage(format!("no such input `{}`", input.display())));
        }
    }
    Ok(files)
}

fn read_patent(path: &Path) -> Result<PatentDocument> {
    let bytes = fs::read(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let doc = if ext == "json" {
        parse_patent_json(&bytes)
    } else {
        parse_patent_html(&bytes)
    };
    doc.map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn ingest(a: &IngestArgs, settings: &Settings, report: &mut RunReport) -> Result<()> {
    let t0 = Instant::now();
    let jobs: usize = settings.pick(a.jobs, "jobs")?;
    let mut filter = HeadingFilter::default();
    if let Some(h) = &a.headings {
        filter.extend_from_list(&fs::read_to_string(h)?);
        report.input(h);
    }
    let files = patent_files(&a.inputs)?;
    for f in &files {
        report.input(f);
    }
    let clean = CleanConfig::default();
    let parsed: Vec<Result<(Vec<RawSentence>, usize)>> = thread_pool(jobs)?.install(|| {
        files
            .par_iter()
            .map(|f| {
                let doc = read_patent(f)?;
                let (sentences, r) = document_sentences(&doc, &filter, &clean);
                Ok((sentences, r.sections_discarded.len()))
            })
            .collect()
    });
    let mut sentences = Vec::new();
    let mut discarded = 0;
    for p in parsed {
        let (s, d) = p?;
        sentences.extend(s);
        discarded += d;
    }
    sentences.sort_by(|x, y| (&x.patent_id, x.sentence_index).cmp(&(&y.patent_id, y.sentence_index)));
    let filtered = apply_length_filters(sentences, count_tokens);
    write_sentences_jsonl(&a.out, &filtered.kept)?;
    report.output(&a.out);
    report.count("patents", files.len());
    report.count("sections_discarded", discarded);
    report.count("sentences", filtered.kept.len());
    report.count("dropped_long", filtered.dropped_long);
    report.count("dropped_patents", &filtered.dropped_patents);
    report.count("jobs", jobs);
    report.time("total", t0);
    Ok(())
}

fn clean(a: &CleanArgs, report: &mut RunReport, out: &mut dyn Write) -> Result<()> {
    let mut text = String::new();
    if a.input == Path::new("-") {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(&a.input)?;
        report.input(&a.input);
    }
    let kind = if a.claim {
        TextKind::Claim {
            is_dependent: a.dependent,
        }
    } else {
        TextKind::Body
    };
    let config = CleanConfig::default();
    let mut cleaned = String::new();
    let mut n = 0;
    for line in text.lines() {
        cleaned.push_str(&clean_pipeline(line, kind, &config));
        cleaned.push('\n');
        n += 1;
    }
    report.count("lines", n);
    write_output(a.out.as_deref(), &cleaned, report, out)
}

// Training and extraction
// ---------------------------------------------------------------------------

fn load_corpus(c: &CorpusArgs, seed: u64, report: &mut RunReport) -> Result<Vec<AnnotatedSentence>> {
    let corpus = match (&c.annotations, c.synthetic) {
        (Some(p), _) => {
            report.input(p);
            if p.extension().is_some_and(|e| e == "tsv") {
                load_annotations(p)?
            } else {
                load_readable_annotations(p)?
            }
        }
        (None, Some(n)) => {
            report.count("synthetic_sentences", n);
            synthetic_corpus(n, seed)
        }
        (None, None) => return Err(CliError::usage("give --annotations or --synthetic")),
    };
    if corpus.is_empty() {
        return Err(CliError::data("the annotated corpus is empty"));
    }
    report.count("corpus_sentences", corpus.len());
    report.count("corpus_facts", corpus.iter().map(|s| s.facts.len()).sum::<usize>());
    Ok(corpus)
}

fn save_model(model: &TaggerModel, dir: &Path, file: &str, report: &mut RunReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(file);
    model.save(&path)?;
    report.output(path);
    Ok(())
}

fn train_command(t: &TrainCommand, settings: &Settings, report: &mut RunReport) -> Result<()> {
    let (TrainCommand::Pos(a) | TrainCommand::Stage1(a) | TrainCommand::Stage2(a)) = t;
    let TrainArgs {
        corpus,
        models,
        epochs,
        seed,
        negatives,
    } = a;
    let t0 = Instant::now();
    let seed: u64 = settings.pick(*seed, "seed")?;
    let epochs: usize = settings.pick(*epochs, "epochs")?;
    let dir: PathBuf = settings.pick(models.clone(), "models")?;
    report.seeds.insert("train".into(), seed);
    report.count("epochs", epochs);
    let corpus = load_corpus(corpus, seed, report)?;
    let config = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    match t {
        TrainCommand::Pos(_) => {
            let data: Vec<(Vec<String>, Vec<String>)> = corpus
                .iter()
                .map(|s| s.tokens.iter().map(|t| (t.text.clone(), t.pos.clone())).unzip())
                .collect();
            let model = facta_core::lingo::train_pos_tagger(&data, epochs, seed)?;
            let (mut hit, mut total) = (0usize, 0usize);
            for (words, tags) in &data {
                let tokens: Vec<_> = words
                    .iter()
                    .enumerate()
                    .map(|(i, w)| facta_core::lingo::Token::new(w.clone(), i, 0, 0))
                    .collect();
                let got = model.model.tag(&tokens);
                hit += got.iter().zip(tags).filter(|(g, t)| g == t).count();
                total += tags.len();
            }
            report.count("train_accuracy", hit as f64 / total.max(1) as f64);
            save_model(&model.model, &dir, POS_MODEL_FILE, report)?;
        }
        TrainCommand::Stage1(_) => {
            let examples = stage1_training_examples(&corpus)?;
            let model = train(&examples, TagScheme::stage1(), &config)?;
            report.count("examples", examples.len());
            report.count("train_accuracy", model.accuracy(&examples));
            save_model(&model, &dir, STAGE1_MODEL_FILE, report)?;
        }
        TrainCommand::Stage2(_) => {
            let sampling = match negatives.as_str() {
                "per-fact" => NegativeSampling::PerFact,
                "all" => NegativeSampling::All,
                other => return Err(CliError::usage(format!("unknown --negatives `{other}`"))),
            };
            let (examples, counts) = stage2_training_examples(&corpus, seed, sampling)?;
            let model = train(&examples, TagScheme::stage2(), &config)?;
            report.count("examples", &counts);
            report.count("train_accuracy", model.accuracy(&examples));
            save_model(&model, &dir, STAGE2_MODEL_FILE, report)?;
        }
    }
    report.time("total", t0);
    Ok(())
}

fn extract(a: &ExtractArgs, settings: &Settings, report: &mut RunReport) -> Result<()> {
    let t0 = Instant::now();
    let jobs: usize = settings.pick(a.jobs, "jobs")?;
    let dir: PathBuf = settings.pick(a.models.clone(), "models")?;
    let config = ExtractionConfig {
        max_entities_per_sentence: settings.pick(a.max_entities, "max_entities")?,
        ..ExtractionConfig::default()
    };
    let sentences = read_sentences_jsonl(&a.input)?;
    report.input(&a.input);
    let models = Models::load_dir(&dir)?;
    report.input(&dir);
    let t1 = Instant::now();
    let (facts, batch) = extract_batch(&sentences, &models, &config, jobs)?;
    let secs = t1.elapsed().as_secs_f64();
    write_facts_jsonl(&a.out, &facts)?;
    report.output(&a.out);
    report.count("jobs", jobs);
    report.count("sentences", batch.sentences);
    report.count("sentences_with_facts", batch.sentences_with_facts);
    report.count("facts", batch.facts);
    report.count("skipped", &batch.skipped);
    report.count("errors", &batch.errors);
    report.count("sentences_per_second", batch.sentences as f64 / secs.max(1e-9));
    report.time("extract", t1);
    report.time("total", t0);
    Ok(())
}

// Knowledge base and queries
// ---------------------------------------------------------------------------

fn open_kb(flag: &Option<PathBuf>, settings: &Settings, report: &mut RunReport) -> Result<KnowledgeBase> {
    let path: PathBuf = settings.pick(flag.clone(), "kb")?;
    let t0 = Instant::now();
    let kb = KnowledgeBase::load(&path)?;
    report.input(&path);
    report.time("load", t0);
    Ok(kb)
}

fn json_line(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("values serialize") + "\n"
}

fn kb_command(k: &KbCommand, settings: &Settings, report: &mut RunReport, out: &mut dyn Write) -> Result<()> {
    match k {
        KbCommand::Build {
            facts,
            sentences,
            out: target,
        } => {
            let t0 = Instant::now();
            let records = read_facts_jsonl(facts)?;
            report.input(facts);
            let mut kb = KnowledgeBase::from_facts(records);
            if let Some(path) = sentences {
                let with_facts: HashSet<(&str, usize)> =
                    kb.records().iter().map(|r| (r.fact.patent.as_str(), r.fact.sent)).collect();
                let texts: Vec<RawSentence> = read_sentences_jsonl(path)?
                    .into_iter()
                    .filter(|s| with_facts.contains(&(s.patent_id.as_str(), s.sentence_index)))
                    .collect();
                report.input(path);
                report.count("sentence_texts", texts.len());
                for s in texts {
                    kb.set_sentence_text(&s.patent_id, s.sentence_index, s.text);
                }
            }
            let target: PathBuf = settings.pick(target.clone(), "kb")?;
            kb.save(&target)?;
            report.output(&target);
            report.count("stats", kb.stats());
            report.time("total", t0);
        }
        KbCommand::Stats { kb } => {
            let kb = open_kb(kb, settings, report)?;
            let stats = kb.stats();
            report.count("stats", &stats);
            out.write_all(json_line(&stats).as_bytes())?;
        }
        KbCommand::TopEntities { kb, min_tokens, k } => {
            if *min_tokens == 0 {
                return Err(CliError::usage("--min-tokens must be at least 1"));
            }
            let kb = open_kb(kb, settings, report)?;
            let top = kb.top_entities(*min_tokens, *k);
            report.count("entities", top.len());
            for (key, freq) in top {
                writeln!(out, "{freq}\t{key}")?;
            }
        }
        KbCommand::Relations { kb, head, tail } => {
            let kb = open_kb(kb, settings, report)?;
            let head = facta_core::kb::normalize_entity(head);
            let tail = facta_core::kb::normalize_entity(tail);
            let groups = kb.multi_patent_relations(&head, &tail);
            report.count("relations", groups.len());
            for g in groups {
                let tag = if g.multiplicity == 1 { g.patents[0].clone() } else { String::new() };
                writeln!(out, "{}\t{}\t{}", g.relation, g.multiplicity, tag)?;
            }
        }
    }
    Ok(())
}

fn query_command(q: &QueryCommand, settings: &Settings, report: &mut RunReport, out: &mut dyn Write) -> Result<()> {
    let format = |f: &str| f.parse::<ExportFormat>().map_err(CliError::from);
    match q {
        QueryCommand::Search { kb, q, limit } => {
            if q.trim().is_empty() {
                return Err(CliError::usage("--q must not be empty"));
            }
            let kb = open_kb(kb, settings, report)?;
            let hits: Vec<_> = search_entities(&kb, q).into_iter().take(*limit).collect();
            report.count("matches", hits.len());
            out.write_all(json_line(&hits).as_bytes())?;
        }
        QueryCommand::Neighborhood {
            kb,
            entity,
            depth,
            cap,
            format: f,
        } => {
            let f = format(f)?;
            let cap: usize = settings.pick(*cap, "edge_cap")?;
            let kb = open_kb(kb, settings, report)?;
            let key = facta_core::kb::normalize_entity(entity);
            let g = neighborhood(&kb, &key, *depth, cap)?;
            report.count("nodes", g.nodes.len());
            report.count("edges", g.edges.len());
            report.count("truncated", g.truncated);
            out.write_all(export(&g, f).as_bytes())?;
        }
        QueryCommand::SentenceGraph {
            kb,
            patent,
            sent,
            format: f,
        } => {
            let f = format(f)?;
            let kb = open_kb(kb, settings, report)?;
            let g = sentence_graph(&kb, patent, *sent);
            report.count("edges", g.edges.len());
            report.count("empty", g.empty);
            out.write_all(export(&g, f).as_bytes())?;
        }
    }
    Ok(())
}

// Neural benchmarks
// ---------------------------------------------------------------------------

fn bench_command(b: &BenchCommand, settings: &Settings, report: &mut RunReport, out: &mut dyn Write) -> Result<()> {
    let t0 = Instant::now();
    let provider = HashEmbedder::default();
    match b {
        BenchCommand::Pairwise {
            corpus,
            epochs,
            seed,
            out: target,
        } => {
            let seed: u64 = settings.pick(*seed, "seed")?;
            report.seeds.insert("bench".into(), seed);
            let corpus = load_corpus(corpus, seed, report)?;
            let config = MlpConfig {
                hidden: vec![settings.get("mlp_hidden")?],
                epochs: settings.pick(*epochs, "mlp_epochs")?,
                seed,
                ..MlpConfig::default()
            };
            let mut rows = Vec::new();
            for ty in LinkType::POSITIVE {
                let ds = sample_pairwise_dataset(&corpus, ty, &provider, seed)?;
                report.count(&format!("{ty}_positives"), ds.positives);
                report.count(&format!("{ty}_negatives"), ds.negatives);
                if ds.examples.len() < 2 {
                    continue;
                }
                let features: Vec<Vec<f64>> = ds.examples.iter().map(|e| e.features.clone()).collect();
                let labels: Vec<usize> = ds.examples.iter().map(|e| e.label).collect();
                let (_, r) = mlp_train(&stack_rows(&features)?, &labels, &config)?;
                rows.push(ReportRow {
                    name: ty.as_str().into(),
                    examples: ds.examples.len(),
                    loss: r.final_loss(),
                    accuracy: r.test_accuracy,
                });
            }
            report.time("total", t0);
            write_output(target.as_deref(), &report_csv("type", &rows), report, out)
        }
        BenchCommand::Gnn {
            corpus,
            planted,
            variant,
            target,
            epochs,
            nodes_per_batch,
            seed,
            out: csv_out,
        } => {
            let seed: u64 = settings.pick(*seed, "seed")?;
            report.seeds.insert("bench".into(), seed);
            let variants: Vec<Variant> = if variant == "all" {
                Variant::ALL.to_vec()
            } else {
                vec![variant.parse()?]
            };
            let graphs = match planted {
                Some(n) => {
                    report.count("planted_graphs", n);
                    planted_graphs(*n, seed)
                }
                None => {
                    let target: LinkType = target.parse()?;
                    if target == LinkType::Nil {
                        return Err(CliError::usage("--target must be a typed link"));
                    }
                    let corpus = load_corpus(corpus, seed, report)?;
                    corpus_graphs(&corpus, target, &provider, seed)?
                }
            };
            let stats = graph_stats(&graphs);
            report.count("graphs", stats);
            if graphs.is_empty() {
                return Err(CliError::data("no graph has a link of the target type"));
            }
            let mut rows = Vec::new();
            for v in variants {
                let config = GnnConfig {
                    variant: v,
                    hidden: settings.get("gnn_hidden")?,
                    epochs: settings.pick(*epochs, "gnn_epochs")?,
                    lr: settings.get("gnn_lr")?,
                    nodes_per_batch: settings.pick(*nodes_per_batch, "nodes_per_batch")?,
                    seed,
                    ..GnnConfig::default()
                };
                let t1 = Instant::now();
                let (_, r) = edge_classifier_train(&graphs, &config)?;
                report.time(v.as_str(), t1);
                rows.push(ReportRow {
                    name: v.as_str().into(),
                    examples: stats.candidate_edges,
                    loss: r.test_loss,
                    accuracy: r.test_accuracy,
                });
            }
            report.time("total", t0);
            write_output(csv_out.as_deref(), &report_csv("variant", &rows), report, out)
        }
    }
}

fn gradcheck(a: &GradcheckArgs, report: &mut RunReport, out: &mut dyn Write) -> Result<()> {
    let t0 = Instant::now();
    let corruption = if a.corrupt { Corruption::ScaleFirstBlock } else { Corruption::None };
    let mut subjects: Vec<String> = Vec::new();
    if a.subject == "all" {
        subjects.push("dense".into());
        if !a.corrupt {
            subjects.push("mlp".into());
        }
        subjects.extend(Variant::ALL.iter().map(|v| v.as_str().to_string()));
        if !a.corrupt {
            subjects.extend(Variant::ALL.iter().map(|v| format!("edge/{v}")));
        }
    } else {
        subjects.push(a.subject.clone());
    }
    let mut failed = 0;
    let mut worst = 0.0f64;
    for s in &subjects {
        for seed in 0..a.seeds {
            let r: GradReport = match (s.as_str(), s.strip_prefix("edge/")) {
                ("dense", _) => check_dense(seed, corruption),
                ("mlp", _) | (_, Some(_)) if a.corrupt => {
                    return Err(CliError::usage(format!("--corrupt does not apply to `{s}`")))
                }
                ("mlp", _) => check_mlp(seed),
                (_, Some(v)) => check_edge_classifier(v.parse()?, seed),
                (other, None) => check_conv(other.parse()?, seed, corruption),
            };
            let ok = r.passed();
            failed += usize::from(!ok);
            worst = worst.max(r.max_rel_error());
            writeln!(
                out,
                "{:<14} seed {seed}  max rel error {:.3e}  {}",
                r.subject,
                r.max_rel_error(),
                if ok { "PASS" } else { "FAIL" }
            )?;
        }
    }
    report.count("checks", subjects.len() as u64 * a.seeds);
    report.count("failed", failed);
    report.count("max_rel_error", worst);
    report.time("total", t0);
    if failed > 0 {
        return Err(CliError::runtime(format!("{failed} gradient checks failed")));
    }
    Ok(())
}

// Serving and conversion
// ---------------------------------------------------------------------------

fn serve(a: &ServeArgs, settings: &Settings, report: &mut RunReport) -> Result<()> {
    let kb_path: PathBuf = settings.pick(a.kb.clone(), "kb")?;
    let bind: String = settings.pick(a.bind.clone(), "bind")?;
    let cors: String = settings.pick(a.cors.clone(), "cors")?;
    let config = facta_server::ApiConfig {
        bind: bind
            .parse()
            .map_err(|_| CliError::usage(format!("bad bind address `{bind}`")))?,
        kb_path: kb_path.clone(),
        edge_cap: settings.pick(a.edge_cap, "edge_cap")?,
        cors_allow: cors.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
    };
    report.input(&kb_path);
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("serving {} on http://{}", kb_path.display(), config.bind);
    runtime.block_on(facta_server::serve(&config))?;
    Ok(())
}

fn convert(input: &Path, output: &Path, report: &mut RunReport) -> Result<()> {
    let sentences = load_readable_annotations(input)?;
    save_annotations(output, &sentences)?;
    report.input(input);
    report.output(output);
    report.count("sentences", sentences.len());
    report.count("facts", sentences.iter().map(|s| s.facts.len()).sum::<usize>());
    Ok(())
}
