//! The `facta` command line: ingest, clean, train, extract, build and query a
//! knowledge base, run the neural benchmarks, and serve the HTTP API.
//!
//! Every run ends with a JSON run report (inputs, seeds, counts, timings),
//! written to `--report` or to stderr. Exit codes: 0 ok, 1 runtime error,
//! 2 usage, 3 data or schema error.

pub mod commands;
pub mod config;
pub mod error;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::Settings;
pub use error::{CliError, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "facta", version, about = "Fact extraction from patent text")]
pub struct Cli {
    /// Flat `key = value` config file. `FACTA_CONFIG` is read when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the JSON run report; stderr when absent.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Patent files (JSON or HTML) to cleaned sentence JSONL.
    Ingest(IngestArgs),
    /// Clean text, one item per line.
    Clean(CleanArgs),
    /// Train a tagger into a model directory.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Sentence JSONL to fact JSONL.
    Extract(ExtractArgs),
    /// Build and inspect a knowledge base
    #[command(subcommand)]
    Kb(KbCommand),
    /// Search and graph queries over a knowledge base
    #[command(subcommand)]
    Query(QueryCommand),
    /// Neural link-prediction benchmarks
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Serve the HTTP API over a knowledge base.
    Serve(ServeArgs),
    /// Annotation file utilities
    #[command(subcommand)]
    Annotations(AnnotationsCommand),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Patent files or directories of them.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Extra headings to discard, one per line.
    #[arg(long)]
    pub headings: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Input text, `-` for stdin.
    #[arg(long = "in", default_value = "-")]
    pub input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Apply the claim rules.
    #[arg(long)]
    pub claim: bool,
    /// With `--claim`: the claims are dependent.
    #[arg(long, requires = "claim")]
    pub dependent: bool,
}

#[derive(Debug, Args, Clone)]
pub struct CorpusArgs {
    /// Annotated corpus: `.tsv`, or the readable sentence-and-facts format.
    #[arg(long, conflicts_with = "synthetic")]
    pub annotations: Option<PathBuf>,
    /// Use this many generated sentences instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Model directory.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stage-2 negatives: `per-fact` draws one unrelated pair per fact,
    /// `all` takes every unrelated pair.
    #[arg(long, default_value = "per-fact")]
    pub negatives: String,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Part-of-speech tagger
    Pos(TrainArgs),
    /// Entity and relation token tagger
    Stage1(TrainArgs),
    /// Relation tagger over marked entity pairs
    Stage2(TrainArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub max_entities: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    /// Fact JSONL to a knowledge base.
    Build {
        #[arg(long)]
        facts: PathBuf,
        /// Sentence JSONL whose text is attached to sentences with facts.
        #[arg(long)]
        sentences: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Counts of patents, sentences, facts, entities and relations
    Stats {
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Most frequent entities, `count<TAB>key` per line
    TopEntities {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        min_tokens: usize,
        #[arg(short, long, default_value_t = 30)]
        k: usize,
    },
    /// Relations between two entities with their patent multiplicity.
    Relations {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        head: String,
        #[arg(long)]
        tail: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum QueryCommand {
    /// Entities whose key contains the term
    Search {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
    /// Facts within a depth of an entity
    Neighborhood {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        entity: String,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Facts of one sentence
    SentenceGraph {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        patent: String,
        #[arg(long)]
        sent: usize,
        #[arg(long, default_value = "json")]
        format: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Pairwise MLP per link type; CSV `type,examples,loss,accuracy`.
    Pairwise {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edge classification per GNN variant; CSV `variant,examples,loss,accuracy`.
    Gnn {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Use this many planted-rule graphs instead of a corpus.
        #[arg(long, conflicts_with_all = ["annotations", "synthetic"])]
        planted: Option<usize>,
        /// A variant name or `all`.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long, default_value = "ENTREL")]
        target: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        nodes_per_batch: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// `all`, `dense`, `mlp`, a GNN variant, or `edge/<variant>`.
    #[arg(long, default_value = "all")]
    pub subject: String,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Damage the analytic gradient; every check should then fail.
    #[arg(long)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    /// Comma-separated allowed origins, `*` for any.
    #[arg(long)]
    pub cors: Option<String>,
    #[arg(long)]
    pub edge_cap: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum AnnotationsCommand {
    /// Readable annotations to the token-per-line TSV format.
    Convert { input: PathBuf, output: PathBuf },
}

/// Machine-readable summary of one run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub settings: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub counts: BTreeMap<String, serde_json::Value>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn input(&mut self, p: impl AsRef<std::path::Path>) {
        self.inputs.push(p.as_ref().display().to_string());
    }

    pub fn output(&mut self, p: impl AsRef<std::path::Path>) {
        self.outputs.push(p.as_ref().display().to_string());
    }

    pub fn count(&mut self, key: &str, value: impl Serialize) {
        self.counts
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn time(&mut self, key: &str, since: std::time::Instant) {
        self.timings_ms.insert(key.to_string(), since.elapsed().as_secs_f64() * 1e3);
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Clean(_) => "clean",
        Command::Train(TrainCommand::Pos(_)) => "train pos",
        Command::Train(TrainCommand::Stage1(_)) => "train stage1",
        Command::Train(TrainCommand::Stage2(_)) => "train stage2",
        Command::Extract(_) => "extract",
        Command::Kb(KbCommand::Build { .. }) => "kb build",
        Command::Kb(KbCommand::Stats { .. }) => "kb stats",
        Command::Kb(KbCommand::TopEntities { .. }) => "kb top-entities",
        Command::Kb(KbCommand::Relations { .. }) => "kb relations",
        Command::Query(QueryCommand::Search { .. }) => "query search",
        Command::Query(QueryCommand::Neighborhood { .. }) => "query neighborhood",
        Command::Query(QueryCommand::SentenceGraph { .. }) => "query sentence-graph",
        Command::Bench(BenchCommand::Pairwise { .. }) => "bench pairwise",
        Command::Bench(BenchCommand::Gnn { .. }) => "bench gnn",
        Command::Gradcheck(_) => "gradcheck",
        Command::Serve(_) => "serve",
        Command::Annotations(_) => "annotations convert",
    }
}

/// Parse, run and report. Primary output goes to `stdout`; diagnostics and
/// the run report (without `--report`) go to `stderr`. Returns the exit code.
pub fn execute<I, T>(
    args: I,
    env: impl IntoIterator<Item = (String, String)>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env: Vec<(String, String)> = env.into_iter().collect();
    let config = cli.config.clone().or_else(|| {
        env.iter()
            .find(|(k, _)| k == "FACTA_CONFIG")
            .map(|(_, v)| PathBuf::from(v))
    });
    let mut report = RunReport {
        command: command_name(&cli.command).to_string(),
        ..RunReport::default()
    };
    let result = Settings::load(config.as_deref(), env).and_then(|settings| {
        report.settings = settings.as_map().clone();
        commands::run(&cli.command, &settings, &mut report, stdout)
    });
    let code = match result {
        Ok(()) => {
            report.status = "ok".into();
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            report.status = e.code().into();
            report.error = Some(e.message.clone());
            e.exit_code()
        }
    };
    report.exit_code = code;
    let json = serde_json::to_string(&report).expect("reports serialize");
    match &cli.report {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                let _ = writeln!(stderr, "error: report {}: {e}", path.display());
                return if code == 0 { 1 } else { code };
            }
        }
        None => {
            let _ = writeln!(stderr, "{json}");
        }
    }
    code
}

pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = execute(args, std::env::vars(), &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    code
}
