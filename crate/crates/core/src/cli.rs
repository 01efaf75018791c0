//! Batch commands and their command-line front end.
//!
//! Each `cmd_*` function does the work and returns a summary; printing is left
//! to [`run`], so a failing command never prints a partial summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{CorpusStats, DistantInstance, ExportFormat, build_instances, corpus_stats, import_instances};
use crate::error::{Error, Result};
use crate::eval::{
    BenchmarkFormat, ColumnMapping, EvalConfig, EvalOutcome, evaluate, load_benchmark, stratified_report, write_report,
};
use crate::ingest::{load_document, strip_boilerplate};
use crate::pipeline::{AnalyzedDocument, Pipeline};
use crate::quotes::UttId;
use crate::rules::Rule;

#[derive(Debug, Parser)]
#[command(
    name = "quote-attrib",
    version,
    about = "Rule-based quote attribution and distant-supervision datasets"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags and environment variables win over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus directory of .txt files, or a single file.
    #[arg(long, global = true, env = "QA_CORPUS_DIR")]
    pub corpus: Option<PathBuf>,
    /// Output: directory for extract (default "attributions"), file for
    /// build-dataset (default "instances.jsonl"), report file for eval
    /// (default "<benchmark>.report.json").
    #[arg(long, global = true, env = "QA_OUTPUT_DIR")]
    pub out: Option<PathBuf>,
    /// Seed for masking, anonymization and audit sampling [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Probability of masking an explicit speaker as "someone" [default: 0.85].
    #[arg(long = "mask-prob", global = true)]
    pub mask_prob: Option<f64>,
    /// Whitespace-token budget per instance [default: 400].
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Export format: instance-lines or qa-lines [default: instance-lines].
    #[arg(long, global = true)]
    pub format: Option<ExportFormat>,
    /// Worker threads over documents [default: 1].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Treat single quotes as dialogue delimiters.
    #[arg(long = "single-quotes", global = true)]
    pub single_quotes: bool,
    /// Log filter when RUST_LOG is unset [default: warn].
    #[arg(long = "log-level", global = true)]
    pub log_level: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attribute every utterance of every corpus document.
    Extract,
    /// Extract, mask and anonymize, then export training instances.
    BuildDataset,
    /// Score the rules on a benchmark file.
    Eval(EvalArgs),
    /// Summarize an exported instance file.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Benchmark file: JSON lines, or delimited with --mapping.
    #[arg(long)]
    pub benchmark: PathBuf,
    /// TOML column mapping for a delimited benchmark.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Compare names as exact strings instead of alias-aware.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Instance file written by build-dataset in instance-lines format.
    pub instances: PathBuf,
    /// Number of instance ids in the audit sample [default: 100].
    #[arg(long)]
    pub sample: Option<usize>,
}

impl CommonArgs {
    /// Loads the config file if given and applies flag overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &self.corpus {
            cfg.corpus = Some(c.clone());
            cfg.files.clear();
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(s) = self.seed {
            cfg.masking.seed = s;
        }
        if let Some(p) = self.mask_prob {
            cfg.masking.mask_probability = p;
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if self.single_quotes {
            cfg.single_quotes = true;
        }
        if let Some(l) = &self.log_level {
            cfg.log_level = l.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Loads, strips and analyzes one file.
pub fn analyze_file(path: &Path, pipeline: &Pipeline) -> Result<AnalyzedDocument> {
    let stripped = strip_boilerplate(load_document(path)?)?;
    let mut analyzed = pipeline.analyze(&stripped.doc);
    let mut events = stripped.events;
    events.append(&mut analyzed.events);
    analyzed.events = events;
    Ok(analyzed)
}

/// Analyzes every corpus file on `cfg.jobs` workers. Results follow sorted file order.
pub fn analyze_corpus(cfg: &RunConfig) -> Result<Vec<AnalyzedDocument>> {
    let files = cfg.corpus_files()?;
    if files.is_empty() {
        tracing::warn!(corpus = ?cfg.corpus, "corpus contains no .txt files");
        return Ok(Vec::new());
    }
    let pipeline = cfg.pipeline()?;
    let pool = thread_pool(cfg.jobs)?;
    let docs: Vec<AnalyzedDocument> = pool.install(|| {
        files
            .par_iter()
            .map(|f| analyze_file(f, &pipeline))
            .collect::<Result<_>>()
    })?;
    let mut seen = std::collections::HashSet::new();
    for d in &docs {
        if !seen.insert(d.doc.doc_id.as_str()) {
            return Err(Error::Config(format!(
                "duplicate document id {:?} in corpus",
                d.doc.doc_id
            )));
        }
    }
    Ok(docs)
}

/// One line of an extract output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub doc_id: String,
    pub utt_id: UttId,
    /// Byte offsets of the quote interior in the stripped text.
    pub start: usize,
    pub end: usize,
    pub utterance: String,
    pub speaker: Option<String>,
    pub speaker_id: Option<String>,
    pub rules: Vec<Rule>,
    pub confidence: i32,
    pub continuation_of: Option<UttId>,
}

pub fn attribution_records(analyzed: &AnalyzedDocument) -> Vec<AttributionRecord> {
    analyzed
        .utterances
        .iter()
        .map(|u| {
            let attr = analyzed.attribution(u.id);
            AttributionRecord {
                doc_id: analyzed.doc.doc_id.clone(),
                utt_id: u.id,
                start: u.span.start,
                end: u.span.end,
                utterance: u.span.slice(&analyzed.doc.text).to_string(),
                speaker: analyzed.speaker(u.id).map(|e| e.canonical.clone()),
                speaker_id: attr.and_then(|a| a.speaker.as_ref()).map(|e| e.0.clone()),
                rules: attr.map(|a| a.decided_by.iter().copied().collect()).unwrap_or_default(),
                confidence: attr.map_or(0, |a| a.confidence),
                continuation_of: u.continuation_of,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub documents: usize,
    pub utterances: usize,
    pub attributed: usize,
    pub files: Vec<PathBuf>,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).expect("records serialize");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `<out>/<doc_id>.attributions.jsonl` for each document.
pub fn cmd_extract(cfg: &RunConfig) -> Result<ExtractSummary> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("attributions"));
    let docs = analyze_corpus(cfg)?;
    create_dir(&out)?;
    let mut summary = ExtractSummary::default();
    for d in &docs {
        let path = out.join(format!("{}.attributions.jsonl", d.doc.doc_id));
        write_lines(&path, &attribution_records(d))?;
        summary.documents += 1;
        summary.utterances += d.utterances.len();
        summary.attributed += d.attributed_count();
        summary.files.push(path);
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub documents: usize,
    pub utterances: usize,
    pub attributed: usize,
    pub output: PathBuf,
    pub stats: CorpusStats,
}

/// Builds instances for every document in the configured corpus, in document order.
pub fn build_corpus_instances(cfg: &RunConfig) -> Result<(Vec<AnalyzedDocument>, Vec<DistantInstance>)> {
    let docs = analyze_corpus(cfg)?;
    let dataset = cfg.dataset();
    let pool = thread_pool(cfg.jobs)?;
    let per_doc: Vec<Vec<DistantInstance>> =
        pool.install(|| docs.par_iter().map(|d| build_instances(d, &dataset)).collect());
    Ok((docs, per_doc.into_iter().flatten().collect()))
}

/// Runs extraction and the distant builder, then exports the instances.
pub fn cmd_build_dataset(cfg: &RunConfig) -> Result<BuildSummary> {
    let output = cfg.out.clone().unwrap_or_else(|| PathBuf::from("instances.jsonl"));
    let (docs, instances) = build_corpus_instances(cfg)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    crate::dataset::export_instances(&instances, &output, cfg.format)?;
    Ok(BuildSummary {
        documents: docs.len(),
        utterances: docs.iter().map(|d| d.utterances.len()).sum(),
        attributed: docs.iter().map(|d| d.attributed_count()).sum(),
        output,
        stats: corpus_stats(&instances, cfg.sample_size, cfg.masking.seed),
    })
}

/// Default report location: next to the benchmark.
pub fn default_report_path(benchmark: &Path) -> PathBuf {
    let mut name = benchmark.file_stem().unwrap_or_default().to_os_string();
    name.push(".report.json");
    benchmark.with_file_name(name)
}

/// Scores the rules on a benchmark and writes the JSON report.
pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<(EvalOutcome, PathBuf)> {
    let format = match (&args.mapping, &cfg.benchmark_columns) {
        (Some(path), _) => BenchmarkFormat::Delimited(Box::new(ColumnMapping::from_toml_file(path)?)),
        (None, Some(mapping)) => BenchmarkFormat::Delimited(Box::new(mapping.clone())),
        (None, None) => BenchmarkFormat::Native,
    };
    let records = load_benchmark(&args.benchmark, &format)?;
    let eval_cfg = EvalConfig {
        pipeline: cfg.pipeline()?,
        strict: args.strict,
    };
    let pool = thread_pool(cfg.jobs)?;
    let outcome = pool.install(|| evaluate(&records, &eval_cfg))?;
    let report_path = cfg.out.clone().unwrap_or_else(|| default_report_path(&args.benchmark));
    write_report(&outcome.report, &report_path)?;
    Ok((outcome, report_path))
}

/// Counts, category fractions, masking rate and a seeded audit sample.
pub fn cmd_stats(path: &Path, sample_size: usize, seed: u64) -> Result<CorpusStats> {
    let instances = import_instances(path)?;
    Ok(corpus_stats(&instances, sample_size, seed))
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summaries serialize")
}

fn percent(x: Option<f64>) -> String {
    x.map_or("-".to_string(), |a| format!("{:.1}%", a * 100.0))
}

/// Runs a parsed command line and prints its summary to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.common.resolve()?;
    match &cli.command {
        Command::Extract => {
            let s = cmd_extract(&cfg)?;
            println!(
                "documents: {}\nutterances: {}\nattributed: {}",
                s.documents, s.utterances, s.attributed
            );
        }
        Command::BuildDataset => {
            let s = cmd_build_dataset(&cfg)?;
            println!("{}", pretty(&s));
        }
        Command::Eval(args) => {
            let (outcome, report_path) = cmd_eval(&cfg, args)?;
            let r = &outcome.report;
            println!(
                "records: {}\ncorrect: {}\naccuracy: {}\nunattributed: {}\nattributed precision: {}\n",
                r.total,
                r.correct,
                percent(r.accuracy),
                r.unattributed,
                percent(r.attributed_precision)
            );
            print!("{}", stratified_report(r));
            println!("\nreport: {}", report_path.display());
        }
        Command::Stats(args) => {
            let s = cmd_stats(
                &args.instances,
                args.sample.unwrap_or(cfg.sample_size),
                cfg.masking.seed,
            )?;
            println!("{}", pretty(&s));
        }
    }
    Ok(())
}

/// Logs go to stderr. `RUST_LOG` wins over the configured level.
pub fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_target(false)
        .try_init();
}
