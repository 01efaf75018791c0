//! Benchmark loading and accuracy reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Category, classify_category};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::ingest::normalize_quotes;
use crate::mentions::{CandidateRecognizer, names_match};
use crate::pipeline::{AnalyzedDocument, Pipeline};
use crate::quotes::Utterance;
use crate::token::collapse_whitespace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub record_id: String,
    pub context: String,
    pub utterance: String,
    pub candidates: Vec<String>,
    pub gold_speaker: String,
    #[serde(default)]
    pub category: Option<Category>,
    #[serde(default = "default_language")]
    pub language: String,
}

fn default_language() -> String {
    "en".into()
}

/// Column layout of a delimited benchmark file, keyed by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub delimiter: char,
    /// Separator between names inside the candidates column.
    pub candidate_separator: String,
    pub record_id: String,
    pub context: String,
    pub utterance: String,
    pub candidates: String,
    pub gold_speaker: String,
    pub category: Option<String>,
    pub language: Option<String>,
    /// Used when there is no language column.
    pub default_language: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            delimiter: '\t',
            candidate_separator: ";".into(),
            record_id: "record_id".into(),
            context: "context".into(),
            utterance: "utterance".into(),
            candidates: "candidates".into(),
            gold_speaker: "gold_speaker".into(),
            category: Some("category".into()),
            language: Some("language".into()),
            default_language: default_language(),
        }
    }
}

impl ColumnMapping {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchmarkFormat {
    /// One JSON record per line with [`BenchmarkRecord`] fields.
    Native,
    Delimited(Box<ColumnMapping>),
}

fn validate(path: &Path, row: usize, rec: &BenchmarkRecord) -> Result<()> {
    let fail = |reason: String| Error::Validation {
        path: path.to_path_buf(),
        row,
        reason,
    };
    if rec.candidates.is_empty() {
        return Err(fail("no candidates".into()));
    }
    if !rec.candidates.iter().any(|c| c == &rec.gold_speaker) {
        return Err(fail(format!(
            "gold speaker {:?} is not among the candidates",
            rec.gold_speaker
        )));
    }
    if rec.utterance.trim().is_empty() {
        return Err(fail("empty utterance".into()));
    }
    Ok(())
}

/// Loads and validates a benchmark; rows are numbered from 1 as lines in the file.
pub fn load_benchmark(path: &Path, format: &BenchmarkFormat) -> Result<Vec<BenchmarkRecord>> {
    let records = match format {
        BenchmarkFormat::Native => load_native(path)?,
        BenchmarkFormat::Delimited(mapping) => load_delimited(path, mapping)?,
    };
    for (row, rec) in &records {
        validate(path, *row, rec)?;
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

fn parse_error(path: &Path, row: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        reason: reason.into(),
    }
}

fn load_native(path: &Path) -> Result<Vec<(usize, BenchmarkRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn load_delimited(path: &Path, m: &ColumnMapping) -> Result<Vec<(usize, BenchmarkRecord)>> {
    if !m.delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter {:?} must be ASCII", m.delimiter)));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(m.delimiter as u8)
        .quoting(m.delimiter != '\t')
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_error(path, 0, format!("{other:?}")),
        })?;
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(_) => return Ok(Vec::new()),
    };
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Ok(Vec::new());
    }
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_error(path, 1, format!("missing column {name:?}")))
    };
    let id_c = col(&m.record_id)?;
    let ctx_c = col(&m.context)?;
    let utt_c = col(&m.utterance)?;
    let cand_c = col(&m.candidates)?;
    let gold_c = col(&m.gold_speaker)?;
    let cat_c = m.category.as_deref().and_then(|c| col(c).ok());
    let lang_c = m.language.as_deref().and_then(|c| col(c).ok());

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| parse_error(path, line, e.to_string()))?;
        let get = |c: usize| row.get(c).unwrap_or_default().trim().to_string();
        let category = match cat_c.map(get).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse().map_err(|e: String| parse_error(path, line, e))?),
            None => None,
        };
        out.push((
            line,
            BenchmarkRecord {
                record_id: get(id_c),
                context: unescape(&get(ctx_c)),
                utterance: get(utt_c),
                candidates: get(cand_c)
                    .split(m.candidate_separator.as_str())
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect(),
                gold_speaker: get(gold_c),
                category,
                language: lang_c
                    .map(get)
                    .filter(|s| !s.is_empty())
                    .unwrap_or_else(|| m.default_language.clone()),
            },
        ));
    }
    Ok(out)
}

/// Delimited files keep each record on one line; `\n` marks paragraph breaks.
fn unescape(s: &str) -> String {
    s.replace("\\n", "\n").replace("\\t", "\t")
}

#[derive(Debug, Clone, Default)]
pub struct EvalConfig {
    pub pipeline: Pipeline,
    /// Exact string comparison instead of alias-aware matching.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    pub predicted: Option<String>,
    pub gold: String,
    pub correct: bool,
    /// Category the rules themselves assigned.
    pub detected_category: Option<Category>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub total: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    /// Keyed by gold category, "uncategorized" when a record has none.
    pub per_category: BTreeMap<String, CategoryScore>,
    pub unattributed: usize,
    /// Accuracy over attributed records only.
    pub attributed_precision: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
    pub events: Vec<Event>,
}

pub const UNCATEGORIZED: &str = "uncategorized";

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

fn normalized(s: &str) -> String {
    let s = collapse_whitespace(&normalize_quotes(s));
    s.trim_matches(|c: char| c == '"' || c.is_whitespace()).to_string()
}

fn find_target<'a>(analyzed: &'a AnalyzedDocument, utterance: &str) -> Option<&'a Utterance> {
    let want = normalized(utterance);
    let texts: Vec<String> = analyzed
        .utterances
        .iter()
        .map(|u| normalized(u.text(&analyzed.doc)))
        .collect();
    texts
        .iter()
        .position(|t| *t == want)
        .or_else(|| {
            texts
                .iter()
                .position(|t| !t.is_empty() && (t.contains(&want) || want.contains(t.as_str())))
        })
        .map(|i| &analyzed.utterances[i])
}

fn evaluate_record(rec: &BenchmarkRecord, cfg: &EvalConfig) -> (Prediction, Vec<Event>) {
    let pipeline = cfg
        .pipeline
        .clone()
        .with_recognizer(CandidateRecognizer::new(rec.candidates.clone()));
    let lex = pipeline.lex.clone();
    let mut events = Vec::new();
    let mut analyzed = pipeline.analyze_text(&rec.record_id, &rec.context);
    if find_target(&analyzed, &rec.utterance).is_none() {
        let event = Event::UtteranceNotFound {
            record_id: rec.record_id.clone(),
        };
        event.emit();
        events.push(event);
        let context = format!("{}\n\n\"{}\"", rec.context.trim_end(), normalized(&rec.utterance));
        analyzed = pipeline.analyze_text(&rec.record_id, &context);
    }
    let target = find_target(&analyzed, &rec.utterance);
    let attr = target.and_then(|u| analyzed.attribution(u.id));
    let entity = target.and_then(|u| analyzed.speaker(u.id));
    let predicted = entity.map(|e| {
        rec.candidates
            .iter()
            .find(|c| e.has_alias(c))
            .or_else(|| rec.candidates.iter().find(|c| e.matches_name(c, &lex)))
            .cloned()
            .unwrap_or_else(|| e.canonical.clone())
    });
    let correct = match (entity, &predicted) {
        (Some(_), Some(p)) if cfg.strict => *p == rec.gold_speaker,
        (Some(e), _) => e.aliases.iter().any(|a| names_match(a, &rec.gold_speaker, &lex)),
        _ => false,
    };
    events.extend(analyzed.events.iter().cloned());
    (
        Prediction {
            record_id: rec.record_id.clone(),
            predicted,
            gold: rec.gold_speaker.clone(),
            correct,
            detected_category: attr.and_then(|a| classify_category(a, &analyzed.votes)),
        },
        events,
    )
}

fn check_language(rec: &BenchmarkRecord) -> Result<()> {
    let lang = rec.language.to_ascii_lowercase();
    if lang == "en" || lang.starts_with("en-") || lang.starts_with("en_") {
        Ok(())
    } else {
        Err(Error::UnsupportedLanguage {
            record_id: rec.record_id.clone(),
            language: rec.language.clone(),
        })
    }
}

/// Runs the rules on every record with mentions restricted to its candidates.
///
/// Unattributed records count as incorrect.
pub fn evaluate(records: &[BenchmarkRecord], cfg: &EvalConfig) -> Result<EvalOutcome> {
    for rec in records {
        check_language(rec)?;
    }
    let results: Vec<(Prediction, Vec<Event>)> = records.par_iter().map(|r| evaluate_record(r, cfg)).collect();
    let mut report = EvalReport::default();
    let mut predictions = Vec::with_capacity(results.len());
    let mut events = Vec::new();
    for (rec, (pred, evs)) in records.iter().zip(results) {
        report.total += 1;
        report.correct += usize::from(pred.correct);
        report.unattributed += usize::from(pred.predicted.is_none());
        let key = rec.category.map_or(UNCATEGORIZED.to_string(), |c| c.to_string());
        let score = report.per_category.entry(key).or_default();
        score.total += 1;
        score.correct += usize::from(pred.correct);
        predictions.push(pred);
        events.extend(evs);
    }
    report.accuracy = ratio(report.correct, report.total);
    report.attributed_precision = ratio(report.correct, report.total - report.unattributed);
    for score in report.per_category.values_mut() {
        score.accuracy = ratio(score.correct, score.total);
    }
    Ok(EvalOutcome {
        report,
        predictions,
        events,
    })
}

/// Per-category accuracy table, one row per category present.
pub fn stratified_report(report: &EvalReport) -> String {
    let mut out = format!("{:<14} {:>7} {:>8} {:>9}\n", "category", "total", "correct", "accuracy");
    let order = Category::ALL
        .iter()
        .map(|c| c.to_string())
        .chain([UNCATEGORIZED.to_string()]);
    for key in order {
        if let Some(s) = report.per_category.get(&key) {
            let acc = s.accuracy.map_or("-".to_string(), |a| format!("{:.1}%", a * 100.0));
            out.push_str(&format!("{key:<14} {:>7} {:>8} {acc:>9}\n", s.total, s.correct));
        }
    }
    out
}

/// Writes the report as pretty JSON.
pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    std::fs::write(path, json + "\n").map_err(|e| Error::io(PathBuf::from(path), e))
}
