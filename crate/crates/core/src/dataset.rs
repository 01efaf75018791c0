//! Distant-supervision instances: context windows, speaker masking,
//! name anonymization, token budgets and export.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::Attribution;
use crate::error::{Error, Result};
use crate::ingest::{Document, Span};
use crate::mentions::{CharacterEntity, EntityId, Mention, at_token_boundary};
use crate::pipeline::AnalyzedDocument;
use crate::quotes::{UttId, Utterance};
use crate::rules::{Polarity, Vote, VoteSource};
use crate::token::collapse_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Explicit,
    Anaphoric,
    Implicit,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Explicit, Category::Anaphoric, Category::Implicit];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Explicit => "explicit",
            Category::Anaphoric => "anaphoric",
            Category::Implicit => "implicit",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit" => Ok(Category::Explicit),
            "anaphoric" => Ok(Category::Anaphoric),
            "implicit" => Ok(Category::Implicit),
            other => Err(format!("unknown category {other:?}")),
        }
    }
}

/// Explicit when a named speech tag decided, anaphoric when a resolved
/// pronoun tag did, implicit otherwise. `None` for unattributed utterances.
pub fn classify_category(attr: &Attribution, votes: &[Vote]) -> Option<Category> {
    let speaker = attr.speaker.as_ref()?;
    let supports = |source: VoteSource| {
        votes
            .iter()
            .any(|v| v.utt == attr.utt && &v.entity == speaker && v.polarity == Polarity::For && v.source == source)
    };
    Some(if supports(VoteSource::NamedTag) {
        Category::Explicit
    } else if supports(VoteSource::ResolvedTag) && !attr.propagated {
        Category::Anaphoric
    } else {
        Category::Implicit
    })
}

/// The utterance's host sentences plus up to three before and two after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub sentence_ids: Vec<usize>,
    pub paragraph_ids: Vec<usize>,
    /// Rendered sentence texts, whitespace collapsed, parallel to `sentence_ids`.
    pub sentences: Vec<String>,
    /// Positions in `sentences` of the host sentences.
    pub host: std::ops::Range<usize>,
    /// Rendered utterance text.
    pub utterance: String,
}

impl ContextWindow {
    /// Paragraphs on separate lines, sentences within a paragraph joined by a space.
    pub fn text(&self) -> String {
        render_sentences(&self.sentences, &self.paragraph_ids, 0..self.sentences.len())
    }

    pub fn position_of(&self, sentence: usize) -> Option<usize> {
        self.sentence_ids.iter().position(|&s| s == sentence)
    }
}

fn render_sentences(sentences: &[String], paragraphs: &[usize], range: std::ops::Range<usize>) -> String {
    let mut out = String::new();
    for i in range.clone() {
        if i > range.start {
            out.push(if paragraphs[i] == paragraphs[i - 1] { ' ' } else { '\n' });
        }
        out.push_str(&sentences[i]);
    }
    out
}

pub fn build_context(doc: &Document, utt: &Utterance) -> ContextWindow {
    let first = utt.first_sentence().saturating_sub(3);
    let last = (utt.last_sentence() + 2).min(doc.sentences.len().saturating_sub(1));
    let sentence_ids: Vec<usize> = (first..=last).collect();
    ContextWindow {
        paragraph_ids: sentence_ids.iter().map(|&s| doc.sentence_to_paragraph[s]).collect(),
        sentences: sentence_ids
            .iter()
            .map(|&s| collapse_whitespace(doc.sentence_text(s)))
            .collect(),
        host: (utt.first_sentence() - first)..(utt.last_sentence() - first + 1),
        utterance: collapse_whitespace(utt.text(doc)),
        sentence_ids,
    }
}

/// Letters that are words on their own and so never serve as masked names.
pub const STANDALONE_LETTERS: [char; 2] = ['A', 'I'];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskingConfig {
    pub mask_probability: f64,
    pub letter_pool: Vec<char>,
    pub seed: u64,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig {
            mask_probability: 0.85,
            letter_pool: ('A'..='Z').filter(|c| !STANDALONE_LETTERS.contains(c)).collect(),
            seed: 0,
        }
    }
}

impl MaskingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_probability) {
            return Err(Error::Config(format!(
                "mask probability {} is outside [0, 1]",
                self.mask_probability
            )));
        }
        if self.letter_pool.is_empty() {
            return Err(Error::Config("letter pool is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &c in &self.letter_pool {
            if !c.is_ascii_uppercase() {
                return Err(Error::Config(format!(
                    "letter pool entry {c:?} is not an uppercase letter"
                )));
            }
            if STANDALONE_LETTERS.contains(&c) {
                return Err(Error::Config(format!("letter pool must not contain the word {c:?}")));
            }
            if !seen.insert(c) {
                return Err(Error::Config(format!("letter pool repeats {c:?}")));
            }
        }
        Ok(())
    }
}

/// Independent random stream per (seed, purpose, document, utterance).
pub fn rng_stream(seed: u64, label: &str, doc_id: &str, utt: UttId) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [label, doc_id] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update((utt.0 as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// With probability `mask_probability`, replaces the speech-tag mention
/// with "someone" ("Someone" at a sentence start). Returns whether it did.
///
/// Only a narration mention inside the window can be masked.
pub fn mask_explicit_speaker(
    window: &mut ContextWindow,
    doc: &Document,
    tag: &Mention,
    cfg: &MaskingConfig,
    rng: &mut impl Rng,
) -> bool {
    if tag.in_quote {
        return false;
    }
    let Some(pos) = window.position_of(tag.sentence) else {
        return false;
    };
    if !rng.gen_bool(cfg.mask_probability) {
        return false;
    }
    let s = doc.sentences[tag.sentence];
    let head = &doc.text[s.start..tag.span.start];
    let initial = !head.chars().any(char::is_alphanumeric);
    let word = if initial { "Someone" } else { "someone" };
    window.sentences[pos] = collapse_whitespace(&format!("{head}{word}{}", &doc.text[tag.span.end..s.end]));
    true
}

/// Masked name for the i-th draw: "Person X", or a two-letter code past the pool.
fn masked_names(count: usize, pool: &[char], rng: &mut impl Rng) -> Vec<String> {
    let mut letters: Vec<String> = pool.iter().map(|c| c.to_string()).collect();
    letters.shuffle(rng);
    if count > letters.len() {
        let mut codes: Vec<String> = ('A'..='Z')
            .flat_map(|a| ('A'..='Z').map(move |b| format!("{a}{b}")))
            .collect();
        codes.shuffle(rng);
        letters.extend(codes);
    }
    letters.truncate(count);
    letters.into_iter().map(|l| format!("Person {l}")).collect()
}

/// Replaces every token-bounded alias occurrence, longest alias first.
fn replace_aliases(text: &str, aliases: &[(String, String)]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    'scan: while i < text.len() {
        let rest = &text[i..];
        for (alias, name) in aliases {
            if rest.starts_with(alias.as_str()) && at_token_boundary(text, Span::new(i, i + alias.len())) {
                out.push_str(name);
                i += alias.len();
                continue 'scan;
            }
        }
        let c = rest.chars().next().expect("non-empty");
        out.push(c);
        i += c.len_utf8();
    }
    out
}

fn contains_alias(text: &str, alias: &str) -> Option<usize> {
    text.match_indices(alias)
        .map(|(p, _)| p)
        .find(|&p| at_token_boundary(text, Span::new(p, p + alias.len())))
}

/// Assigns each character in the window (plus `speaker`) a distinct masked
/// name and replaces all their aliases, inside quotes included.
///
/// Characters are listed in order of first occurrence in the window; the
/// speaker goes last when it is not mentioned at all.
pub fn anonymize_characters(
    window: &mut ContextWindow,
    entities: &[CharacterEntity],
    speaker: Option<&EntityId>,
    cfg: &MaskingConfig,
    rng: &mut impl Rng,
) -> Vec<(EntityId, String)> {
    let full = format!("{}\n{}", window.text(), window.utterance);
    let mut present: Vec<(usize, &CharacterEntity)> = entities
        .iter()
        .filter_map(|e| {
            e.aliases
                .iter()
                .filter_map(|a| contains_alias(&full, a))
                .min()
                .map(|p| (p, e))
        })
        .collect();
    present.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let mut order: Vec<&CharacterEntity> = present.into_iter().map(|(_, e)| e).collect();
    if let Some(s) = speaker
        && !order.iter().any(|e| &e.id == s)
        && let Some(e) = entities.iter().find(|e| &e.id == s)
    {
        order.push(e);
    }
    let names = masked_names(order.len(), &cfg.letter_pool, rng);
    let mapping: Vec<(EntityId, String)> = order.iter().map(|e| e.id.clone()).zip(names).collect();

    let mut aliases: Vec<(String, String)> = order
        .iter()
        .zip(&mapping)
        .flat_map(|(e, (_, name))| e.aliases.iter().map(move |a| (a.clone(), name.clone())))
        .collect();
    aliases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    for s in &mut window.sentences {
        *s = replace_aliases(s, &aliases);
    }
    window.utterance = replace_aliases(&window.utterance, &aliases);
    mapping
}

/// Token counter used for the context budget.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

pub fn people_line(candidates: &[String]) -> String {
    format!("People: {}", candidates.join("; "))
}

pub fn question(utterance: &str) -> String {
    format!("who said \"{utterance}\"?")
}

/// Drops context sentences until candidates + context + question fit `budget`.
///
/// Following sentences go first, from the end; then preceding sentences
/// from the start. Host sentences, the candidate list and the question are
/// never dropped.
pub fn truncate_to_budget(
    window: &mut ContextWindow,
    candidates: &[String],
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<()> {
    let fixed = counter.count(&people_line(candidates)) + counter.count(&question(&window.utterance));
    let sizes: Vec<usize> = window.sentences.iter().map(|s| counter.count(s)).collect();
    let host: usize = sizes[window.host.clone()].iter().sum();
    if fixed + host > budget {
        return Err(Error::BudgetImpossible {
            budget,
            required: fixed + host,
        });
    }
    let mut total: usize = fixed + sizes.iter().sum::<usize>();
    let mut lo = 0;
    let mut hi = window.sentences.len();
    while total > budget && hi > window.host.end {
        hi -= 1;
        total -= sizes[hi];
    }
    while total > budget && lo < window.host.start {
        total -= sizes[lo];
        lo += 1;
    }
    window.sentence_ids = window.sentence_ids[lo..hi].to_vec();
    window.paragraph_ids = window.paragraph_ids[lo..hi].to_vec();
    window.sentences = window.sentences[lo..hi].to_vec();
    window.host = (window.host.start - lo)..(window.host.end - lo);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub doc_id: String,
    pub utt_id: UttId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistantInstance {
    pub instance_id: String,
    pub context: String,
    pub utterance: String,
    pub candidates: Vec<String>,
    pub speaker: String,
    pub category: Category,
    /// Character offsets of the speaker in the candidate list of the rendered input.
    pub answer_span: (usize, usize),
    pub provenance: Provenance,
    /// Whether the speech-tag mention was replaced by "someone".
    pub masked: bool,
}

impl DistantInstance {
    /// `People: ...` line followed by the context.
    pub fn rendered_input(&self) -> String {
        format!("{}\n{}", people_line(&self.candidates), self.context)
    }

    pub fn question(&self) -> String {
        question(&self.utterance)
    }
}

/// Char offsets of candidate `index` inside [`people_line`].
fn answer_span(candidates: &[String], index: usize) -> (usize, usize) {
    let prefix = "People: ".chars().count() + candidates[..index].iter().map(|c| c.chars().count() + 2).sum::<usize>();
    (prefix, prefix + candidates[index].chars().count())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub masking: MaskingConfig,
    /// Whitespace tokens for candidates + context + question.
    pub budget: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            masking: MaskingConfig::default(),
            budget: 400,
        }
    }
}

/// One instance per attributed utterance, in document order.
///
/// Utterances whose irreducible parts exceed the budget are skipped with a warning.
pub fn build_instances(analyzed: &AnalyzedDocument, cfg: &DatasetConfig) -> Vec<DistantInstance> {
    build_instances_with(analyzed, cfg, &WhitespaceCounter)
}

pub fn build_instances_with(
    analyzed: &AnalyzedDocument,
    cfg: &DatasetConfig,
    counter: &dyn TokenCounter,
) -> Vec<DistantInstance> {
    let doc = &analyzed.doc;
    let mut out = Vec::new();
    for (i, utt) in analyzed.utterances.iter().enumerate() {
        let Some(attr) = analyzed.attribution(utt.id) else {
            continue;
        };
        let Some(category) = classify_category(attr, &analyzed.votes) else {
            continue;
        };
        let speaker = attr.speaker.as_ref().expect("categorized utterances are attributed");
        let mut window = build_context(doc, utt);
        let mut masked = false;
        if category != Category::Implicit
            && let Some(tag) = analyzed.tags[i]
        {
            let mut rng = rng_stream(cfg.masking.seed, "mask", &doc.doc_id, utt.id);
            masked = mask_explicit_speaker(
                &mut window,
                doc,
                &analyzed.mentions[tag.mention],
                &cfg.masking,
                &mut rng,
            );
        }
        let mut rng = rng_stream(cfg.masking.seed, "names", &doc.doc_id, utt.id);
        let mapping = anonymize_characters(&mut window, &analyzed.entities, Some(speaker), &cfg.masking, &mut rng);
        let candidates: Vec<String> = mapping.iter().map(|(_, n)| n.clone()).collect();
        let index = mapping
            .iter()
            .position(|(e, _)| e == speaker)
            .expect("speaker is always mapped");
        if let Err(e) = truncate_to_budget(&mut window, &candidates, cfg.budget, counter) {
            tracing::warn!(doc_id = %doc.doc_id, utt = %utt.id, error = %e, "instance skipped");
            continue;
        }
        out.push(DistantInstance {
            instance_id: format!("{}:{}", doc.doc_id, utt.id),
            context: window.text(),
            utterance: window.utterance.clone(),
            answer_span: answer_span(&candidates, index),
            speaker: candidates[index].clone(),
            candidates,
            category,
            provenance: Provenance {
                doc_id: doc.doc_id.clone(),
                utt_id: utt.id,
            },
            masked,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    #[default]
    InstanceLines,
    QaLines,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instance-lines" | "instances" => Ok(ExportFormat::InstanceLines),
            "qa-lines" | "qa" => Ok(ExportFormat::QaLines),
            other => Err(format!(
                "unknown format {other:?} (expected instance-lines or qa-lines)"
            )),
        }
    }
}

/// Span-selection record: the answer is `input[answer_start..answer_end]` in chars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub input: String,
    pub question: String,
    pub answer: String,
    pub answer_start: usize,
    pub answer_end: usize,
}

pub fn render_qa(inst: &DistantInstance) -> QaRecord {
    QaRecord {
        id: inst.instance_id.clone(),
        input: inst.rendered_input(),
        question: inst.question(),
        answer: inst.speaker.clone(),
        answer_start: inst.answer_span.0,
        answer_end: inst.answer_span.1,
    }
}

/// Writes one JSON record per line; returns the number of lines.
pub fn export_instances(instances: &[DistantInstance], path: &Path, format: ExportFormat) -> Result<usize> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_instances(instances, &mut w, format).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(instances.len())
}

pub fn write_instances(instances: &[DistantInstance], w: &mut impl Write, format: ExportFormat) -> std::io::Result<()> {
    for inst in instances {
        let line = match format {
            ExportFormat::InstanceLines => serde_json::to_string(inst),
            ExportFormat::QaLines => serde_json::to_string(&render_qa(inst)),
        }
        .map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn import_instances(path: &Path) -> Result<Vec<DistantInstance>> {
    read_lines(path)
}

pub fn import_qa(path: &Path) -> Result<Vec<QaRecord>> {
    read_lines(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub instances: usize,
    pub per_category: BTreeMap<Category, usize>,
    /// Absent when there are no instances.
    pub category_fractions: Option<BTreeMap<Category, f64>>,
    /// Explicit plus anaphoric instances.
    pub mask_eligible: usize,
    pub masked: usize,
    pub masking_rate: Option<f64>,
    pub mean_utterance_tokens: Option<f64>,
    /// Seeded sample of instance ids for manual audit, in input order.
    pub audit_sample: Vec<String>,
}

pub fn corpus_stats(instances: &[DistantInstance], sample_size: usize, seed: u64) -> CorpusStats {
    let n = instances.len();
    let mut per_category: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for inst in instances {
        *per_category.entry(inst.category).or_default() += 1;
    }
    let eligible = instances.iter().filter(|i| i.category != Category::Implicit).count();
    let masked = instances.iter().filter(|i| i.masked).count();
    let tokens: usize = instances.iter().map(|i| i.utterance.split_whitespace().count()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, sample_size.min(n)).into_vec();
    picked.sort_unstable();
    CorpusStats {
        instances: n,
        category_fractions: (n > 0).then(|| per_category.iter().map(|(c, k)| (*c, *k as f64 / n as f64)).collect()),
        per_category,
        mask_eligible: eligible,
        masked,
        masking_rate: (eligible > 0).then(|| masked as f64 / eligible as f64),
        mean_utterance_tokens: (n > 0).then(|| tokens as f64 / n as f64),
        audit_sample: picked.into_iter().map(|i| instances[i].instance_id.clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Pipeline;

    const HUNT_PASSAGE: &str = "But to this Mr. Jorrocks would not assent, alleging that he should feel himself to be a burden.\n\n\
        \"It is always the way,\" said Tom. \"If you miss a day, it is sure to be the best thing of the season.\"\n\n\
        \"And I suppose you were with Harry.\"\n\n\
        \"I wasn't far off. I wish you had been there.\" On the next day the meet was at the kennels.";

    fn chars(s: &str, span: (usize, usize)) -> String {
        s.chars().skip(span.0).take(span.1 - span.0).collect()
    }

    #[test]
    fn window_bounds() {
        let text = (0..15)
            .map(|i| format!("Sentence number {i} is here."))
            .collect::<Vec<_>>()
            .join(" ");
        let text = text.replace("Sentence number 10 is here.", "\"Sentence number 10 is here.\"");
        let a = Pipeline::default().analyze_text("w", &text);
        let w = build_context(&a.doc, &a.utterances[0]);
        assert_eq!(w.sentence_ids, (7..=12).collect::<Vec<_>>());

        let a = Pipeline::default().analyze_text("w", "\"First.\" Two. Three. Four. Five.");
        let w = build_context(&a.doc, &a.utterances[0]);
        assert_eq!(w.sentence_ids, vec![0, 1, 2]);
    }

    #[test]
    fn masking_is_forced_at_the_extremes() {
        let a = Pipeline::default().analyze_text("m", "\"Go on,\" said Elizabeth.");
        let tag = &a.mentions[a.tags[0].unwrap().mention];
        let mut always = MaskingConfig {
            mask_probability: 1.0,
            ..MaskingConfig::default()
        };
        let mut w = build_context(&a.doc, &a.utterances[0]);
        assert!(mask_explicit_speaker(
            &mut w,
            &a.doc,
            tag,
            &always,
            &mut ChaCha8Rng::seed_from_u64(1)
        ));
        assert_eq!(w.text(), "\"Go on,\" said someone.");
        always.mask_probability = 0.0;
        let mut w = build_context(&a.doc, &a.utterances[0]);
        assert!(!mask_explicit_speaker(
            &mut w,
            &a.doc,
            tag,
            &always,
            &mut ChaCha8Rng::seed_from_u64(1)
        ));
        assert_eq!(w.text(), "\"Go on,\" said Elizabeth.");
    }

    #[test]
    fn masking_capitalizes_at_sentence_start() {
        let a = Pipeline::default().analyze_text("m", "Elizabeth said, \"Go on.\"");
        let tag = &a.mentions[a.tags[0].unwrap().mention];
        let cfg = MaskingConfig {
            mask_probability: 1.0,
            ..MaskingConfig::default()
        };
        let mut w = build_context(&a.doc, &a.utterances[0]);
        mask_explicit_speaker(&mut w, &a.doc, tag, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(w.text(), "Someone said, \"Go on.\"");
    }

    #[test]
    fn anonymization_is_deterministic_and_distinct() {
        let a = Pipeline::default().analyze_text("n", "Elizabeth met Jane. \"Hello, Jane,\" said Elizabeth.");
        let cfg = MaskingConfig::default();
        let run = || {
            let mut w = build_context(&a.doc, &a.utterances[0]);
            let mut rng = rng_stream(7, "names", "n", UttId(0));
            let m = anonymize_characters(&mut w, &a.entities, None, &cfg, &mut rng);
            (m, w)
        };
        let (m1, w1) = run();
        let (m2, _) = run();
        assert_eq!(m1, m2);
        assert_eq!(m1.len(), 2);
        assert_ne!(m1[0].1, m1[1].1);
        assert!(!w1.text().contains("Elizabeth") && !w1.text().contains("Jane"));
        assert!(w1.utterance.contains(&m1[1].1));
    }

    #[test]
    fn letter_pool_never_yields_standalone_words() {
        let cfg = MaskingConfig::default();
        for seed in 0..200 {
            let names = masked_names(24, &cfg.letter_pool, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(!names.contains(&"Person I".to_string()));
            assert!(!names.contains(&"Person A".to_string()));
        }
    }

    #[test]
    fn pool_exhaustion_uses_two_letter_codes() {
        let cfg = MaskingConfig::default();
        let names = masked_names(30, &cfg.letter_pool, &mut ChaCha8Rng::seed_from_u64(3));
        let distinct: std::collections::BTreeSet<&String> = names.iter().collect();
        assert_eq!(distinct.len(), 30);
        assert_eq!(names.iter().filter(|n| n.len() == "Person XY".len()).count(), 6);
    }

    #[test]
    fn config_rejects_bad_pools() {
        let mut cfg = MaskingConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.letter_pool.push('I');
        assert!(cfg.validate().is_err());
        cfg = MaskingConfig {
            mask_probability: 1.5,
            ..MaskingConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn window_of(sizes: &[usize], host: usize) -> ContextWindow {
        ContextWindow {
            sentence_ids: (0..sizes.len()).collect(),
            paragraph_ids: vec![0; sizes.len()],
            sentences: sizes.iter().map(|&n| vec!["w"; n].join(" ")).collect(),
            host: host..host + 1,
            utterance: "u".into(),
        }
    }

    #[test]
    fn truncation_cases() {
        let cands = vec!["Person X".to_string()];
        // fixed = 3 (people line) + 3 (question)
        let mut w = window_of(&[10, 10, 10], 1);
        truncate_to_budget(&mut w, &cands, 100, &WhitespaceCounter).unwrap();
        assert_eq!(w.sentences.len(), 3);

        let mut w = window_of(&[10, 10, 30, 30, 30], 1);
        truncate_to_budget(&mut w, &cands, 56, &WhitespaceCounter).unwrap();
        assert_eq!(w.sentence_ids, vec![0, 1, 2]);

        let mut w = window_of(&[30, 10, 30], 1);
        truncate_to_budget(&mut w, &cands, 20, &WhitespaceCounter).unwrap();
        assert_eq!(w.sentence_ids, vec![1]);
        assert_eq!(w.host, 0..1);

        let many: Vec<String> = (0..50).map(|i| format!("Person {i}")).collect();
        let mut w = window_of(&[1, 1, 1], 1);
        assert!(matches!(
            truncate_to_budget(&mut w, &many, 40, &WhitespaceCounter),
            Err(Error::BudgetImpossible { .. })
        ));
    }

    #[test]
    fn hunting_passage_qa_record() {
        let a = Pipeline::default().analyze_text("hunt", HUNT_PASSAGE);
        let cfg = DatasetConfig {
            masking: MaskingConfig {
                mask_probability: 0.0,
                ..MaskingConfig::default()
            },
            ..DatasetConfig::default()
        };
        let inst = build_instances(&a, &cfg);
        let last = inst
            .iter()
            .find(|i| i.utterance == "I wasn't far off. I wish you had been there.")
            .expect("utterance attributed by alternation");
        let qa = render_qa(last);
        assert_eq!(
            qa.question,
            "who said \"I wasn't far off. I wish you had been there.\"?"
        );
        assert!(qa.input.starts_with("People: "));
        assert_eq!(chars(&qa.input, (qa.answer_start, qa.answer_end)), qa.answer);
        let first = inst.iter().find(|i| i.utterance == "It is always the way,").unwrap();
        assert_eq!(first.category, Category::Explicit);
        assert_eq!(a.speaker(last.provenance.utt_id).unwrap().canonical, "Tom");
    }

    #[test]
    fn round_trip_and_empty_export() {
        let dir = tempfile::tempdir().unwrap();
        let a = Pipeline::default().analyze_text("rt", HUNT_PASSAGE);
        let inst = build_instances(&a, &DatasetConfig::default());
        let p = dir.path().join("i.jsonl");
        assert_eq!(
            export_instances(&inst, &p, ExportFormat::InstanceLines).unwrap(),
            inst.len()
        );
        assert_eq!(import_instances(&p).unwrap(), inst);
        let q = dir.path().join("q.jsonl");
        assert_eq!(export_instances(&[], &q, ExportFormat::QaLines).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&q).unwrap(), "");
    }

    #[test]
    fn stats_cases() {
        assert_eq!(corpus_stats(&[], 10, 1).category_fractions, None);
        let a = Pipeline::default().analyze_text("s", HUNT_PASSAGE);
        let inst = build_instances(&a, &DatasetConfig::default());
        let s1 = corpus_stats(&inst, 2, 9);
        let s2 = corpus_stats(&inst, 2, 9);
        assert_eq!(s1.audit_sample, s2.audit_sample);
        assert_eq!(s1.per_category.values().sum::<usize>(), inst.len());
    }
}
