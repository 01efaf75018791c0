//! Loading raw book text and segmenting it into paragraphs and sentences.
//!
//! Offsets everywhere in the crate are UTF-8 byte offsets into
//! [`Document::text`], always on character boundaries.

use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::events::Event;
use crate::lexicon::{Abbreviations, default_abbreviations};
use crate::quotes::{QuoteRegion, QuoteStyle, scan_quote_regions};

/// Half-open byte range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span {start}..{end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn contains_offset(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    pub fn overlaps(&self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub text: String,
    pub source: String,
}

impl RawDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        RawDocument {
            doc_id: doc_id.into(),
            text: text.into(),
            source: String::from("inline"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub paragraphs: Vec<Span>,
    pub sentences: Vec<Span>,
    pub sentence_to_paragraph: Vec<usize>,
    /// Quote regions in document order, as scanned during segmentation.
    pub quote_regions: Vec<QuoteRegion>,
}

impl Document {
    pub fn sentence_text(&self, idx: usize) -> &str {
        self.sentences[idx].slice(&self.text)
    }

    pub fn paragraph_text(&self, idx: usize) -> &str {
        self.paragraphs[idx].slice(&self.text)
    }

    /// Index of the sentence containing `offset`.
    pub fn sentence_at(&self, offset: usize) -> Option<usize> {
        let idx = self.sentences.partition_point(|s| s.end <= offset);
        (idx < self.sentences.len() && self.sentences[idx].contains_offset(offset)).then_some(idx)
    }

    /// Sentence indices belonging to paragraph `para`.
    pub fn paragraph_sentences(&self, para: usize) -> std::ops::Range<usize> {
        let start = self.sentence_to_paragraph.partition_point(|&p| p < para);
        let end = self.sentence_to_paragraph.partition_point(|&p| p <= para);
        start..end
    }

    /// Whether `offset` falls strictly between the marks of a quote region.
    pub fn in_quote(&self, offset: usize) -> bool {
        self.quote_region_at(offset).is_some()
    }

    pub fn quote_region_at(&self, offset: usize) -> Option<&QuoteRegion> {
        let idx = self.quote_regions.partition_point(|q| q.interior.end <= offset);
        self.quote_regions
            .get(idx)
            .filter(|q| q.interior.contains_offset(offset))
    }
}

/// Reads a UTF-8 text file. The BOM is dropped; nothing else is transformed.
pub fn load_document(path: &Path) -> Result<RawDocument> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from_utf8(bytes).map_err(|e| Error::Encoding {
        path: path.to_path_buf(),
        reason: format!("invalid UTF-8 at byte {}", e.utf8_error().valid_up_to()),
    })?;
    if text.starts_with('\u{feff}') {
        text.drain(..'\u{feff}'.len_utf8());
    }
    if text.trim().is_empty() {
        return Err(Error::Encoding {
            path: path.to_path_buf(),
            reason: "file contains no text".into(),
        });
    }
    let doc_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(RawDocument {
        doc_id,
        text,
        source: path.display().to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct Stripped {
    pub doc: RawDocument,
    pub markers_found: bool,
    pub events: Vec<Event>,
}

fn is_marker(line: &str, kind: &str) -> bool {
    let t = line.trim_start();
    if !t.starts_with("***") {
        return false;
    }
    let upper = t.to_uppercase();
    upper.contains(kind) && upper.contains("PROJECT GUTENBERG")
}

/// Keeps the body between Gutenberg-style `*** START OF` / `*** END OF` marker lines.
pub fn strip_boilerplate(doc: RawDocument) -> Result<Stripped> {
    let mut start = None;
    let mut end = None;
    let mut offset = 0;
    for line in doc.text.split_inclusive('\n') {
        if start.is_none() && is_marker(line, "START OF") {
            start = Some(offset + line.len());
        } else if end.is_none() && is_marker(line, "END OF") {
            end = Some(offset);
        }
        offset += line.len();
    }
    if start.is_none() && end.is_none() {
        let event = Event::NoBoilerplateMarkers {
            doc_id: doc.doc_id.clone(),
        };
        event.emit();
        return Ok(Stripped {
            doc,
            markers_found: false,
            events: vec![event],
        });
    }
    let from = start.unwrap_or(0);
    let to = end.filter(|&e| e >= from).unwrap_or(doc.text.len());
    let body = doc.text[from..to].trim_matches(|c| c == '\n' || c == '\r');
    if body.trim().is_empty() {
        return Err(Error::EmptyBody { doc_id: doc.doc_id });
    }
    Ok(Stripped {
        doc: RawDocument {
            text: body.to_string(),
            ..doc
        },
        markers_found: true,
        events: Vec::new(),
    })
}

/// Maps curly double quotes to `"` and in-word U+2019 to `'`.
/// Character count is preserved.
pub fn normalize_quotes(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    chars
        .iter()
        .enumerate()
        .map(|(i, &c)| match c {
            '\u{201C}' | '\u{201D}' => '"',
            '\u{2019}'
                if i > 0 && chars[i - 1].is_alphanumeric() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()) =>
            {
                '\''
            }
            other => other,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SegmentConfig {
    pub abbreviations: Abbreviations,
    pub quote_style: QuoteStyle,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            abbreviations: default_abbreviations(),
            quote_style: QuoteStyle::Double,
        }
    }
}

/// Splits quote-normalized text into paragraphs (blank-line separated) and
/// sentences.
///
/// The text is first put in NFC form and line breaks inside a paragraph are
/// replaced by spaces; both keep every later offset stable. Sentences tile
/// their paragraph exactly, with inter-sentence whitespace attached to the
/// preceding sentence.
pub fn segment(raw: &RawDocument, cfg: &SegmentConfig) -> Document {
    let nfc: String = raw.text.nfc().collect();
    let paragraphs = find_paragraphs(&nfc);

    let mut bytes = nfc.into_bytes();
    for p in &paragraphs {
        for b in &mut bytes[p.start..p.end] {
            if matches!(*b, b'\n' | b'\r' | b'\t') {
                *b = b' ';
            }
        }
    }
    let text = String::from_utf8(bytes).expect("ascii substitution keeps UTF-8 valid");

    let mut sentences = Vec::new();
    let mut sentence_to_paragraph = Vec::new();
    let mut quote_regions = Vec::new();
    for (pi, p) in paragraphs.iter().enumerate() {
        let regions = scan_quote_regions(&text, *p, pi, cfg.quote_style);
        let bounds = sentence_boundaries(&text, *p, &regions, &cfg.abbreviations);
        let mut start = p.start;
        for b in bounds.into_iter().chain(std::iter::once(p.end)) {
            sentences.push(Span::new(start, b));
            sentence_to_paragraph.push(pi);
            start = b;
        }
        quote_regions.extend(regions);
    }

    Document {
        doc_id: raw.doc_id.clone(),
        text,
        paragraphs,
        sentences,
        sentence_to_paragraph,
        quote_regions,
    }
}

fn find_paragraphs(text: &str) -> Vec<Span> {
    let mut out = Vec::new();
    let mut current: Option<Span> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let content = line.trim();
        if content.is_empty() {
            if let Some(p) = current.take() {
                out.push(p);
            }
        } else {
            let lead = line.len() - line.trim_start().len();
            let s = offset + lead;
            let e = s + line.trim_start().trim_end().len();
            current = Some(match current {
                Some(p) => Span::new(p.start, e),
                None => Span::new(s, e),
            });
        }
        offset += line.len();
    }
    out.extend(current);
    out
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '\u{2026}')
}

/// Offsets (absolute) where a new sentence starts inside paragraph `p`.
fn sentence_boundaries(text: &str, p: Span, regions: &[QuoteRegion], abbreviations: &Abbreviations) -> Vec<usize> {
    let par = p.slice(text);
    let inside = |abs: usize| regions.iter().any(|r| r.interior.contains_offset(abs));
    let is_open_mark = |abs: usize| regions.iter().any(|r| r.open.start == abs);
    let close_mark_at = |abs: usize| regions.iter().find_map(|r| r.close.filter(|c| c.start == abs));

    let chars: Vec<(usize, char)> = par.char_indices().map(|(i, c)| (p.start + i, c)).collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (abs, c) = chars[k];
        let mut end_idx = None;
        if is_terminator(c) && !inside(abs) {
            let mut j = k;
            while j < chars.len() && is_terminator(chars[j].1) {
                j += 1;
            }
            let only_period = j == k + 1 && c == '.';
            if !(only_period && is_abbreviation(par, abs - p.start, abbreviations)) {
                while j < chars.len() && matches!(chars[j].1, ')' | ']') {
                    j += 1;
                }
                end_idx = Some(j);
            }
            k = j.max(k + 1);
        } else if let Some(close) = close_mark_at(abs) {
            let before = par[..abs - p.start].trim_end().chars().next_back();
            if before.is_some_and(is_terminator) {
                let mut j = k;
                while j < chars.len() && chars[j].0 < close.end {
                    j += 1;
                }
                end_idx = Some(j);
            }
            k += 1;
        } else {
            k += 1;
        }

        let Some(mut j) = end_idx else { continue };
        if j >= chars.len() || !chars[j].1.is_whitespace() {
            continue;
        }
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        if j >= chars.len() {
            continue;
        }
        let (next_abs, next) = chars[j];
        if (next.is_uppercase() || next.is_ascii_digit() || next == '(' || is_open_mark(next_abs))
            && out.last() != Some(&next_abs)
        {
            out.push(next_abs);
        }
    }
    out
}

/// Whether the period at relative offset `dot` closes a known abbreviation
/// or a single-letter initial.
fn is_abbreviation(par: &str, dot: usize, abbreviations: &Abbreviations) -> bool {
    let head = &par[..dot];
    let word_start = head
        .rfind(|c: char| c.is_whitespace() || matches!(c, '"' | '(' | '\'' | '\u{2018}' | '\u{201C}'))
        .map(|i| i + head[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    let word = &head[word_start..];
    if word.is_empty() {
        return false;
    }
    let mut cs = word.chars();
    if let (Some(first), None) = (cs.next(), cs.next())
        && first.is_uppercase()
    {
        return true;
    }
    abbreviations.contains(&format!("{word}."))
}
