//! Quoted-utterance extraction by pairing quotation marks.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::events::Event;
use crate::ingest::{Document, Span};
use crate::token::whitespace_tokens;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuoteStyle {
    /// `"..."` dialogue.
    #[default]
    Double,
    /// British `'...'` dialogue; apostrophes make this ambiguous, so it is opt-in.
    Single,
}

impl QuoteStyle {
    pub fn from_flag(single_quote_dialogue: bool) -> Self {
        if single_quote_dialogue {
            QuoteStyle::Single
        } else {
            QuoteStyle::Double
        }
    }
}

/// A paired (or dangling) quotation inside one paragraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteRegion {
    pub paragraph: usize,
    /// The opening mark itself.
    pub open: Span,
    /// The closing mark, absent when the quote runs to the paragraph end.
    pub close: Option<Span>,
    /// Text between the marks; runs to the paragraph end when unclosed.
    pub interior: Span,
}

fn mark_span(start: usize, c: char) -> Span {
    Span::new(start, start + c.len_utf8())
}

/// Pairs quote marks inside paragraph `p` by alternation.
pub(crate) fn scan_quote_regions(text: &str, p: Span, paragraph: usize, style: QuoteStyle) -> Vec<QuoteRegion> {
    let par = p.slice(text);
    let chars: Vec<(usize, char)> = par.char_indices().collect();
    let mut out = Vec::new();
    let mut open: Option<Span> = None;
    for (k, &(i, c)) in chars.iter().enumerate() {
        let prev = k.checked_sub(1).map(|j| chars[j].1);
        let next = chars.get(k + 1).map(|&(_, n)| n);
        let (can_open, can_close) = match style {
            QuoteStyle::Double => {
                let is_mark = matches!(c, '"' | '\u{201C}' | '\u{201D}');
                (is_mark, is_mark)
            }
            QuoteStyle::Single => {
                if !matches!(c, '\'' | '\u{2018}' | '\u{2019}') {
                    (false, false)
                } else {
                    let opens = prev.is_none_or(|p| p.is_whitespace() || "([\u{2014}-\"".contains(p))
                        && next.is_some_and(|n| !n.is_whitespace());
                    let closes = prev.is_some_and(|p| !p.is_whitespace()) && next.is_none_or(|n| !n.is_alphanumeric());
                    (opens && c != '\u{2019}', closes && c != '\u{2018}')
                }
            }
        };
        let abs = p.start + i;
        match open {
            None if can_open => open = Some(mark_span(abs, c)),
            Some(o) if can_close => {
                let close = mark_span(abs, c);
                out.push(QuoteRegion {
                    paragraph,
                    open: o,
                    close: Some(close),
                    interior: Span::new(o.end, close.start),
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(o) = open {
        out.push(QuoteRegion {
            paragraph,
            open: o,
            close: None,
            interior: Span::new(o.end, p.end),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UttId(pub usize);

impl fmt::Display for UttId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{:05}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: UttId,
    /// Content between the quote marks, marks excluded.
    pub span: Span,
    pub sentence_ids: Vec<usize>,
    pub paragraph_id: usize,
    pub continuation_of: Option<UttId>,
}

impl Utterance {
    pub fn text<'a>(&self, doc: &'a Document) -> &'a str {
        self.span.slice(&doc.text)
    }

    pub fn first_sentence(&self) -> usize {
        self.sentence_ids[0]
    }

    pub fn last_sentence(&self) -> usize {
        *self
            .sentence_ids
            .last()
            .expect("utterances overlap at least one sentence")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub utterances: Vec<Utterance>,
    pub events: Vec<Event>,
}

/// Every non-empty quote region becomes an utterance, in document order.
///
/// A quote left open at a paragraph end is kept only when the next
/// paragraph opens with a quote mark; that paragraph's first utterance is
/// linked back through `continuation_of`. Other dangling quotes are skipped
/// and reported as `UnbalancedQuotes`.
pub fn extract_utterances(doc: &Document) -> Extraction {
    let mut out = Extraction::default();
    let mut pending_link: Option<(usize, UttId)> = None;
    for region in &doc.quote_regions {
        let pi = region.paragraph;
        if region.close.is_none() {
            let next_opens = doc
                .paragraphs
                .get(pi + 1)
                .is_some_and(|next| doc.quote_regions.iter().any(|r| r.open.start == next.start));
            if !next_opens {
                let event = Event::UnbalancedQuotes {
                    doc_id: doc.doc_id.clone(),
                    paragraph: pi,
                    offset: region.open.start,
                };
                event.emit();
                out.events.push(event);
                continue;
            }
        }
        if region.interior.slice(&doc.text).trim().is_empty() {
            continue;
        }
        let id = UttId(out.utterances.len());
        let continuation_of = match pending_link {
            Some((para, prev)) if para + 1 == pi => {
                pending_link = None;
                Some(prev)
            }
            _ => None,
        };
        let first = doc
            .sentence_at(region.interior.start)
            .expect("interior inside a sentence");
        let last = doc
            .sentence_at(region.interior.end - 1)
            .expect("interior inside a sentence");
        out.utterances.push(Utterance {
            id,
            span: region.interior,
            sentence_ids: (first..=last).collect(),
            paragraph_id: pi,
            continuation_of,
        });
        if region.close.is_none() {
            pending_link = Some((pi, id));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceStats {
    pub count: usize,
    /// Mean whitespace-token length; absent when there are no utterances.
    pub mean_tokens: Option<f64>,
    /// Share of paragraphs holding at least one utterance.
    pub quoted_paragraph_fraction: Option<f64>,
}

pub fn utterance_stats(doc: &Document, utts: &[Utterance]) -> UtteranceStats {
    let total_tokens: usize = utts.iter().map(|u| whitespace_tokens(u.text(doc))).sum();
    let quoted: BTreeSet<usize> = utts.iter().map(|u| u.paragraph_id).collect();
    UtteranceStats {
        count: utts.len(),
        mean_tokens: (!utts.is_empty()).then(|| total_tokens as f64 / utts.len() as f64),
        quoted_paragraph_fraction: (!doc.paragraphs.is_empty())
            .then(|| quoted.len() as f64 / doc.paragraphs.len() as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RawDocument, SegmentConfig, normalize_quotes, segment};

    fn doc_with(text: &str, style: QuoteStyle) -> Document {
        let cfg = SegmentConfig {
            quote_style: style,
            ..SegmentConfig::default()
        };
        segment(&RawDocument::new("t", normalize_quotes(text)), &cfg)
    }

    fn texts(doc: &Document, utts: &[Utterance]) -> Vec<String> {
        utts.iter().map(|u| u.text(doc).to_string()).collect()
    }

    #[test]
    fn replied_with_a_smile_quote_content() {
        let doc = doc_with("\"You certainly do,\" she replied with a smile", QuoteStyle::Double);
        let ex = extract_utterances(&doc);
        assert_eq!(texts(&doc, &ex.utterances), vec!["You certainly do,"]);
    }

    #[test]
    fn continuation_across_paragraphs() {
        let doc = doc_with("\"First part \u{2014}\n\n\"\u{2014} second part.\"", QuoteStyle::Double);
        let ex = extract_utterances(&doc);
        assert_eq!(ex.utterances.len(), 2);
        assert_eq!(ex.utterances[1].continuation_of, Some(ex.utterances[0].id));
        assert_eq!(ex.utterances[0].paragraph_id, 0);
        assert!(ex.events.is_empty());
    }

    #[test]
    fn no_quotes_no_utterances() {
        let doc = doc_with("Plain narration only.", QuoteStyle::Double);
        assert!(extract_utterances(&doc).utterances.is_empty());
    }

    #[test]
    fn dangling_quote_is_skipped_and_logged() {
        let doc = doc_with(
            "\"Closed,\" he said, \"and open\n\nNarration follows.",
            QuoteStyle::Double,
        );
        let ex = extract_utterances(&doc);
        assert_eq!(texts(&doc, &ex.utterances), vec!["Closed,"]);
        assert_eq!(ex.events.len(), 1);
        assert_eq!(ex.events[0].name(), "UnbalancedQuotes");
    }

    #[test]
    fn multiple_quotes_in_one_paragraph() {
        let doc = doc_with(
            "\"It is always the way,\" said Person X. \"If you miss a day, it is sure to be the best.\"",
            QuoteStyle::Double,
        );
        let ex = extract_utterances(&doc);
        assert_eq!(
            texts(&doc, &ex.utterances),
            vec!["It is always the way,", "If you miss a day, it is sure to be the best."]
        );
        assert!(ex.utterances.iter().all(|u| u.continuation_of.is_none()));
    }

    #[test]
    fn nested_single_quotes_stay_verbatim() {
        let doc = doc_with("\"He said 'no' to me.\"", QuoteStyle::Double);
        let ex = extract_utterances(&doc);
        assert_eq!(texts(&doc, &ex.utterances), vec!["He said 'no' to me."]);
    }

    #[test]
    fn single_quote_style_skips_apostrophes() {
        let doc = doc_with(
            "'I don't know,' said Alice, 'it's the girls' fault.'",
            QuoteStyle::Single,
        );
        let ex = extract_utterances(&doc);
        assert_eq!(texts(&doc, &ex.utterances)[0], "I don't know,");
        assert_eq!(ex.utterances.len(), 2);
    }

    #[test]
    fn single_quotes_ignored_by_default() {
        let doc = doc_with("'Hello,' said Alice.", QuoteStyle::Double);
        assert!(extract_utterances(&doc).utterances.is_empty());
    }

    #[test]
    fn stats_on_empty_and_simple_inputs() {
        let doc = doc_with("No dialogue.", QuoteStyle::Double);
        let s = utterance_stats(&doc, &[]);
        assert_eq!(s.count, 0);
        assert_eq!(s.mean_tokens, None);

        let doc = doc_with(
            "\"one two three four\" \"a b c d e f\"\n\nNarration.",
            QuoteStyle::Double,
        );
        let ex = extract_utterances(&doc);
        let s = utterance_stats(&doc, &ex.utterances);
        assert_eq!(s.count, 2);
        assert_eq!(s.mean_tokens, Some(5.0));
        assert_eq!(s.quoted_paragraph_fraction, Some(0.5));
    }

    #[test]
    fn utterance_sentence_ids_are_contiguous() {
        let doc = doc_with("Before. \"Quote one. Still quote.\" After it.", QuoteStyle::Double);
        let ex = extract_utterances(&doc);
        let u = &ex.utterances[0];
        assert!(u.sentence_ids.windows(2).all(|w| w[1] == w[0] + 1));
    }
}
