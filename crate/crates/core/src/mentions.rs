//! Person mentions, alias merging and gender hints.
//!
//! Named mentions come from a pluggable [`Recognizer`]; the bundled
//! [`HeuristicRecognizer`] finds capitalized token runs with honorific
//! awareness. Pronouns always come from the pronoun lexicon.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::events::Event;
use crate::ingest::{Document, Span};
use crate::lexicon::{Case, Gender, Lexicons, Number, Person};
use crate::token::{Token, collapse_whitespace, is_all_caps, is_capitalized, tokenize, word_stem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionKind {
    Named,
    Pronoun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub span: Span,
    /// Mention text with whitespace collapsed.
    pub surface: String,
    pub kind: MentionKind,
    pub person: Person,
    pub gender: Gender,
    pub number: Number,
    /// Grammatical case for pronouns.
    pub case: Option<Case>,
    pub sentence: usize,
    pub in_quote: bool,
}

impl Mention {
    pub fn is_named(&self) -> bool {
        self.kind == MentionKind::Named
    }

    pub fn is_pronoun(&self) -> bool {
        self.kind == MentionKind::Pronoun
    }

    pub fn named(doc: &Document, span: Span, gender: Gender) -> Mention {
        Mention {
            span,
            surface: collapse_whitespace(span.slice(&doc.text)),
            kind: MentionKind::Named,
            person: Person::None,
            gender,
            number: Number::Singular,
            case: None,
            sentence: doc.sentence_at(span.start).unwrap_or(0),
            in_quote: doc.in_quote(span.start),
        }
    }
}

/// Source of named person mentions.
pub trait Recognizer: Send + Sync {
    /// Named person mentions inside the sentence range `window`, in text order.
    fn recognize(&self, doc: &Document, window: Range<usize>, lex: &Lexicons) -> Vec<Mention>;
}

/// Capitalized-token-sequence recognizer.
///
/// A run of capitalized words (optionally led by honorifics such as `Mr.`
/// and joined by particles such as `de`) is a name unless its first word is
/// stoplisted, its last word is a place word, or it is a single
/// sentence-initial word with no other evidence of being a name.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicRecognizer;

const PARTICLES: &[&str] = &["de", "van", "von", "du", "le", "la", "di", "da", "del", "der"];

#[derive(Debug, Clone, Copy)]
struct WordTok {
    token: Token,
    initial: bool,
}

fn sentence_words(doc: &Document, sentence: usize, lex: &Lexicons) -> Vec<(Token, bool)> {
    let s = doc.sentences[sentence];
    let toks = tokenize(&doc.text, s.start, s.end);
    let text = &doc.text;
    let mut out = Vec::with_capacity(toks.len());
    for (i, t) in toks.iter().enumerate() {
        let initial = if i == 0 {
            true
        } else {
            let prev = toks[i - 1];
            let p = prev.text(text);
            match p {
                "!" | "?" | ":" | ";" | "\u{2014}" | "(" | "\u{2026}" => true,
                "." => {
                    let before = i.checked_sub(2).map(|j| toks[j]);
                    let abbreviated = before.is_some_and(|b| {
                        let w = b.text(text);
                        b.span.end == prev.span.start
                            && (lex.abbreviations.contains(&format!("{w}."))
                                || lex.is_honorific(&format!("{w}."))
                                || (w.chars().count() == 1 && is_capitalized(w)))
                    });
                    !abbreviated
                }
                _ => doc.quote_regions.iter().any(|q| q.open.start == prev.span.start),
            }
        };
        out.push((*t, initial));
    }
    out
}

#[derive(Debug, Default)]
struct WordStats {
    mid_caps: HashSet<String>,
    lower: HashSet<String>,
}

const COMMON_SUFFIXES: &[&str] = &["ing", "ly", "ed", "ness", "ful", "less"];

impl WordStats {
    /// A lone capitalized word at a sentence start is a name when it also
    /// shows up capitalized mid-sentence, or when it never occurs in lower
    /// case and does not look like an inflected common word.
    fn plausible_initial_name(&self, word: &str) -> bool {
        if self.mid_caps.contains(word) {
            return true;
        }
        let lower = word.to_lowercase();
        !self.lower.contains(&lower) && !COMMON_SUFFIXES.iter().any(|s| lower.ends_with(s))
    }
}

impl HeuristicRecognizer {
    /// Document-wide word evidence for judging sentence-initial words.
    fn word_stats(doc: &Document, lex: &Lexicons) -> WordStats {
        let mut out = WordStats::default();
        for s in 0..doc.sentences.len() {
            for (t, initial) in sentence_words(doc, s, lex) {
                let w = word_stem(t.text(&doc.text));
                if !t.is_word() {
                    continue;
                }
                if !is_capitalized(w) {
                    out.lower.insert(w.to_string());
                } else if !initial {
                    out.mid_caps.insert(w.to_string());
                }
            }
        }
        out
    }

    fn sentence_names(doc: &Document, sentence: usize, lex: &Lexicons, stats: &WordStats) -> Vec<Mention> {
        let text = &doc.text;
        let words: Vec<WordTok> = sentence_words(doc, sentence, lex)
            .into_iter()
            .map(|(token, initial)| WordTok { token, initial })
            .collect();
        let is_name_word = |w: &str| {
            is_capitalized(w)
                && !is_all_caps(w)
                && !is_contraction(w)
                && !has_lowercase_compound(w)
                && lex.pronoun(word_stem(w)).is_none()
                && w != "I"
        };
        let mut out = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let w = words[i].token.text(text);
            if !(words[i].token.is_word() && is_name_word(w) && w.chars().count() > 1) {
                i += 1;
                continue;
            }
            // Collect the run: (token index of each word, end offset).
            let mut parts: Vec<usize> = Vec::new();
            let mut j = i;
            let mut end = words[i].token.span.end;
            while j < words.len() {
                let tok = words[j].token;
                let tw = tok.text(text);
                if !tok.is_word() {
                    break;
                }
                let initial = tw.chars().count() == 1 && tw.chars().all(char::is_uppercase);
                let qualifies = is_name_word(tw)
                    || (initial && !parts.is_empty())
                    || (PARTICLES.contains(&tw)
                        && !parts.is_empty()
                        && words
                            .get(j + 1)
                            .is_some_and(|n| n.token.is_word() && is_name_word(n.token.text(text))));
                if !qualifies {
                    break;
                }
                // A possessive ends the run.
                let stem = word_stem(tw);
                parts.push(j);
                end = tok.span.start + stem.len();
                if stem.len() != tw.len() {
                    j += 1;
                    break;
                }
                // Honorific abbreviation: absorb the adjacent period.
                if let Some(dot) = words.get(j + 1)
                    && dot.token.text(text) == "."
                    && dot.token.span.start == tok.span.end
                    && lex.is_honorific(&format!("{tw}."))
                {
                    end = dot.token.span.end;
                    j += 2;
                    continue;
                }
                j += 1;
            }
            let next = j.max(i + 1);

            // Drop stoplisted leading words ("Poor Miss Taylor").
            let mut first = 0;
            while first < parts.len() && lex.stoplist.contains(word_stem(words[parts[first]].token.text(text))) {
                first += 1;
            }
            // And a sentence-initial word that is not a name ("Finally Tom").
            if first < parts.len()
                && parts.len() - first > 1
                && words[parts[first]].initial
                && !stats.plausible_initial_name(word_stem(words[parts[first]].token.text(text)))
            {
                first += 1;
            }
            let kept = &parts[first..];
            if kept.is_empty() {
                i = next;
                continue;
            }
            let word_of = |k: usize| words[k].token.text(text);
            let honorific_word = |k: usize| {
                let w = word_of(k);
                lex.is_honorific(w) || lex.is_honorific(&format!("{w}."))
            };
            let last = word_stem(word_of(*kept.last().unwrap()));
            let only_honorifics = kept.iter().all(|&k| honorific_word(k));
            let is_place = lex.place_words.contains(last) && kept.len() > 1;
            let lone_initial =
                kept.len() == 1 && words[kept[0]].initial && !stats.plausible_initial_name(word_stem(word_of(kept[0])));
            if only_honorifics || is_place || lone_initial || PARTICLES.contains(&word_of(*kept.last().unwrap())) {
                i = next;
                continue;
            }
            let start = words[kept[0]].token.span.start;
            let span = Span::new(start, end);
            let lead = word_of(kept[0]);
            let gender = if honorific_word(kept[0]) {
                lex.honorific(lead)
                    .or_else(|| lex.honorific(&format!("{lead}.")))
                    .unwrap_or(Gender::Unknown)
            } else {
                Gender::Unknown
            };
            out.push(Mention::named(doc, span, gender));
            i = next;
        }
        out
    }
}

impl Recognizer for HeuristicRecognizer {
    fn recognize(&self, doc: &Document, window: Range<usize>, lex: &Lexicons) -> Vec<Mention> {
        let stats = Self::word_stats(doc, lex);
        window.flat_map(|s| Self::sentence_names(doc, s, lex, &stats)).collect()
    }
}

/// Restricts named mentions to a given candidate list.
///
/// Heuristic mentions are kept when they are aliases of a candidate, and
/// literal occurrences of each candidate name are added on top, so the
/// recognizer can never invent a speaker outside the list.
#[derive(Debug, Clone)]
pub struct CandidateRecognizer {
    pub candidates: Vec<String>,
}

impl CandidateRecognizer {
    pub fn new(candidates: impl IntoIterator<Item = impl Into<String>>) -> Self {
        CandidateRecognizer {
            candidates: candidates.into_iter().map(Into::into).collect(),
        }
    }
}

impl Recognizer for CandidateRecognizer {
    fn recognize(&self, doc: &Document, window: Range<usize>, lex: &Lexicons) -> Vec<Mention> {
        let parsed: Vec<NameParts> = self.candidates.iter().map(|c| NameParts::parse(c, lex)).collect();
        let mut out: Vec<Mention> = HeuristicRecognizer
            .recognize(doc, window.clone(), lex)
            .into_iter()
            .filter(|m| {
                let p = NameParts::parse(&m.surface, lex);
                parsed.iter().any(|c| p.compatible(c))
            })
            .collect();
        let Some(first) = doc.sentences.get(window.start) else {
            return out;
        };
        let lo = first.start;
        let hi = doc.sentences[window.end.saturating_sub(1).max(window.start)].end;
        let region = &doc.text[lo..hi];
        for cand in &self.candidates {
            if cand.is_empty() {
                continue;
            }
            for (pos, _) in region.match_indices(cand.as_str()) {
                let span = Span::new(lo + pos, lo + pos + cand.len());
                if !at_token_boundary(&doc.text, span) || out.iter().any(|m| m.span.overlaps(span)) {
                    continue;
                }
                let gender = NameParts::parse(cand, lex).honorific_gender(lex);
                out.push(Mention::named(doc, span, gender));
            }
        }
        out.sort_by_key(|m| m.span.start);
        out
    }
}

/// `Don't`, `Can't`: an apostrophe not followed by a possessive `s`.
fn is_contraction(w: &str) -> bool {
    let stem = word_stem(w);
    stem.len() < w.len() && {
        let rest = &w[stem.len()..];
        let tail = rest.trim_start_matches(['\'', '\u{2019}']);
        !(tail.is_empty() || tail == "s")
    }
}

/// `To-morrow`, `Good-bye`: hyphenated words with a lowercase part.
fn has_lowercase_compound(w: &str) -> bool {
    w.split('-')
        .skip(1)
        .any(|part| part.chars().next().is_some_and(char::is_lowercase))
}

pub(crate) fn at_token_boundary(text: &str, span: Span) -> bool {
    let before = text[..span.start].chars().next_back();
    let after = text[span.end..].chars().next();
    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
}

fn pronoun_mentions(doc: &Document, window: Range<usize>, lex: &Lexicons) -> Vec<Mention> {
    let mut out = Vec::new();
    for s in window {
        let sp = doc.sentences[s];
        for t in tokenize(&doc.text, sp.start, sp.end) {
            if !t.is_word() {
                continue;
            }
            let w = t.text(&doc.text);
            let stem = word_stem(w);
            if is_all_caps(stem) && stem != "I" {
                continue;
            }
            if let Some(entry) = lex.pronoun(stem) {
                let span = Span::new(t.span.start, t.span.start + stem.len());
                out.push(Mention {
                    span,
                    surface: stem.to_string(),
                    kind: MentionKind::Pronoun,
                    person: entry.person,
                    gender: entry.gender,
                    number: entry.number,
                    case: Some(entry.case),
                    sentence: s,
                    in_quote: doc.in_quote(span.start),
                });
            }
        }
    }
    out
}

/// Named mentions from `recognizer` plus every pronoun-lexicon match in `window`.
pub fn detect_mentions(
    doc: &Document,
    window: Range<usize>,
    recognizer: &dyn Recognizer,
    lex: &Lexicons,
) -> Vec<Mention> {
    let window = window.start.min(doc.sentences.len())..window.end.min(doc.sentences.len());
    let mut named = recognizer.recognize(doc, window.clone(), lex);
    let pronouns = pronoun_mentions(doc, window, lex);
    named.retain(|m| !pronouns.iter().any(|p| p.span.overlaps(m.span)));
    named.extend(pronouns);
    named.sort_by_key(|m| (m.span.start, m.span.end));
    named.dedup_by_key(|m| m.span);
    named
}

/// A name split into its leading honorific and remaining name tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameParts {
    pub honorific: Option<String>,
    pub tokens: Vec<String>,
    /// From the honorific, else from a known given name.
    pub gender: Gender,
}

impl NameParts {
    pub fn parse(surface: &str, lex: &Lexicons) -> Self {
        let words: Vec<&str> = surface.split_whitespace().collect();
        let mut honorific = None;
        let mut k = 0;
        while k + 1 < words.len() && (lex.is_honorific(words[k]) || lex.is_honorific(&format!("{}.", words[k]))) {
            if honorific.is_none() {
                honorific = Some(words[k].trim_end_matches('.').to_string());
            }
            k += 1;
        }
        let mut parts = NameParts {
            honorific,
            tokens: words[k..].iter().map(|w| w.to_string()).collect(),
            gender: Gender::Unknown,
        };
        parts.gender = match parts.honorific_gender(lex) {
            Gender::Unknown => parts
                .tokens
                .first()
                .and_then(|t| lex.given_name(t))
                .unwrap_or(Gender::Unknown),
            g => g,
        };
        parts
    }

    pub fn honorific_gender(&self, lex: &Lexicons) -> Gender {
        self.honorific
            .as_deref()
            .and_then(|h| lex.honorific(h).or_else(|| lex.honorific(&format!("{h}."))))
            .unwrap_or(Gender::Unknown)
    }

    /// `self` is a token-boundary substring of `other` and neither the
    /// honorifics nor the known genders clash (`Mr. Woodhouse` is not `Emma Woodhouse`).
    pub fn contained_in(&self, other: &NameParts) -> bool {
        if self.tokens.is_empty() || self.tokens.len() > other.tokens.len() {
            return false;
        }
        if self.gender != Gender::Unknown && other.gender != Gender::Unknown && self.gender != other.gender {
            return false;
        }
        if let (Some(a), Some(b)) = (&self.honorific, &other.honorific)
            && a != b
        {
            return false;
        }
        other
            .tokens
            .windows(self.tokens.len())
            .any(|w| w == self.tokens.as_slice())
    }

    pub fn compatible(&self, other: &NameParts) -> bool {
        self.contained_in(other) || other.contained_in(self)
    }
}

/// Alias-aware name match, symmetric.
pub fn names_match(a: &str, b: &str, lex: &Lexicons) -> bool {
    a == b || NameParts::parse(a, lex).compatible(&NameParts::parse(b, lex))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterEntity {
    /// Equal to the canonical surface; stable across context windows.
    pub id: EntityId,
    pub canonical: String,
    pub aliases: BTreeSet<String>,
    /// Indices into the mention list passed to [`merge_aliases`].
    pub mention_ids: Vec<usize>,
    pub gender: Gender,
}

impl CharacterEntity {
    pub fn has_alias(&self, surface: &str) -> bool {
        self.aliases.contains(surface)
    }

    /// Whether any alias is an alias-compatible form of `name`.
    pub fn matches_name(&self, name: &str, lex: &Lexicons) -> bool {
        let target = NameParts::parse(name, lex);
        self.aliases
            .iter()
            .any(|a| a == name || NameParts::parse(a, lex).compatible(&target))
    }
}

#[derive(Debug, Clone, Default)]
pub struct MergeOutcome {
    pub entities: Vec<CharacterEntity>,
    pub events: Vec<Event>,
}

fn canonical_order(a: &str, b: &str) -> std::cmp::Ordering {
    let ka = (a.chars().count(), a.split_whitespace().count());
    let kb = (b.chars().count(), b.split_whitespace().count());
    kb.cmp(&ka).then_with(|| a.cmp(b))
}

/// Groups named mentions into characters by token-boundary substring.
///
/// Honorifics are ignored for the substring test but two different
/// honorifics never merge (`Mr. Bennet` vs `Mrs. Bennet`). A short name
/// contained in two longer names that do not themselves merge stays on its
/// own and is reported as `AmbiguousMerge`.
pub fn merge_aliases(mentions: &[Mention], lex: &Lexicons) -> MergeOutcome {
    let mut surfaces: Vec<&str> = mentions
        .iter()
        .filter(|m| m.is_named())
        .map(|m| m.surface.as_str())
        .collect();
    surfaces.sort_unstable();
    surfaces.dedup();
    let parts: Vec<NameParts> = surfaces.iter().map(|s| NameParts::parse(s, lex)).collect();
    let n = surfaces.len();
    let contains = |a: usize, b: usize| a != b && parts[a].contained_in(&parts[b]);
    let related = |a: usize, b: usize| contains(a, b) || contains(b, a);

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }

    let mut events = Vec::new();
    for a in 0..n {
        let containers: Vec<usize> = (0..n).filter(|&b| contains(a, b) && !contains(b, a)).collect();
        let ambiguous = containers
            .iter()
            .enumerate()
            .any(|(i, &x)| containers[i + 1..].iter().any(|&y| !related(x, y)));
        if ambiguous {
            let event = Event::AmbiguousMerge {
                surface: surfaces[a].to_string(),
                containers: containers.iter().map(|&c| surfaces[c].to_string()).collect(),
            };
            event.emit();
            events.push(event);
            continue;
        }
        for b in (0..n).filter(|&b| contains(a, b)) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for s in 0..n {
        let r = find(&mut parent, s);
        groups.entry(r).or_default().push(s);
    }
    let mut entities: Vec<CharacterEntity> = groups
        .into_values()
        .map(|members| {
            let aliases: BTreeSet<String> = members.iter().map(|&s| surfaces[s].to_string()).collect();
            let canonical = aliases
                .iter()
                .min_by(|a, b| canonical_order(a, b))
                .cloned()
                .expect("groups are non-empty");
            let mention_ids: Vec<usize> = mentions
                .iter()
                .enumerate()
                .filter(|(_, m)| m.is_named() && aliases.contains(&m.surface))
                .map(|(i, _)| i)
                .collect();
            let gender = members
                .iter()
                .map(|&s| parts[s].honorific_gender(lex))
                .find(|g| *g != Gender::Unknown)
                .unwrap_or(Gender::Unknown);
            CharacterEntity {
                id: EntityId(canonical.clone()),
                canonical,
                aliases,
                mention_ids,
                gender,
            }
        })
        .collect();
    entities.sort_by_key(|e| {
        e.mention_ids
            .iter()
            .map(|&i| mentions[i].span.start)
            .min()
            .unwrap_or(usize::MAX)
    });
    MergeOutcome { entities, events }
}

/// Pronoun evidence for gender, keyed by named surface.
///
/// A narration subject pronoun (`he`/`she`) counts toward a name when that
/// name, up to its aliases, is the only narration name before it within the
/// pronoun's three-sentence window.
#[derive(Debug, Clone, Default)]
pub struct GenderEvidence {
    counts: HashMap<String, (u32, u32)>,
}

impl GenderEvidence {
    /// `mentions` must cover the whole document in text order.
    pub fn collect(mentions: &[Mention], lex: &Lexicons) -> Self {
        let mut counts: HashMap<String, (u32, u32)> = HashMap::new();
        for (i, p) in mentions.iter().enumerate() {
            let gendered_subject = p.is_pronoun()
                && !p.in_quote
                && p.person == Person::Third
                && p.number == Number::Singular
                && p.case == Some(Case::Subject)
                && p.gender != Gender::Unknown;
            if !gendered_subject {
                continue;
            }
            let lo = p.sentence.saturating_sub(2);
            let names: BTreeSet<&str> = mentions[..i]
                .iter()
                .rev()
                .take_while(|m| m.sentence >= lo)
                .filter(|m| m.is_named() && !m.in_quote)
                .map(|m| m.surface.as_str())
                .collect();
            if names.is_empty() {
                continue;
            }
            let parsed: Vec<NameParts> = names.iter().map(|n| NameParts::parse(n, lex)).collect();
            let one_character = parsed
                .iter()
                .enumerate()
                .all(|(a, x)| parsed[a + 1..].iter().all(|y| x.compatible(y)));
            if !one_character {
                continue;
            }
            for n in names {
                let c = counts.entry(n.to_string()).or_default();
                match p.gender {
                    Gender::Male => c.0 += 1,
                    Gender::Female => c.1 += 1,
                    Gender::Unknown => {}
                }
            }
        }
        GenderEvidence { counts }
    }

    pub fn counts(&self, surface: &str) -> (u32, u32) {
        self.counts.get(surface).copied().unwrap_or_default()
    }
}

/// Honorific gender if any alias carries one, else the pronoun majority, else unknown.
pub fn infer_gender(entity: &CharacterEntity, evidence: &GenderEvidence, lex: &Lexicons) -> Gender {
    if let Some(g) = entity
        .aliases
        .iter()
        .map(|a| NameParts::parse(a, lex).honorific_gender(lex))
        .find(|g| *g != Gender::Unknown)
    {
        return g;
    }
    if let Some(g) = entity
        .aliases
        .iter()
        .filter_map(|a| NameParts::parse(a, lex).tokens.first().and_then(|t| lex.given_name(t)))
        .find(|g| *g != Gender::Unknown)
    {
        return g;
    }
    let (male, female) = entity
        .aliases
        .iter()
        .map(|a| evidence.counts(a))
        .fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    match male.cmp(&female) {
        std::cmp::Ordering::Greater => Gender::Male,
        std::cmp::Ordering::Less => Gender::Female,
        std::cmp::Ordering::Equal => Gender::Unknown,
    }
}
