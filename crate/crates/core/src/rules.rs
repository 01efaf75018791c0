//! Speaker votes from three independent heuristics.
//!
//! * direct: a speech verb adjacent to the quote with a named or pronoun subject
//! * coref: pronouns inside the quote resolved against nearby mentions
//! * alternation: two-party conversations alternate turns

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ingest::{Document, Span};
use crate::lexicon::{Case, Gender, Lexicons, Number, Person};
use crate::mentions::{CharacterEntity, EntityId, Mention};
use crate::quotes::{QuoteRegion, UttId, Utterance};
use crate::token::{Token, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    For,
    Against,
}

impl Polarity {
    pub fn weight(self) -> i32 {
        match self {
            Polarity::For => 1,
            Polarity::Against => -1,
        }
    }
}

/// Ordered by tie-break priority, strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Direct,
    Coref,
    Alternation,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Direct => "direct",
            Rule::Coref => "coref",
            Rule::Alternation => "alternation",
        })
    }
}

/// What produced a vote, finer grained than [`Rule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteSource {
    /// A named mention as the subject of a speech verb.
    NamedTag,
    /// A pronoun speech-tag subject resolved through coreference.
    ResolvedTag,
    /// A first-person pronoun inside the quote.
    FirstPerson,
    /// A second- or third-person pronoun inside the quote.
    AddresseeOrThirdPerson,
    Alternation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vote {
    pub utt: UttId,
    pub entity: EntityId,
    pub polarity: Polarity,
    pub rule: Rule,
    pub source: VoteSource,
    pub note: String,
}

/// Keeps one vote per (utterance, entity, rule, polarity), the first in sorted order.
pub fn dedup_votes(votes: &mut Vec<Vote>) {
    votes.sort_by(|a, b| {
        (a.utt, &a.entity, a.rule, a.polarity, a.source, &a.note)
            .cmp(&(b.utt, &b.entity, b.rule, b.polarity, b.source, &b.note))
    });
    votes.dedup_by(|b, a| a.utt == b.utt && a.entity == b.entity && a.rule == b.rule && a.polarity == b.polarity);
}

/// Everything the rules read about one document.
#[derive(Debug, Clone)]
pub struct RuleContext<'a> {
    pub doc: &'a Document,
    pub lex: &'a Lexicons,
    pub utterances: &'a [Utterance],
    /// Sorted by start offset.
    pub mentions: &'a [Mention],
    pub entities: &'a [CharacterEntity],
    entity_of: Vec<Option<usize>>,
}

impl<'a> RuleContext<'a> {
    pub fn new(
        doc: &'a Document,
        lex: &'a Lexicons,
        utterances: &'a [Utterance],
        mentions: &'a [Mention],
        entities: &'a [CharacterEntity],
    ) -> Self {
        let mut entity_of = vec![None; mentions.len()];
        for (e, ent) in entities.iter().enumerate() {
            for &m in &ent.mention_ids {
                if let Some(slot) = entity_of.get_mut(m) {
                    *slot = Some(e);
                }
            }
        }
        RuleContext {
            doc,
            lex,
            utterances,
            mentions,
            entities,
            entity_of,
        }
    }

    pub fn entity_of(&self, mention: usize) -> Option<&'a CharacterEntity> {
        self.entity_of
            .get(mention)
            .copied()
            .flatten()
            .map(|e| &self.entities[e])
    }

    pub fn entity(&self, id: &EntityId) -> Option<&'a CharacterEntity> {
        self.entities.iter().find(|e| &e.id == id)
    }

    pub fn mention_starting_at(&self, offset: usize) -> Option<usize> {
        self.mentions.binary_search_by_key(&offset, |m| m.span.start).ok()
    }

    /// Mention indices whose start lies in `span`.
    pub fn mentions_in(&self, span: Span) -> Range<usize> {
        let lo = self.mentions.partition_point(|m| m.span.start < span.start);
        let hi = self.mentions.partition_point(|m| m.span.start < span.end);
        lo..hi
    }

    pub fn utterance(&self, id: UttId) -> Option<&'a Utterance> {
        self.utterances.get(id.0).filter(|u| u.id == id)
    }

    pub fn utterance_at(&self, offset: usize) -> Option<&'a Utterance> {
        let i = self.utterances.partition_point(|u| u.span.end <= offset);
        self.utterances.get(i).filter(|u| u.span.contains_offset(offset))
    }

    /// Character distance from the utterance to the entity's nearest mention.
    pub fn proximity(&self, utt: &Utterance, entity: &EntityId) -> Option<usize> {
        let ent = self.entity(entity)?;
        ent.mention_ids
            .iter()
            .filter_map(|&m| self.mentions.get(m))
            .map(|m| {
                if m.span.end <= utt.span.start {
                    utt.span.start - m.span.end
                } else {
                    m.span.start.saturating_sub(utt.span.end)
                }
            })
            .min()
    }

    fn region(&self, utt: &Utterance) -> Option<&'a QuoteRegion> {
        self.doc.quote_regions.iter().find(|r| r.interior == utt.span)
    }

    fn is_subject_pronoun(&self, m: &Mention) -> bool {
        m.is_pronoun() && m.case == Some(Case::Subject) && m.number == Number::Singular
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagPattern {
    /// `"...," said Elizabeth`
    VerbName,
    /// `"...," Elizabeth said`
    NameVerb,
    /// `Elizabeth said, "..."`
    NameVerbBefore,
    /// `Elizabeth replied that "..."`
    NameVerbThat,
}

/// The speech-tag subject found for an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechTag {
    pub utt: UttId,
    /// Index into the document mention list.
    pub mention: usize,
    pub pattern: TagPattern,
    /// Borrowed from an earlier quote in the same paragraph.
    pub inherited: bool,
}

/// A speech tag whose subject is a pronoun, left for coreference to resolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectPronoun {
    pub utt: UttId,
    pub mention: usize,
    pub person: Person,
    pub gender: Gender,
}

#[derive(Debug, Clone, Default)]
pub struct DirectOutcome {
    pub votes: Vec<Vote>,
    pub tag: Option<SpeechTag>,
    pub pronoun: Option<DirectPronoun>,
}

fn is_adverb(word: &str) -> bool {
    word.len() > 3 && word.ends_with("ly") && word.chars().all(char::is_lowercase)
}

fn words<'t>(text: &'t str, toks: &[Token]) -> Vec<&'t str> {
    toks.iter().map(|t| t.text(text)).collect()
}

/// Index of the first token at or after byte offset `end`.
fn token_after(toks: &[Token], end: usize) -> usize {
    toks.partition_point(|t| t.span.start < end)
}

impl RuleContext<'_> {
    fn tag_mention(&self, offset: usize) -> Option<usize> {
        let m = self.mention_starting_at(offset)?;
        let mention = &self.mentions[m];
        // A possessive modifies the real subject (`said Scrooge's nephew`).
        let possessive = self.doc.text[mention.span.end..].starts_with(['\'', '\u{2019}']);
        if mention.in_quote || possessive {
            return None;
        }
        (mention.is_named() || self.is_subject_pronoun(mention)).then_some(m)
    }

    /// Speech verb (optionally after an -ly adverb) starting at token `i`; returns the index past it.
    fn verb_at(&self, ws: &[&str], i: usize) -> Option<usize> {
        let i = if ws.get(i).is_some_and(|w| is_adverb(w)) {
            i + 1
        } else {
            i
        };
        self.lex.speech_verb_at(ws.get(i..)?).map(|k| i + k)
    }

    fn is_terminator(&self, toks: &[Token], ws: &[&str], i: usize) -> bool {
        match ws[i] {
            "!" | "?" => true,
            "." => {
                !(i > 0
                    && toks[i - 1].span.end == toks[i].span.start
                    && (self.lex.abbreviations.contains(&format!("{}.", ws[i - 1]))
                        || self.lex.is_honorific(&format!("{}.", ws[i - 1]))))
            }
            _ => false,
        }
    }

    fn after_tag(&self, narration: Span) -> Option<(usize, TagPattern)> {
        let text = &self.doc.text;
        let toks = tokenize(text, narration.start, narration.end);
        let ws = words(text, &toks);
        let start = usize::from(ws.first() == Some(&","));
        // Verb then subject: `said Elizabeth`, `said she`.
        if let Some(end) = self.lex.speech_verb_at(ws.get(start..)?)
            && let Some(tok) = toks.get(start + end)
            && let Some(m) = self.tag_mention(tok.span.start)
        {
            return Some((m, TagPattern::VerbName));
        }
        // Subject then verb: `Elizabeth said`, `she quietly replied`.
        let m = self.tag_mention(toks.get(start)?.span.start)?;
        let next = token_after(&toks, self.mentions[m].span.end);
        self.verb_at(&ws, next).map(|_| (m, TagPattern::NameVerb))
    }

    fn before_tag(&self, narration: Span) -> Option<(usize, TagPattern)> {
        let text = &self.doc.text;
        let toks = tokenize(text, narration.start, narration.end);
        let ws = words(text, &toks);
        let from = (0..ws.len())
            .rev()
            .find(|&i| self.is_terminator(&toks, &ws, i))
            .map_or(0, |i| i + 1);
        let frag = &toks[from..];
        let last = frag.last()?;
        let ends_open = matches!(last.text(text), "," | ":" | "\u{2014}");
        let mut best = None;
        for m in self.mentions_in(Span::new(frag[0].span.start, last.span.end)) {
            if self.tag_mention(self.mentions[m].span.start) != Some(m) {
                continue;
            }
            let next = token_after(&toks, self.mentions[m].span.end);
            let Some(after_verb) = self.verb_at(&ws, next) else {
                continue;
            };
            if ws.get(after_verb).is_some_and(|w| w.eq_ignore_ascii_case("that")) {
                best = Some((m, TagPattern::NameVerbThat));
            } else if ends_open && ws.len() - after_verb <= 6 {
                best = Some((m, TagPattern::NameVerbBefore));
            }
        }
        best
    }

    /// Narration between the quote and its neighbours within the paragraph.
    fn adjacent_narration(&self, utt: &Utterance) -> Option<(Span, Span, bool)> {
        let region = self.region(utt)?;
        let para = self.doc.paragraphs[region.paragraph];
        let siblings: Vec<&QuoteRegion> = self
            .doc
            .quote_regions
            .iter()
            .filter(|r| r.paragraph == region.paragraph)
            .collect();
        let pos = siblings.iter().position(|r| r.open == region.open)?;
        let before_start = if pos == 0 {
            para.start
        } else {
            siblings[pos - 1].close.map_or(para.start, |c| c.end)
        };
        let before = Span::new(before_start, region.open.start);
        let (after, followed) = match region.close {
            Some(close) => match siblings.get(pos + 1) {
                Some(next) => (Span::new(close.end, next.open.start), true),
                None => (Span::new(close.end, para.end), false),
            },
            None => (Span::new(para.end, para.end), false),
        };
        Some((before, after, followed))
    }

    fn own_tag(&self, utt: &Utterance) -> Option<(usize, TagPattern)> {
        let (before, after, followed) = self.adjacent_narration(utt)?;
        let ends_sentence = utt.text(self.doc).trim_end().ends_with(['.', '!', '?']);
        let after_introduces_next = followed && ends_sentence && {
            let toks = tokenize(&self.doc.text, after.start, after.end);
            toks.last()
                .is_some_and(|t| matches!(t.text(&self.doc.text), "," | ":" | "\u{2014}"))
        };
        // Inverted order (`said Lydia`) only follows a quote, so it tags this
        // one even when the narration also leads into the next quote.
        if let Some(hit) = self.after_tag(after)
            && (!after_introduces_next || hit.1 == TagPattern::VerbName)
        {
            return Some(hit);
        }
        self.before_tag(before).or_else(|| self.colon_lead_in(utt, before))
    }

    /// `Then Tom said:` as a narration paragraph of its own, right before a
    /// paragraph that opens with the quote.
    fn colon_lead_in(&self, utt: &Utterance, before: Span) -> Option<(usize, TagPattern)> {
        if utt.continuation_of.is_some() || !before.slice(&self.doc.text).trim().is_empty() {
            return None;
        }
        let prev = utt.paragraph_id.checked_sub(1)?;
        if self.doc.quote_regions.iter().any(|r| r.paragraph == prev) {
            return None;
        }
        let para = self.doc.paragraphs[prev];
        if !para.slice(&self.doc.text).trim_end().ends_with(':') {
            return None;
        }
        self.before_tag(para)
    }
}

fn direct_outcome(ctx: &RuleContext<'_>, tag: Option<SpeechTag>) -> DirectOutcome {
    let Some(tag) = tag else {
        return DirectOutcome::default();
    };
    let m = &ctx.mentions[tag.mention];
    let mut out = DirectOutcome {
        tag: Some(tag),
        ..DirectOutcome::default()
    };
    if m.is_pronoun() {
        out.pronoun = Some(DirectPronoun {
            utt: tag.utt,
            mention: tag.mention,
            person: m.person,
            gender: m.gender,
        });
    } else if let Some(ent) = ctx.entity_of(tag.mention) {
        out.votes.push(Vote {
            utt: tag.utt,
            entity: ent.id.clone(),
            polarity: Polarity::For,
            rule: Rule::Direct,
            source: VoteSource::NamedTag,
            note: format!(
                "{:?} tag \"{}\"{}",
                tag.pattern,
                m.surface,
                if tag.inherited { " (inherited)" } else { "" }
            ),
        });
    }
    out
}

/// Speech-tag patterns in the narration adjacent to one quote.
pub fn direct_speaker_rule(utt: &Utterance, ctx: &RuleContext<'_>) -> DirectOutcome {
    let tag = ctx.own_tag(utt).map(|(mention, pattern)| SpeechTag {
        utt: utt.id,
        mention,
        pattern,
        inherited: false,
    });
    direct_outcome(ctx, tag)
}

/// [`direct_speaker_rule`] over all utterances, with tag inheritance.
///
/// A quote without its own tag borrows the tag of the previous quote in the
/// same paragraph (`"Yes," said he, "I will."`) unless the narration
/// between the two names someone else.
pub fn direct_speaker_votes(ctx: &RuleContext<'_>) -> Vec<DirectOutcome> {
    let mut out: Vec<DirectOutcome> = Vec::with_capacity(ctx.utterances.len());
    for (i, utt) in ctx.utterances.iter().enumerate() {
        let mut outcome = direct_speaker_rule(utt, ctx);
        if outcome.tag.is_none()
            && i > 0
            && let prev = &ctx.utterances[i - 1]
            && prev.paragraph_id == utt.paragraph_id
            && let Some(prev_tag) = out[i - 1].tag
        {
            let between = Span::new(prev.span.end, utt.span.start);
            let tag_entity = ctx.entity_of(prev_tag.mention).map(|e| &e.id);
            let interrupted = ctx.mentions_in(between).any(|m| {
                m != prev_tag.mention
                    && !ctx.mentions[m].in_quote
                    && if ctx.mentions[m].is_named() {
                        ctx.entity_of(m).map(|e| &e.id) != tag_entity
                    } else {
                        ctx.is_subject_pronoun(&ctx.mentions[m])
                    }
            });
            if !interrupted {
                outcome = direct_outcome(
                    ctx,
                    Some(SpeechTag {
                        utt: utt.id,
                        inherited: true,
                        ..prev_tag
                    }),
                );
            }
        }
        out.push(outcome);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefCluster {
    pub cluster_id: usize,
    /// Indices into the document mention list, ascending.
    pub mention_ids: Vec<usize>,
}

/// Vocative: a named mention at the start of a quote or after a comma,
/// followed by punctuation or the quote end (`"Lizzy, you are wrong."`).
fn is_vocative(ctx: &RuleContext<'_>, m: usize, quote: Span) -> bool {
    let mention = &ctx.mentions[m];
    if !mention.is_named() {
        return false;
    }
    let text = &ctx.doc.text;
    let before = text[quote.start..mention.span.start].trim_end();
    let after = text[mention.span.end..quote.end].trim_start();
    let opens = before.is_empty() || before.ends_with(',') || before.to_lowercase().ends_with("dear");
    let closes = after.is_empty() || after.starts_with([',', '!', '?', '.']);
    opens && closes
}

/// Clusters the mentions of one three-sentence window.
///
/// Links: each singular third-person pronoun to its nearest preceding
/// antecedent of the same known gender (a named mention or an already
/// resolved pronoun), falling back to the nearest named mention of unknown
/// gender; first-person pronouns in a quote to the quote's speech-tag
/// subject; second-person pronouns in a quote to a vocative name in the same
/// quote; identical named surfaces to each other. Narration pronouns only
/// take narration antecedents, quoted ones take narration or same-quote
/// antecedents.
pub fn resolve_local_coref(
    ctx: &RuleContext<'_>,
    window: Range<usize>,
    tags: &HashMap<UttId, usize>,
) -> Vec<CorefCluster> {
    let ids: Vec<usize> = (0..ctx.mentions.len())
        .filter(|&m| window.contains(&ctx.mentions[m].sentence))
        .collect();
    let mut link: HashMap<usize, usize> = HashMap::new();
    // Named root each resolved mention leads to.
    let mut root: HashMap<usize, usize> = HashMap::new();
    let gender_of = |m: usize| ctx.entity_of(m).map_or(ctx.mentions[m].gender, |e| e.gender);

    for (k, &p) in ids.iter().enumerate() {
        let pm = &ctx.mentions[p];
        if pm.is_named() {
            root.insert(p, p);
            continue;
        }
        if pm.number == Number::Plural {
            continue;
        }
        let quote = pm
            .in_quote
            .then(|| ctx.doc.quote_region_at(pm.span.start).map(|r| r.interior))
            .flatten();
        let target = match pm.person {
            Person::Third => {
                let visible = |q: usize| {
                    let qm = &ctx.mentions[q];
                    !qm.in_quote || quote.is_some_and(|s| s.contains_offset(qm.span.start))
                };
                let mut tier1 = None;
                let mut tier2 = None;
                for &q in ids[..k].iter().rev() {
                    if !visible(q) {
                        continue;
                    }
                    let qm = &ctx.mentions[q];
                    if qm.is_named() {
                        let g = gender_of(q);
                        if pm.gender != Gender::Unknown && g == pm.gender {
                            tier1.get_or_insert(q);
                        } else if g == Gender::Unknown {
                            tier2.get_or_insert(q);
                        }
                    } else if qm.person == Person::Third
                        && qm.number == Number::Singular
                        && qm.gender == pm.gender
                        && pm.gender != Gender::Unknown
                        && root.contains_key(&q)
                    {
                        tier1.get_or_insert(q);
                    }
                    if tier1.is_some() {
                        break;
                    }
                }
                // Inside a quote only a confident antecedent counts.
                tier1.or(if quote.is_none() { tier2 } else { None })
            }
            Person::First => quote
                .and_then(|_| ctx.utterance_at(pm.span.start))
                .and_then(|u| tags.get(&u.id).copied())
                .filter(|t| ids.contains(t)),
            Person::Second => quote.and_then(|q| {
                ids.iter()
                    .copied()
                    .find(|&v| q.contains_offset(ctx.mentions[v].span.start) && is_vocative(ctx, v, q))
            }),
            Person::None => None,
        };
        if let Some(t) = target {
            link.insert(p, t);
            if let Some(&r) = root.get(&t) {
                root.insert(p, r);
            }
        }
    }

    // Union-find over links and identical surfaces.
    let mut parent: HashMap<usize, usize> = ids.iter().map(|&m| (m, m)).collect();
    fn find(parent: &mut HashMap<usize, usize>, x: usize) -> usize {
        let mut r = x;
        while parent[&r] != r {
            r = parent[&r];
        }
        r
    }
    let union = |parent: &mut HashMap<usize, usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent.insert(ra.max(rb), ra.min(rb));
        }
    };
    for (&a, &b) in &link {
        union(&mut parent, a, b);
    }
    let mut by_surface: BTreeMap<&str, usize> = BTreeMap::new();
    for &m in &ids {
        if ctx.mentions[m].is_named() {
            match by_surface.get(ctx.mentions[m].surface.as_str()) {
                Some(&first) => union(&mut parent, first, m),
                None => {
                    by_surface.insert(&ctx.mentions[m].surface, m);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &m in &ids {
        let r = find(&mut parent, m);
        groups.entry(r).or_default().push(m);
    }
    groups
        .into_values()
        .enumerate()
        .map(|(cluster_id, mention_ids)| CorefCluster {
            cluster_id,
            mention_ids,
        })
        .collect()
}

/// Pronoun resolutions for a whole document, each pronoun resolved in the
/// three-sentence window that ends at its own sentence.
#[derive(Debug, Clone, Default)]
pub struct CorefIndex {
    resolved: HashMap<usize, usize>,
}

impl CorefIndex {
    pub fn build(ctx: &RuleContext<'_>, tags: &HashMap<UttId, usize>) -> Self {
        let mut resolved = HashMap::new();
        for s in 0..ctx.doc.sentences.len() {
            let window = s.saturating_sub(2)..s + 1;
            for cluster in resolve_local_coref(ctx, window, tags) {
                let named = cluster
                    .mention_ids
                    .iter()
                    .copied()
                    .find(|&m| ctx.mentions[m].is_named());
                let Some(named) = named else { continue };
                for &m in &cluster.mention_ids {
                    if ctx.mentions[m].is_pronoun() && ctx.mentions[m].sentence == s {
                        resolved.insert(m, named);
                    }
                }
            }
        }
        CorefIndex { resolved }
    }

    /// Named mention a pronoun corefers with.
    pub fn antecedent(&self, pronoun: usize) -> Option<usize> {
        self.resolved.get(&pronoun).copied()
    }
}

/// Votes from pronouns inside the quote plus the resolved pronoun speech tag.
pub fn pronoun_coref_rule(
    utt: &Utterance,
    coref: &CorefIndex,
    direct_pronoun: Option<&DirectPronoun>,
    ctx: &RuleContext<'_>,
) -> Vec<Vote> {
    let mut votes = Vec::new();
    let mut excluded: BTreeSet<EntityId> = BTreeSet::new();
    let entity = |m: usize| coref.antecedent(m).and_then(|n| ctx.entity_of(n));
    for m in ctx.mentions_in(utt.span) {
        let pm = &ctx.mentions[m];
        if !pm.is_pronoun() || pm.number == Number::Plural {
            continue;
        }
        let Some(ent) = entity(m) else { continue };
        let (polarity, source) = match pm.person {
            Person::First => (Polarity::For, VoteSource::FirstPerson),
            Person::Second | Person::Third => (Polarity::Against, VoteSource::AddresseeOrThirdPerson),
            Person::None => continue,
        };
        if pm.person == Person::Second {
            excluded.insert(ent.id.clone());
        }
        votes.push(Vote {
            utt: utt.id,
            entity: ent.id.clone(),
            polarity,
            rule: Rule::Coref,
            source,
            note: format!("\"{}\" in quote corefers with {}", pm.surface, ent.canonical),
        });
    }
    if let Some(dp) = direct_pronoun
        && let Some(ent) = entity(dp.mention)
    {
        votes.push(Vote {
            utt: utt.id,
            entity: ent.id.clone(),
            polarity: Polarity::For,
            rule: Rule::Coref,
            source: VoteSource::ResolvedTag,
            note: format!(
                "tag \"{}\" resolves to {}",
                ctx.mentions[dp.mention].surface, ent.canonical
            ),
        });
    }
    votes.retain(|v| !(v.polarity == Polarity::For && excluded.contains(&v.entity)));
    dedup_votes(&mut votes);
    votes
}

/// One conversational turn: a quote-bearing paragraph plus any continuation paragraphs.
#[derive(Debug, Clone)]
struct Turn {
    first_paragraph: usize,
    last_paragraph: usize,
    utts: Vec<UttId>,
}

fn turns(utts: &[Utterance]) -> Vec<Turn> {
    let mut out: Vec<Turn> = Vec::new();
    for u in utts {
        match out.last_mut() {
            Some(t) if t.last_paragraph == u.paragraph_id => t.utts.push(u.id),
            Some(t) if u.continuation_of.is_some() && t.last_paragraph + 1 == u.paragraph_id => {
                t.last_paragraph = u.paragraph_id;
                t.utts.push(u.id);
            }
            _ => out.push(Turn {
                first_paragraph: u.paragraph_id,
                last_paragraph: u.paragraph_id,
                utts: vec![u.id],
            }),
        }
    }
    out
}

/// Conversation alternation over runs of consecutive quote-bearing paragraphs.
///
/// In a run with exactly two attributed speakers, an unattributed turn two
/// turns away from an attributed one gets a `for` vote for that speaker and
/// an `against` vote for the other party. A run with one attributed speaker
/// also qualifies when the narration paragraph right before it names
/// exactly one other character and no unattributed turn has its own speech
/// tag; that character is taken as the second party.
pub fn alternation_rule(
    utts: &[Utterance],
    prior: &HashMap<UttId, EntityId>,
    tagged: &BTreeSet<UttId>,
    ctx: &RuleContext<'_>,
) -> Vec<Vote> {
    let all = turns(utts);
    let mut runs: Vec<&[Turn]> = Vec::new();
    let mut start = 0;
    for i in 1..=all.len() {
        if i == all.len() || all[i].first_paragraph != all[i - 1].last_paragraph + 1 {
            runs.push(&all[start..i]);
            start = i;
        }
    }
    let speaker_of = |t: &Turn| t.utts.iter().find_map(|u| prior.get(u)).cloned();
    let mut votes = Vec::new();
    for run in runs {
        let speakers: Vec<Option<EntityId>> = run.iter().map(speaker_of).collect();
        let distinct: BTreeSet<&EntityId> = speakers.iter().flatten().collect();
        let parties: (EntityId, EntityId) = match distinct.len() {
            2 => {
                let mut it = distinct.into_iter();
                (it.next().unwrap().clone(), it.next().unwrap().clone())
            }
            1 => {
                let x = distinct.into_iter().next().unwrap().clone();
                let untagged = run
                    .iter()
                    .zip(&speakers)
                    .filter(|(_, s)| s.is_none())
                    .all(|(t, _)| t.utts.iter().all(|u| !tagged.contains(u)));
                match (untagged, lead_in_party(run[0].first_paragraph, &x, ctx)) {
                    (true, Some(y)) => (x, y),
                    _ => continue,
                }
            }
            _ => continue,
        };
        let other = |e: &EntityId| if *e == parties.0 { &parties.1 } else { &parties.0 };
        for (i, turn) in run.iter().enumerate() {
            if speakers[i].is_some() {
                continue;
            }
            for j in [i.checked_sub(2), Some(i + 2)].into_iter().flatten() {
                let Some(Some(x)) = speakers.get(j) else { continue };
                for &u in &turn.utts {
                    let note = format!("alternation from turn {} paragraph {}", j, run[j].first_paragraph);
                    votes.push(Vote {
                        utt: u,
                        entity: x.clone(),
                        polarity: Polarity::For,
                        rule: Rule::Alternation,
                        source: VoteSource::Alternation,
                        note: note.clone(),
                    });
                    votes.push(Vote {
                        utt: u,
                        entity: other(x).clone(),
                        polarity: Polarity::Against,
                        rule: Rule::Alternation,
                        source: VoteSource::Alternation,
                        note,
                    });
                }
            }
        }
    }
    dedup_votes(&mut votes);
    votes
}

/// The single other character named in the narration paragraph before a run.
fn lead_in_party(first_paragraph: usize, x: &EntityId, ctx: &RuleContext<'_>) -> Option<EntityId> {
    let para = ctx.doc.paragraphs.get(first_paragraph.checked_sub(1)?)?;
    let named: BTreeSet<&EntityId> = ctx
        .mentions_in(*para)
        .filter(|&m| ctx.mentions[m].is_named() && !ctx.mentions[m].in_quote)
        .filter_map(|m| ctx.entity_of(m).map(|e| &e.id))
        .filter(|e| *e != x)
        .collect();
    (named.len() == 1).then(|| named.into_iter().next().unwrap().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RawDocument, SegmentConfig, normalize_quotes, segment};
    use crate::mentions::{GenderEvidence, HeuristicRecognizer, detect_mentions, infer_gender, merge_aliases};
    use crate::quotes::extract_utterances;

    struct Fixture {
        doc: Document,
        lex: Lexicons,
        utts: Vec<Utterance>,
        mentions: Vec<Mention>,
        entities: Vec<CharacterEntity>,
    }

    impl Fixture {
        fn new(text: &str) -> Self {
            let lex = Lexicons::default();
            let doc = segment(
                &RawDocument::new("t", normalize_quotes(text)),
                &SegmentConfig::default(),
            );
            let utts = extract_utterances(&doc).utterances;
            let mentions = detect_mentions(&doc, 0..doc.sentences.len(), &HeuristicRecognizer, &lex);
            let evidence = GenderEvidence::collect(&mentions, &lex);
            let mut entities = merge_aliases(&mentions, &lex).entities;
            for e in &mut entities {
                e.gender = infer_gender(e, &evidence, &lex);
            }
            Fixture {
                doc,
                lex,
                utts,
                mentions,
                entities,
            }
        }

        fn ctx(&self) -> RuleContext<'_> {
            RuleContext::new(&self.doc, &self.lex, &self.utts, &self.mentions, &self.entities)
        }

        fn surface(&self, m: usize) -> &str {
            &self.mentions[m].surface
        }
    }

    fn direct(text: &str) -> Vec<(Option<String>, Option<String>)> {
        let f = Fixture::new(text);
        let ctx = f.ctx();
        direct_speaker_votes(&ctx)
            .into_iter()
            .map(|o| {
                (
                    o.votes.first().map(|v| v.entity.0.clone()),
                    o.pronoun.map(|p| f.surface(p.mention).to_string()),
                )
            })
            .collect()
    }

    #[test]
    fn pronoun_tag_becomes_marker() {
        let got = direct("\"You certainly do,\" she replied with a smile.");
        assert_eq!(got, vec![(None, Some("she".to_string()))]);
    }

    #[test]
    fn verb_name_tag() {
        let got = direct("\"It is always the way,\" said Person X. \"If you miss a day, it is sure to be the best.\"");
        assert_eq!(got[0].0.as_deref(), Some("Person X"));
        assert_eq!(got[1].0.as_deref(), Some("Person X"), "second quote inherits the tag");
    }

    #[test]
    fn non_person_subject_gets_no_vote() {
        assert_eq!(direct("\"Hello.\" The dog barked."), vec![(None, None)]);
    }

    #[test]
    fn before_tags() {
        assert_eq!(
            direct("Elizabeth said to her sister, \"Go.\"")[0].0.as_deref(),
            Some("Elizabeth")
        );
        assert_eq!(
            direct("Mr. Bennet replied that \"he had not.\"")[0].0.as_deref(),
            Some("Mr. Bennet")
        );
    }

    #[test]
    fn after_narration_introducing_next_quote_is_not_reused() {
        let got = direct("\"Go away.\" Jane said, \"Now.\"");
        assert_eq!(got[0].0, None);
        assert_eq!(got[1].0.as_deref(), Some("Jane"));
    }

    #[test]
    fn colon_paragraph_tags_the_next_quote() {
        let got = direct("They stood apart. Finally Tom said:\n\n\"I can lick you!\"\n\n\"Try it.\"");
        assert_eq!(got[0].0.as_deref(), Some("Tom"));
        assert_eq!(got[1], (None, None));
        let got = direct("Tom said nothing.\n\n\"Go.\"");
        assert_eq!(got[0], (None, None));
    }

    #[test]
    fn possessive_is_not_the_speaker() {
        let got = direct("\"Christmas a humbug, uncle!\" said Scrooge's nephew.");
        assert_eq!(got[0], (None, None));
    }

    #[test]
    fn inverted_tag_between_quotes_serves_both() {
        let got = direct("\"Oh!\" said Lydia stoutly, \"I am not afraid.\"");
        assert_eq!(got[0].0.as_deref(), Some("Lydia"));
        assert_eq!(got[1].0.as_deref(), Some("Lydia"));
    }

    #[test]
    fn coref_links_nearest_gender_compatible() {
        let f = Fixture::new("Elizabeth paused. She smiled.");
        let ctx = f.ctx();
        let clusters = resolve_local_coref(&ctx, 0..2, &HashMap::new());
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].mention_ids, vec![0, 1]);
    }

    #[test]
    fn coref_rejects_incompatible_gender() {
        let f = Fixture::new("Mr. Darcy bowed. She left.");
        let ctx = f.ctx();
        let clusters = resolve_local_coref(&ctx, 0..2, &HashMap::new());
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn coref_without_pronouns_gives_singletons() {
        let f = Fixture::new("Elizabeth met Jane. Darcy left.");
        let ctx = f.ctx();
        let clusters = resolve_local_coref(&ctx, 0..2, &HashMap::new());
        assert!(clusters.iter().all(|c| c.mention_ids.len() == 1));
        assert_eq!(clusters.len(), 3);
    }

    #[test]
    fn coref_clusters_stay_in_window() {
        let f = Fixture::new("Elizabeth paused. Nothing happened. The rain fell. She smiled.");
        let ctx = f.ctx();
        let idx = CorefIndex::build(&ctx, &HashMap::new());
        let she = f.mentions.iter().position(|m| m.surface == "She").unwrap();
        assert_eq!(idx.antecedent(she), None);
    }

    #[test]
    fn quoted_pronouns_vote() {
        let f = Fixture::new("Wickham bowed to Elizabeth. \"Wickham, you are late,\" said she.");
        let ctx = f.ctx();
        let outcomes = direct_speaker_votes(&ctx);
        let tags: HashMap<UttId, usize> = outcomes
            .iter()
            .filter_map(|o| o.tag.map(|t| (t.utt, t.mention)))
            .collect();
        let idx = CorefIndex::build(&ctx, &tags);
        let votes = pronoun_coref_rule(&f.utts[0], &idx, outcomes[0].pronoun.as_ref(), &ctx);
        assert!(
            votes
                .iter()
                .any(|v| v.entity.0 == "Wickham" && v.polarity == Polarity::Against)
        );
        assert!(
            !votes
                .iter()
                .any(|v| v.entity.0 == "Wickham" && v.polarity == Polarity::For)
        );
    }

    #[test]
    fn first_person_follows_tag() {
        let f = Fixture::new("\"I am tired,\" said Jane.");
        let ctx = f.ctx();
        let outcomes = direct_speaker_votes(&ctx);
        let tags: HashMap<UttId, usize> = outcomes
            .iter()
            .filter_map(|o| o.tag.map(|t| (t.utt, t.mention)))
            .collect();
        let idx = CorefIndex::build(&ctx, &tags);
        let votes = pronoun_coref_rule(&f.utts[0], &idx, None, &ctx);
        assert_eq!(votes.len(), 1);
        assert_eq!(votes[0].entity.0, "Jane");
        assert_eq!(votes[0].source, VoteSource::FirstPerson);
    }

    #[test]
    fn alternation_two_party_run() {
        let f = Fixture::new("Jane met Elizabeth.\n\n\"A.\"\n\n\"B.\"\n\n\"C.\"\n\n\"D.\"");
        let ctx = f.ctx();
        let prior: HashMap<UttId, EntityId> = [
            (UttId(0), EntityId("Jane".into())),
            (UttId(1), EntityId("Elizabeth".into())),
        ]
        .into();
        let votes = alternation_rule(&f.utts, &prior, &BTreeSet::new(), &ctx);
        let fors: Vec<(usize, &str)> = votes
            .iter()
            .filter(|v| v.polarity == Polarity::For)
            .map(|v| (v.utt.0, v.entity.0.as_str()))
            .collect();
        assert_eq!(fors, vec![(2, "Jane"), (3, "Elizabeth")]);
    }

    #[test]
    fn alternation_skips_three_party_runs() {
        let f = Fixture::new("\"A.\"\n\n\"B.\"\n\n\"C.\"\n\n\"D.\"");
        let ctx = f.ctx();
        let prior: HashMap<UttId, EntityId> = [
            (UttId(0), EntityId("X".into())),
            (UttId(1), EntityId("Y".into())),
            (UttId(3), EntityId("Z".into())),
        ]
        .into();
        assert!(alternation_rule(&f.utts, &prior, &BTreeSet::new(), &ctx).is_empty());
    }

    #[test]
    fn alternation_needs_neighbours() {
        let f = Fixture::new("\"Alone.\"");
        let ctx = f.ctx();
        assert!(alternation_rule(&f.utts, &HashMap::new(), &BTreeSet::new(), &ctx).is_empty());
    }

    #[test]
    fn narration_breaks_runs() {
        let f = Fixture::new("\"A.\"\n\n\"B.\"\n\nThey sat.\n\n\"C.\"");
        let ctx = f.ctx();
        let prior: HashMap<UttId, EntityId> =
            [(UttId(0), EntityId("X".into())), (UttId(1), EntityId("Y".into()))].into();
        assert!(alternation_rule(&f.utts, &prior, &BTreeSet::new(), &ctx).is_empty());
    }
}
