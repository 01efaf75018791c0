//! Turning rule votes into one speaker per utterance.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::events::Event;
use crate::lexicon::Gender;
use crate::mentions::{CharacterEntity, EntityId};
use crate::quotes::{UttId, Utterance};
use crate::rules::{Polarity, Rule, RuleContext, Vote, VoteSource, alternation_rule, dedup_votes};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub utt: UttId,
    pub speaker: Option<EntityId>,
    /// Net votes per entity: +1 per `for`, -1 per `against`.
    pub tally: BTreeMap<EntityId, i32>,
    /// Rules with a `for` vote for the speaker.
    pub decided_by: BTreeSet<Rule>,
    /// Net tally of the speaker, 0 when unattributed.
    pub confidence: i32,
    /// Set when a named speech tag replaced the tally winner.
    #[serde(default)]
    pub overridden: bool,
    /// Set when the speaker came from a continuation chain.
    #[serde(default)]
    pub propagated: bool,
}

impl Attribution {
    pub fn unattributed(utt: UttId) -> Self {
        Attribution {
            utt,
            speaker: None,
            tally: BTreeMap::new(),
            decided_by: BTreeSet::new(),
            confidence: 0,
            overridden: false,
            propagated: false,
        }
    }
}

/// Tie-break distance between an utterance and an entity's nearest mention.
pub trait Proximity {
    fn distance(&self, utt: UttId, entity: &EntityId) -> Option<usize>;
}

/// No positional information; ties that survive rule priority stay unattributed.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoProximity;

impl Proximity for NoProximity {
    fn distance(&self, _: UttId, _: &EntityId) -> Option<usize> {
        None
    }
}

impl Proximity for RuleContext<'_> {
    fn distance(&self, utt: UttId, entity: &EntityId) -> Option<usize> {
        self.proximity(self.utterance(utt)?, entity)
    }
}

/// Allowed speakers per utterance, from the gender post-filter.
pub type Constraints = HashMap<UttId, BTreeSet<EntityId>>;

fn decide(utt: UttId, votes: &[&Vote], proximity: &dyn Proximity, allowed: Option<&BTreeSet<EntityId>>) -> Attribution {
    let mut tally: BTreeMap<EntityId, i32> = BTreeMap::new();
    let mut best_rule: BTreeMap<&EntityId, Rule> = BTreeMap::new();
    for v in votes {
        *tally.entry(v.entity.clone()).or_default() += v.polarity.weight();
        if v.polarity == Polarity::For {
            best_rule
                .entry(&v.entity)
                .and_modify(|r| *r = (*r).min(v.rule))
                .or_insert(v.rule);
        }
    }
    let eligible: Vec<(&EntityId, i32)> = tally
        .iter()
        .filter(|(e, n)| **n > 0 && allowed.is_none_or(|a| a.contains(*e)))
        .map(|(e, n)| (e, *n))
        .collect();
    let mut attr = Attribution::unattributed(utt);
    let Some(top) = eligible.iter().map(|(_, n)| *n).max() else {
        attr.tally = tally;
        return attr;
    };
    let mut tied: Vec<&EntityId> = eligible.iter().filter(|(_, n)| *n == top).map(|(e, _)| *e).collect();
    if tied.len() > 1 {
        let rule_of = |e: &EntityId| best_rule.get(e).copied().unwrap_or(Rule::Alternation);
        let strongest = tied.iter().map(|e| rule_of(e)).min().expect("non-empty");
        tied.retain(|e| rule_of(e) == strongest);
    }
    if tied.len() > 1 {
        let dist: Vec<Option<usize>> = tied.iter().map(|e| proximity.distance(utt, e)).collect();
        if let Some(nearest) = dist.iter().flatten().min().copied() {
            let keep: Vec<&EntityId> = tied
                .iter()
                .zip(&dist)
                .filter(|(_, d)| **d == Some(nearest))
                .map(|(e, _)| *e)
                .collect();
            tied = keep;
        }
    }
    if tied.len() == 1 {
        let winner = tied[0].clone();
        attr.decided_by = votes
            .iter()
            .filter(|v| v.entity == winner && v.polarity == Polarity::For)
            .map(|v| v.rule)
            .collect();
        attr.confidence = top;
        attr.speaker = Some(winner);
    }
    attr.tally = tally;
    attr
}

/// One aggregation pass: net tallies, strict winner with net > 0, tie-breaks.
///
/// Ties go to the entity whose strongest supporting rule ranks higher
/// (direct, then coref, then alternation), then to the entity mentioned
/// closest to the utterance; anything still tied stays unattributed.
pub fn aggregate(
    utts: &[Utterance],
    votes: &[Vote],
    proximity: &dyn Proximity,
    constraints: Option<&Constraints>,
) -> BTreeMap<UttId, Attribution> {
    let mut by_utt: HashMap<UttId, Vec<&Vote>> = HashMap::new();
    for v in votes {
        by_utt.entry(v.utt).or_default().push(v);
    }
    utts.iter()
        .map(|u| {
            let vs = by_utt.get(&u.id).map(Vec::as_slice).unwrap_or_default();
            let allowed = constraints.and_then(|c| c.get(&u.id));
            (u.id, decide(u.id, vs, proximity, allowed))
        })
        .collect()
}

/// A named speech-tag vote wins over whatever the tally decided.
pub fn named_direct_override(mut attr: Attribution, direct_votes: &[Vote]) -> Attribution {
    let named = direct_votes
        .iter()
        .filter(|v| {
            v.utt == attr.utt
                && v.rule == Rule::Direct
                && v.source == VoteSource::NamedTag
                && v.polarity == Polarity::For
        })
        .map(|v| &v.entity)
        .min();
    if let Some(e) = named
        && attr.speaker.as_ref() != Some(e)
    {
        attr.speaker = Some(e.clone());
        attr.confidence = attr.tally.get(e).copied().unwrap_or(0);
        attr.decided_by = BTreeSet::from([Rule::Direct]);
        attr.overridden = true;
    }
    attr
}

/// Candidates whose gender is compatible with a gendered speech-tag pronoun.
pub fn gender_filter(candidates: &[CharacterEntity], direct_pronoun: Option<Gender>) -> Vec<CharacterEntity> {
    match direct_pronoun {
        Some(g) if g != Gender::Unknown => candidates.iter().filter(|c| c.gender.compatible(g)).cloned().collect(),
        _ => candidates.to_vec(),
    }
}

/// [`gender_filter`] that falls back to the full list when nothing survives.
pub fn gender_filter_or_all(
    utt: UttId,
    candidates: &[CharacterEntity],
    pronoun: &str,
    gender: Gender,
    events: &mut Vec<Event>,
) -> Vec<CharacterEntity> {
    let kept = gender_filter(candidates, Some(gender));
    if kept.is_empty() && !candidates.is_empty() {
        let event = Event::GenderFilterEmpty {
            utt: utt.0,
            pronoun: pronoun.to_string(),
        };
        event.emit();
        events.push(event);
        return candidates.to_vec();
    }
    kept
}

/// Copies speakers along `continuation_of` links into unattributed parts.
///
/// Conflicting attributions within a chain are both kept and reported.
pub fn propagate_continuations(
    mut attrs: BTreeMap<UttId, Attribution>,
    utts: &[Utterance],
    events: &mut Vec<Event>,
) -> BTreeMap<UttId, Attribution> {
    let links: Vec<(UttId, UttId)> = utts
        .iter()
        .filter_map(|u| u.continuation_of.map(|prev| (prev, u.id)))
        .collect();
    let copy = |attrs: &mut BTreeMap<UttId, Attribution>, from: UttId, to: UttId| {
        let Some(speaker) = attrs.get(&from).and_then(|a| a.speaker.clone()) else {
            return;
        };
        let Some(target) = attrs.get_mut(&to) else { return };
        if target.speaker.is_none() {
            target.speaker = Some(speaker);
            target.propagated = true;
        }
    };
    for &(prev, next) in &links {
        copy(&mut attrs, prev, next);
    }
    for &(prev, next) in links.iter().rev() {
        copy(&mut attrs, next, prev);
    }
    for &(prev, next) in &links {
        if let (Some(a), Some(b)) = (
            attrs.get(&prev).and_then(|a| a.speaker.clone()),
            attrs.get(&next).and_then(|a| a.speaker.clone()),
        ) && a != b
        {
            let event = Event::ContinuationConflict {
                utt: next.0,
                previous: prev.0,
                speaker: b.0,
                previous_speaker: a.0,
            };
            event.emit();
            events.push(event);
        }
    }
    attrs
}

#[derive(Debug, Clone)]
pub struct FixpointOutcome {
    pub attributions: BTreeMap<UttId, Attribution>,
    /// Base votes plus every alternation vote added along the way.
    pub votes: Vec<Vote>,
    pub iterations: usize,
    /// Attributed-utterance count after each pass, starting with the base pass.
    pub attributed_per_pass: Vec<usize>,
}

fn finalize(
    utts: &[Utterance],
    votes: &[Vote],
    proximity: &dyn Proximity,
    constraints: Option<&Constraints>,
) -> BTreeMap<UttId, Attribution> {
    aggregate(utts, votes, proximity, constraints)
        .into_iter()
        .map(|(id, a)| (id, named_direct_override(a, votes)))
        .collect()
}

fn attributed(attrs: &BTreeMap<UttId, Attribution>) -> HashMap<UttId, EntityId> {
    attrs
        .iter()
        .filter_map(|(id, a)| a.speaker.clone().map(|s| (*id, s)))
        .collect()
}

/// Aggregates base votes, then repeatedly feeds the attributions to the
/// alternation rule and re-aggregates until nothing changes.
///
/// Alternation votes only ever target utterances that are still
/// unattributed, so the attributed set grows monotonically and the loop
/// runs at most once per utterance.
pub fn aggregate_to_fixpoint(
    base_votes: &[Vote],
    tagged: &BTreeSet<UttId>,
    constraints: Option<&Constraints>,
    ctx: &RuleContext<'_>,
) -> FixpointOutcome {
    let utts = ctx.utterances;
    let mut votes = base_votes.to_vec();
    dedup_votes(&mut votes);
    let mut attrs = finalize(utts, &votes, ctx, constraints);
    let mut prior = attributed(&attrs);
    let mut per_pass = vec![prior.len()];
    let mut iterations = 0;
    while iterations < utts.len() {
        let fresh: Vec<Vote> = alternation_rule(utts, &prior, tagged, ctx)
            .into_iter()
            .filter(|v| !prior.contains_key(&v.utt) && !votes.contains(v))
            .collect();
        if fresh.is_empty() {
            break;
        }
        iterations += 1;
        votes.extend(fresh);
        dedup_votes(&mut votes);
        attrs = finalize(utts, &votes, ctx, constraints);
        let next = attributed(&attrs);
        per_pass.push(next.len());
        if next == prior {
            break;
        }
        prior = next;
    }
    FixpointOutcome {
        attributions: attrs,
        votes,
        iterations,
        attributed_per_pass: per_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Span;
    use crate::lexicon::Gender;

    fn utt(i: usize) -> Utterance {
        Utterance {
            id: UttId(i),
            span: Span::new(i * 10, i * 10 + 5),
            sentence_ids: vec![i],
            paragraph_id: i,
            continuation_of: None,
        }
    }

    fn vote(u: usize, e: &str, polarity: Polarity, rule: Rule) -> Vote {
        Vote {
            utt: UttId(u),
            entity: EntityId(e.into()),
            polarity,
            rule,
            source: match rule {
                Rule::Direct => VoteSource::NamedTag,
                Rule::Coref => VoteSource::FirstPerson,
                Rule::Alternation => VoteSource::Alternation,
            },
            note: String::new(),
        }
    }

    fn speaker(votes: &[Vote]) -> Option<String> {
        aggregate(&[utt(0)], votes, &NoProximity, None)[&UttId(0)]
            .speaker
            .as_ref()
            .map(|e| e.0.clone())
    }

    #[test]
    fn strict_max_wins() {
        let v = [
            vote(0, "John", Polarity::For, Rule::Coref),
            vote(0, "John", Polarity::For, Rule::Alternation),
            vote(0, "Mary", Polarity::For, Rule::Coref),
        ];
        assert_eq!(speaker(&v).as_deref(), Some("John"));
    }

    #[test]
    fn tie_goes_to_rule_priority() {
        let v = [
            vote(0, "Mary", Polarity::For, Rule::Alternation),
            vote(0, "John", Polarity::For, Rule::Direct),
        ];
        assert_eq!(speaker(&v).as_deref(), Some("John"));
    }

    #[test]
    fn non_positive_tallies_leave_unattributed() {
        let v = [
            vote(0, "John", Polarity::Against, Rule::Coref),
            vote(0, "Mary", Polarity::For, Rule::Coref),
            vote(0, "Mary", Polarity::Against, Rule::Alternation),
        ];
        assert_eq!(speaker(&v), None);
        assert_eq!(speaker(&[]), None);
    }

    struct Fixed;
    impl Proximity for Fixed {
        fn distance(&self, _: UttId, e: &EntityId) -> Option<usize> {
            Some(if e.0 == "Near" { 1 } else { 50 })
        }
    }

    #[test]
    fn proximity_breaks_remaining_ties() {
        let v = [
            vote(0, "Far", Polarity::For, Rule::Coref),
            vote(0, "Near", Polarity::For, Rule::Coref),
        ];
        let out = aggregate(&[utt(0)], &v, &Fixed, None);
        assert_eq!(out[&UttId(0)].speaker, Some(EntityId("Near".into())));
        assert_eq!(speaker(&v), None, "without proximity the tie stays unresolved");
    }

    #[test]
    fn constraints_restrict_the_winner() {
        let v = [
            vote(0, "John", Polarity::For, Rule::Coref),
            vote(0, "John", Polarity::For, Rule::Alternation),
            vote(0, "Mary", Polarity::For, Rule::Coref),
        ];
        let c: Constraints = [(UttId(0), BTreeSet::from([EntityId("Mary".into())]))].into();
        let out = aggregate(&[utt(0)], &v, &NoProximity, Some(&c));
        assert_eq!(out[&UttId(0)].speaker, Some(EntityId("Mary".into())));
    }

    #[test]
    fn override_cases() {
        let base = [
            vote(0, "Y", Polarity::For, Rule::Coref),
            vote(0, "Y", Polarity::For, Rule::Alternation),
        ];
        let a = aggregate(&[utt(0)], &base, &NoProximity, None)
            .remove(&UttId(0))
            .unwrap();
        let direct = [vote(0, "X", Polarity::For, Rule::Direct)];
        let o = named_direct_override(a.clone(), &direct);
        assert_eq!(o.speaker, Some(EntityId("X".into())));
        assert!(o.overridden);

        let mut pronoun = direct[0].clone();
        pronoun.source = VoteSource::ResolvedTag;
        pronoun.rule = Rule::Coref;
        assert_eq!(named_direct_override(a.clone(), &[pronoun]), a);
        assert_eq!(named_direct_override(a.clone(), &[]), a);
    }

    fn entity(name: &str, gender: Gender) -> CharacterEntity {
        CharacterEntity {
            id: EntityId(name.into()),
            canonical: name.into(),
            aliases: BTreeSet::from([name.to_string()]),
            mention_ids: vec![],
            gender,
        }
    }

    #[test]
    fn gender_filter_cases() {
        let cands = vec![
            entity("Elizabeth", Gender::Female),
            entity("Darcy", Gender::Male),
            entity("X", Gender::Unknown),
        ];
        let names = |v: Vec<CharacterEntity>| v.into_iter().map(|e| e.canonical).collect::<Vec<_>>();
        assert_eq!(
            names(gender_filter(&cands, Some(Gender::Female))),
            vec!["Elizabeth", "X"]
        );
        let men = vec![entity("Darcy", Gender::Male), entity("Bingley", Gender::Male)];
        assert!(gender_filter(&men, Some(Gender::Female)).is_empty());
        assert_eq!(names(gender_filter(&cands, None)).len(), 3);

        let mut events = Vec::new();
        let kept = gender_filter_or_all(UttId(3), &men, "she", Gender::Female, &mut events);
        assert_eq!(kept.len(), 2);
        assert_eq!(events[0].name(), "GenderFilterEmpty");
    }

    #[test]
    fn continuation_propagation() {
        let mut u = vec![utt(0), utt(1)];
        u[1].continuation_of = Some(UttId(0));
        let x = [vote(0, "X", Polarity::For, Rule::Direct)];
        let attrs = aggregate(&u, &x, &NoProximity, None);
        let mut events = Vec::new();
        let out = propagate_continuations(attrs, &u, &mut events);
        assert_eq!(out[&UttId(1)].speaker, Some(EntityId("X".into())));
        assert!(out[&UttId(1)].propagated);

        let both = [x[0].clone(), vote(1, "Y", Polarity::For, Rule::Direct)];
        let out = propagate_continuations(aggregate(&u, &both, &NoProximity, None), &u, &mut events);
        assert_eq!(out[&UttId(1)].speaker, Some(EntityId("Y".into())));
        assert_eq!(events.len(), 1);

        let none = aggregate(&u, &[], &NoProximity, None);
        let out = propagate_continuations(none.clone(), &u, &mut Vec::new());
        assert_eq!(out, none);
    }
}
