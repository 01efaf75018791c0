//! End-to-end attribution for one document.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::aggregate::{
    Attribution, Constraints, aggregate_to_fixpoint, gender_filter_or_all, propagate_continuations,
};
use crate::events::Event;
use crate::ingest::{Document, RawDocument, SegmentConfig, normalize_quotes, segment};
use crate::lexicon::{Gender, Lexicons, Person};
use crate::mentions::{
    CharacterEntity, GenderEvidence, HeuristicRecognizer, Mention, Recognizer, detect_mentions, infer_gender,
    merge_aliases,
};
use crate::quotes::{QuoteStyle, UttId, Utterance, extract_utterances};
use crate::rules::{CorefIndex, DirectPronoun, RuleContext, SpeechTag, Vote, direct_speaker_votes, pronoun_coref_rule};

/// Lexicons, segmentation settings and a recognizer, shared across documents.
#[derive(Clone)]
pub struct Pipeline {
    pub lex: Arc<Lexicons>,
    pub segment: SegmentConfig,
    pub recognizer: Arc<dyn Recognizer>,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline::new(Lexicons::default(), QuoteStyle::Double)
    }
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("segment", &self.segment)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(lex: Lexicons, quote_style: QuoteStyle) -> Self {
        let segment = SegmentConfig {
            abbreviations: lex.abbreviations.clone(),
            quote_style,
        };
        Pipeline {
            lex: Arc::new(lex),
            segment,
            recognizer: Arc::new(HeuristicRecognizer),
        }
    }

    pub fn with_recognizer(mut self, recognizer: impl Recognizer + 'static) -> Self {
        self.recognizer = Arc::new(recognizer);
        self
    }

    /// Normalizes quotes, segments and analyzes a raw document.
    pub fn analyze(&self, raw: &RawDocument) -> AnalyzedDocument {
        let normalized = RawDocument {
            text: normalize_quotes(&raw.text),
            ..raw.clone()
        };
        self.analyze_document(segment(&normalized, &self.segment))
    }

    pub fn analyze_text(&self, doc_id: &str, text: &str) -> AnalyzedDocument {
        self.analyze(&RawDocument::new(doc_id, text))
    }

    pub fn analyze_document(&self, doc: Document) -> AnalyzedDocument {
        let lex = self.lex.as_ref();
        let extraction = extract_utterances(&doc);
        let mut events = extraction.events;
        let utterances = extraction.utterances;
        let mentions = detect_mentions(&doc, 0..doc.sentences.len(), self.recognizer.as_ref(), lex);
        let evidence = GenderEvidence::collect(&mentions, lex);
        let merged = merge_aliases(&mentions, lex);
        events.extend(merged.events);
        let mut entities = merged.entities;
        for e in &mut entities {
            e.gender = infer_gender(e, &evidence, lex);
        }

        let ctx = RuleContext::new(&doc, lex, &utterances, &mentions, &entities);
        let direct = direct_speaker_votes(&ctx);
        let tags: Vec<Option<SpeechTag>> = direct.iter().map(|o| o.tag).collect();
        let direct_pronouns: Vec<Option<DirectPronoun>> = direct.iter().map(|o| o.pronoun).collect();
        let tag_map: HashMap<UttId, usize> = tags.iter().flatten().map(|t| (t.utt, t.mention)).collect();
        let coref = CorefIndex::build(&ctx, &tag_map);

        let mut base: Vec<Vote> = Vec::new();
        for (u, outcome) in utterances.iter().zip(&direct) {
            base.extend(outcome.votes.iter().cloned());
            base.extend(pronoun_coref_rule(u, &coref, outcome.pronoun.as_ref(), &ctx));
        }

        let mut constraints = Constraints::new();
        for dp in direct_pronouns.iter().flatten() {
            if dp.person != Person::Third || dp.gender == Gender::Unknown {
                continue;
            }
            let surface = &mentions[dp.mention].surface;
            let kept = gender_filter_or_all(dp.utt, &entities, surface, dp.gender, &mut events);
            if kept.len() < entities.len() {
                constraints.insert(dp.utt, kept.into_iter().map(|e| e.id).collect());
            }
        }

        let tagged: BTreeSet<UttId> = tag_map.keys().copied().collect();
        let fix = aggregate_to_fixpoint(&base, &tagged, Some(&constraints), &ctx);
        let attributions = propagate_continuations(fix.attributions, &utterances, &mut events);

        AnalyzedDocument {
            utterances,
            mentions,
            entities,
            tags,
            direct_pronouns,
            coref_antecedents: direct
                .iter()
                .map(|o| o.pronoun.and_then(|p| coref.antecedent(p.mention)))
                .collect(),
            votes: fix.votes,
            attributions,
            iterations: fix.iterations,
            events,
            doc,
            lex: Arc::clone(&self.lex),
        }
    }
}

/// Everything derived from one document.
#[derive(Debug, Clone)]
pub struct AnalyzedDocument {
    pub doc: Document,
    pub lex: Arc<Lexicons>,
    pub utterances: Vec<Utterance>,
    /// Sorted by start offset.
    pub mentions: Vec<Mention>,
    pub entities: Vec<CharacterEntity>,
    /// Speech tag per utterance, indexed like `utterances`.
    pub tags: Vec<Option<SpeechTag>>,
    pub direct_pronouns: Vec<Option<DirectPronoun>>,
    /// Named antecedent of each utterance's pronoun speech tag, if resolved.
    pub coref_antecedents: Vec<Option<usize>>,
    pub votes: Vec<Vote>,
    pub attributions: BTreeMap<UttId, Attribution>,
    pub iterations: usize,
    pub events: Vec<Event>,
}

impl AnalyzedDocument {
    pub fn context(&self) -> RuleContext<'_> {
        RuleContext::new(&self.doc, &self.lex, &self.utterances, &self.mentions, &self.entities)
    }

    pub fn attribution(&self, utt: UttId) -> Option<&Attribution> {
        self.attributions.get(&utt)
    }

    pub fn speaker(&self, utt: UttId) -> Option<&CharacterEntity> {
        let id = self.attributions.get(&utt)?.speaker.as_ref()?;
        self.entities.iter().find(|e| &e.id == id)
    }

    pub fn votes_for(&self, utt: UttId) -> impl Iterator<Item = &Vote> {
        self.votes.iter().filter(move |v| v.utt == utt)
    }

    pub fn attributed_count(&self) -> usize {
        self.attributions.values().filter(|a| a.speaker.is_some()).count()
    }
}
