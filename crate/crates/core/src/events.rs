//! Audit events raised while processing a corpus.
//!
//! Operations that skip or reinterpret input return these alongside their
//! result and also emit them as structured `tracing` warnings, keyed by an
//! `event` field, so a corpus run can be grepped for each kind.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum Event {
    /// No start/end markers were found; the text was kept whole.
    NoBoilerplateMarkers { doc_id: String },
    /// A dangling quote mark with no continuation pattern; the span was skipped.
    UnbalancedQuotes {
        doc_id: String,
        paragraph: usize,
        offset: usize,
    },
    /// A short name is contained in two unrelated longer names.
    AmbiguousMerge { surface: String, containers: Vec<String> },
    /// A gendered direct pronoun left no compatible candidate.
    GenderFilterEmpty { utt: usize, pronoun: String },
    /// Two members of a continuation chain were attributed to different speakers.
    ContinuationConflict {
        utt: usize,
        previous: usize,
        speaker: String,
        previous_speaker: String,
    },
    /// A benchmark utterance was not found quoted inside its context.
    UtteranceNotFound { record_id: String },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::NoBoilerplateMarkers { .. } => "NoBoilerplateMarkers",
            Event::UnbalancedQuotes { .. } => "UnbalancedQuotes",
            Event::AmbiguousMerge { .. } => "AmbiguousMerge",
            Event::GenderFilterEmpty { .. } => "GenderFilterEmpty",
            Event::ContinuationConflict { .. } => "ContinuationConflict",
            Event::UtteranceNotFound { .. } => "UtteranceNotFound",
        }
    }

    pub fn emit(&self) {
        let detail = serde_json::to_string(self).unwrap_or_default();
        tracing::warn!(event = self.name(), %detail);
    }
}
