//! Plugs a gazetteer in place of the capitalization heuristic.
//!
//! "Will" is stoplisted because it usually opens a question, so the
//! heuristic never reads it as a name; a fixed name list does.
//!
//! cargo run --example custom_recognizer

use std::ops::Range;

use quote_attribution::ingest::{Document, Span};
use quote_attribution::lexicon::{Gender, Lexicons};
use quote_attribution::mentions::{Mention, Recognizer};
use quote_attribution::pipeline::Pipeline;

const TEXT: &str =
    "Will set down the lamp.\n\n\"It is late,\" said Will.\n\n\"Not so late,\" replied Idris.\n\n\"Late enough.\"";

struct Gazetteer(Vec<&'static str>);

impl Recognizer for Gazetteer {
    fn recognize(&self, doc: &Document, window: Range<usize>, _lex: &Lexicons) -> Vec<Mention> {
        let mut out = Vec::new();
        for s in window {
            let sentence = doc.sentences[s];
            for name in &self.0 {
                for (at, _) in sentence.slice(&doc.text).match_indices(name) {
                    let start = sentence.start + at;
                    out.push(Mention::named(
                        doc,
                        Span::new(start, start + name.len()),
                        Gender::Unknown,
                    ));
                }
            }
        }
        out.sort_by_key(|m| m.span.start);
        out
    }
}

fn show(label: &str, pipeline: &Pipeline) {
    let a = pipeline.analyze_text("demo", TEXT);
    println!(
        "{label}: {} named mentions",
        a.mentions.iter().filter(|m| m.is_named()).count()
    );
    for u in &a.utterances {
        let speaker = a.speaker(u.id).map_or("-", |e| e.canonical.as_str());
        println!("  {:<6} {}", speaker, u.text(&a.doc));
    }
}

fn main() {
    show("heuristic", &Pipeline::default());
    show(
        "gazetteer",
        &Pipeline::default().with_recognizer(Gazetteer(vec!["Will", "Idris"])),
    );
}
