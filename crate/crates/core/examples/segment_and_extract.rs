//! Segments a text file and lists its utterances with speakers.
//!
//! cargo run --example segment_and_extract -- fixtures/pp_ch01_02.txt

use quote_attribution::ingest::{load_document, strip_boilerplate};
use quote_attribution::pipeline::Pipeline;
use quote_attribution::quotes::utterance_stats;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/pp_ch01_02.txt").into());
    let raw = strip_boilerplate(load_document(path.as_ref())?)?.doc;
    let analyzed = Pipeline::default().analyze(&raw);
    println!(
        "{} paragraphs, {} sentences, {} utterances",
        analyzed.doc.paragraphs.len(),
        analyzed.doc.sentences.len(),
        analyzed.utterances.len()
    );
    for u in &analyzed.utterances {
        let speaker = analyzed.speaker(u.id).map_or("-", |e| e.canonical.as_str());
        let text: String = u.span.slice(&analyzed.doc.text).chars().take(60).collect();
        let cont = if u.continuation_of.is_some() { "+" } else { " " };
        println!("{} {cont} p{:<3} {:<14} {text}", u.id, u.paragraph_id, speaker);
    }
    println!("{:?}", utterance_stats(&analyzed.doc, &analyzed.utterances));
    Ok(())
}
