//! Attributes the five-paragraph Pride and Prejudice passage in `fixtures/wickham_passage.txt`.

use quote_attribution::pipeline::Pipeline;

fn main() {
    let text = include_str!("../fixtures/wickham_passage.txt");
    let analyzed = Pipeline::default().analyze_text("wickham", text);
    for utt in &analyzed.utterances {
        let speaker = analyzed.speaker(utt.id).map_or("-", |e| e.canonical.as_str());
        let rules: Vec<String> = analyzed
            .attribution(utt.id)
            .map(|a| a.decided_by.iter().map(ToString::to_string).collect())
            .unwrap_or_default();
        println!(
            "P{} {:<10} [{}] {}",
            utt.paragraph_id + 1,
            speaker,
            rules.join(","),
            utt.text(&analyzed.doc)
        );
    }
    for v in &analyzed.votes {
        println!("  {} {:?} {} via {} ({})", v.utt, v.polarity, v.entity, v.rule, v.note);
    }
}
