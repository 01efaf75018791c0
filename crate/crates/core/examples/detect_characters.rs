//! Lists the characters of a text: aliases, inferred gender and mention counts.
//!
//! cargo run --example detect_characters -- fixtures/pp_ch01_02.txt

use quote_attribution::ingest::{load_document, strip_boilerplate};
use quote_attribution::pipeline::Pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/pp_ch01_02.txt").into());
    let raw = strip_boilerplate(load_document(path.as_ref())?)?.doc;
    let analyzed = Pipeline::default().analyze(&raw);
    let pronouns = analyzed.mentions.iter().filter(|m| m.is_pronoun()).count();
    println!("{} characters, {pronouns} pronoun mentions", analyzed.entities.len());
    let mut entities = analyzed.entities.clone();
    entities.sort_by(|a, b| b.mention_ids.len().cmp(&a.mention_ids.len()).then(a.id.cmp(&b.id)));
    for e in &entities {
        let aliases: Vec<&str> = e.aliases.iter().map(String::as_str).collect();
        println!(
            "{:>4}  {:<22} {:<8} {}",
            e.mention_ids.len(),
            e.canonical,
            format!("{:?}", e.gender),
            aliases.join(" | ")
        );
    }
    for event in &analyzed.events {
        println!("event: {}", serde_json::to_string(event)?);
    }
    Ok(())
}
