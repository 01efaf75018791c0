//! Builds masked, anonymized training instances from the bundled corpus and
//! prints one of them in both export formats.
//!
//! cargo run --example build_distant_dataset -- [corpus-dir] [seed]

use quote_attribution::cli::build_corpus_instances;
use quote_attribution::config::RunConfig;
use quote_attribution::dataset::{corpus_stats, render_qa};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let corpus = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus").into());
    let mut cfg = RunConfig {
        corpus: Some(corpus.into()),
        jobs: 4,
        ..RunConfig::default()
    };
    cfg.masking.seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    cfg.validate()?;
    let (docs, instances) = build_corpus_instances(&cfg)?;
    let stats = corpus_stats(&instances, 5, cfg.masking.seed);
    println!("{} documents, {} instances", docs.len(), stats.instances);
    println!("{}", serde_json::to_string_pretty(&stats)?);
    if let Some(inst) = instances.iter().find(|i| i.masked) {
        println!("\ninstance-lines:\n{}", serde_json::to_string_pretty(inst)?);
        let qa = render_qa(inst);
        println!("\nqa-lines:\n{}\n\n{}", qa.input, qa.question);
        println!("answer {:?} at chars {}..{}", qa.answer, qa.answer_start, qa.answer_end);
    }
    Ok(())
}
