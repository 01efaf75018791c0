//! Scores the rules on a benchmark, native JSON lines or delimited with a
//! column mapping, and prints the per-category table and every miss.
//!
//! cargo run --example evaluate_benchmark -- fixtures/benchmark/wickham_passage.jsonl
//! cargo run --example evaluate_benchmark -- fixtures/benchmark/direct.tsv fixtures/benchmark/direct.mapping.toml

use std::path::PathBuf;

use quote_attribution::eval::{
    BenchmarkFormat, ColumnMapping, EvalConfig, evaluate, load_benchmark, stratified_report,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let bench = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/benchmark/wickham_passage.jsonl").into());
    let format = match args.next() {
        Some(mapping) => BenchmarkFormat::Delimited(Box::new(ColumnMapping::from_toml_file(&mapping)?)),
        None => BenchmarkFormat::Native,
    };
    let records = load_benchmark(&bench, &format)?;
    let outcome = evaluate(&records, &EvalConfig::default())?;
    print!("{}", stratified_report(&outcome.report));
    for p in outcome.predictions.iter().filter(|p| !p.correct) {
        println!("miss {}: predicted {:?}, gold {:?}", p.record_id, p.predicted, p.gold);
    }
    Ok(())
}
