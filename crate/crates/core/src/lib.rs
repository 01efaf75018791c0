pub mod aggregate;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod events;
pub mod ingest;
pub mod lexicon;
pub mod mentions;
pub mod pipeline;
pub mod quotes;
pub mod rules;
pub mod token;
