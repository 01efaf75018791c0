//! Shows which speech-tag shape each sentence matches and the vote it yields.
//!
//! cargo run --example direct_patterns

use quote_attribution::pipeline::Pipeline;

const SENTENCES: [&str; 7] = [
    "\"It is always the way,\" said Frank.",
    "\"We shall see,\" Tom said.",
    "Jane said, \"It is late.\"",
    "Elizabeth replied that \"she had not seen him.\"",
    "\"You certainly do,\" she replied with a smile.",
    "Then Tom said:\n\n\"What's your name?\"",
    "\"Hello.\" The dog barked.",
];

fn main() {
    let pipeline = Pipeline::default();
    for text in SENTENCES {
        let a = pipeline.analyze_text("demo", text);
        println!("{}", text.replace('\n', " "));
        for (i, u) in a.utterances.iter().enumerate() {
            let shape = match (a.tags[i], a.direct_pronouns[i]) {
                (Some(t), Some(_)) => format!(
                    "pronoun {:?} via {:?}, left to coreference",
                    a.mentions[t.mention].surface, t.pattern
                ),
                (Some(t), None) => format!("{:?} via {:?}", a.mentions[t.mention].surface, t.pattern),
                _ => "no tag".into(),
            };
            println!("  {:?}: {shape}", u.text(&a.doc));
            for v in a.votes_for(u.id) {
                println!("    {:?} {} ({}, {:?})", v.polarity, v.entity, v.rule, v.source);
            }
        }
    }
}
