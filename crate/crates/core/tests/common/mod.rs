//! Synthetic dialogue shared by the integration suites.
#![allow(dead_code)]

pub const FEMALE: [&str; 8] = ["Jane", "Mary", "Lucy", "Susan", "Alice", "Ruth", "Clara", "Kate"];
pub const MALE: [&str; 8] = ["Tom", "Ben", "John", "George", "Henry", "James", "Paul", "Frank"];

/// Quote contents free of capitalized words other than the opener.
pub const LINES: [&str; 12] = [
    "The weather has been very fine this week",
    "We ought to go home before dark",
    "It was the best thing of the season",
    "There is no hurry at all",
    "The road is longer than it looks",
    "We shall see about that tomorrow",
    "It cannot be helped now",
    "There was nobody at the door",
    "The letter came this morning",
    "We never heard of such a thing",
    "It is always the way",
    "The house stood empty for a year",
];

pub const VERBS: [&str; 4] = ["said", "replied", "cried", "answered"];

/// One turn of a scene: who speaks, what, and whether the line carries a named tag.
#[derive(Debug, Clone)]
pub struct Turn {
    pub speaker: usize,
    pub line: usize,
    pub tagged: bool,
    pub verb: usize,
}

/// A scene paragraph list plus the gold speaker of every utterance.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub text: String,
    pub gold: Vec<String>,
}

/// Two speakers alternating, one quote per paragraph, after a lead-in narration paragraph.
pub fn two_party_scene(a: &str, b: &str, turns: &[Turn]) -> Scene {
    let names = [a, b];
    let mut paras = vec![format!("{a} met {b} at the gate of the old mill.")];
    let mut gold = Vec::new();
    for t in turns {
        let who = names[t.speaker % 2];
        let line = LINES[t.line % LINES.len()];
        if t.tagged {
            paras.push(format!("\"{line},\" {} {who}.", VERBS[t.verb % VERBS.len()]));
        } else {
            paras.push(format!("\"{line}.\""));
        }
        gold.push(who.to_string());
    }
    Scene {
        text: paras.join("\n\n"),
        gold,
    }
}

/// Strictly alternating turns where only the first `tagged` carry a tag.
pub fn alternating(n: usize, tagged: usize) -> Vec<Turn> {
    (0..n)
        .map(|i| Turn {
            speaker: i % 2,
            line: i,
            tagged: i < tagged,
            verb: i,
        })
        .collect()
}

/// A document of `scenes` scenes, every line tagged, cycling through the name pools.
pub fn tagged_document(doc: usize, scenes: usize, turns: usize) -> String {
    let mut parts = Vec::new();
    for s in 0..scenes {
        let a = FEMALE[(doc + s) % FEMALE.len()];
        let b = MALE[(doc * 3 + s) % MALE.len()];
        let ts: Vec<Turn> = (0..turns)
            .map(|i| Turn {
                speaker: i % 2,
                line: doc + s + i,
                tagged: true,
                verb: s + i,
            })
            .collect();
        parts.push(two_party_scene(a, b, &ts).text);
        parts.push("The evening passed quietly after that.".to_string());
    }
    parts.join("\n\n")
}

/// Char-offset slice.
pub fn chars(s: &str, span: (usize, usize)) -> String {
    s.chars().skip(span.0).take(span.1 - span.0).collect()
}
