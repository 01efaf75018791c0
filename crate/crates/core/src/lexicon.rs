//! Word lists that drive the rule pipeline.
//!
//! Every list ships with a default compiled into the crate (see `data/`)
//! and can be replaced from a file with the same line format.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    /// Unknown is compatible with everything.
    pub fn compatible(self, other: Gender) -> bool {
        self == Gender::Unknown || other == Gender::Unknown || self == other
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "unknown" | "u" | "" => Ok(Gender::Unknown),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Person {
    First,
    Second,
    Third,
    None,
}

impl FromStr for Person {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" | "1" => Ok(Person::First),
            "second" | "2" => Ok(Person::Second),
            "third" | "3" => Ok(Person::Third),
            other => Err(format!("unknown grammatical person {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Singular,
    Plural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Subject,
    Object,
    Possessive,
    Reflexive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PronounEntry {
    pub person: Person,
    pub gender: Gender,
    pub number: Number,
    pub case: Case,
}

#[derive(Debug, Clone, Default)]
pub struct Abbreviations {
    entries: HashSet<String>,
}

impl Abbreviations {
    pub fn parse(text: &str) -> Self {
        Abbreviations {
            entries: data_lines(text).map(|(_, l)| l.to_string()).collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::parse(&read(path)?))
    }

    /// `token` includes its trailing period, e.g. `"Mr."`.
    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(token)
    }

    pub fn insert(&mut self, token: impl Into<String>) {
        self.entries.insert(token.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn default_abbreviations() -> Abbreviations {
    Abbreviations::parse(include_str!("../data/abbreviations.txt"))
}

/// Paths that override the compiled-in lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconPaths {
    pub abbreviations: Option<std::path::PathBuf>,
    pub pronouns: Option<std::path::PathBuf>,
    pub honorifics: Option<std::path::PathBuf>,
    pub stoplist: Option<std::path::PathBuf>,
    pub place_words: Option<std::path::PathBuf>,
    pub speech_verbs: Option<std::path::PathBuf>,
    pub given_names: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Lexicons {
    pub abbreviations: Abbreviations,
    /// Keyed by lowercase surface.
    pub pronouns: HashMap<String, PronounEntry>,
    pub honorifics: HashMap<String, Gender>,
    pub stoplist: HashSet<String>,
    pub place_words: HashSet<String>,
    /// Each verb phrase as a sequence of lowercase tokens.
    pub speech_verbs: Vec<Vec<String>>,
    /// First names with a conventional gender, used when no honorific is present.
    pub given_names: HashMap<String, Gender>,
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons::from_texts(
            include_str!("../data/abbreviations.txt"),
            include_str!("../data/pronouns.tsv"),
            include_str!("../data/honorifics.tsv"),
            include_str!("../data/stoplist.txt"),
            include_str!("../data/place_words.txt"),
            include_str!("../data/speech_verbs.txt"),
            include_str!("../data/given_names.tsv"),
        )
        .expect("bundled lexicons parse")
    }
}

impl Lexicons {
    pub fn from_texts(
        abbreviations: &str,
        pronouns: &str,
        honorifics: &str,
        stoplist: &str,
        place_words: &str,
        speech_verbs: &str,
        given_names: &str,
    ) -> Result<Self> {
        Ok(Lexicons {
            abbreviations: Abbreviations::parse(abbreviations),
            pronouns: parse_pronouns(pronouns)?,
            honorifics: parse_gendered("honorifics", honorifics)?,
            stoplist: data_lines(stoplist).map(|(_, l)| l.to_string()).collect(),
            place_words: data_lines(place_words).map(|(_, l)| l.to_string()).collect(),
            speech_verbs: data_lines(speech_verbs)
                .map(|(_, l)| l.split_whitespace().map(str::to_lowercase).collect())
                .collect(),
            given_names: parse_gendered("given_names", given_names)?,
        })
    }

    /// Defaults with any configured file substituted in.
    pub fn load(paths: &LexiconPaths) -> Result<Self> {
        let mut lex = Lexicons::default();
        if let Some(p) = &paths.abbreviations {
            lex.abbreviations = Abbreviations::from_file(p)?;
        }
        if let Some(p) = &paths.pronouns {
            lex.pronouns = parse_pronouns(&read(p)?)?;
        }
        if let Some(p) = &paths.honorifics {
            lex.honorifics = parse_gendered("honorifics", &read(p)?)?;
        }
        if let Some(p) = &paths.stoplist {
            lex.stoplist = data_lines(&read(p)?).map(|(_, l)| l.to_string()).collect();
        }
        if let Some(p) = &paths.place_words {
            lex.place_words = data_lines(&read(p)?).map(|(_, l)| l.to_string()).collect();
        }
        if let Some(p) = &paths.speech_verbs {
            lex.speech_verbs = data_lines(&read(p)?)
                .map(|(_, l)| l.split_whitespace().map(str::to_lowercase).collect())
                .collect();
        }
        if let Some(p) = &paths.given_names {
            lex.given_names = parse_gendered("given_names", &read(p)?)?;
        }
        Ok(lex)
    }

    /// Pronoun lookup. "I" only counts in upper case.
    pub fn pronoun(&self, word: &str) -> Option<PronounEntry> {
        if word == "i" {
            return None;
        }
        self.pronouns.get(&word.to_lowercase()).copied()
    }

    pub fn honorific(&self, word: &str) -> Option<Gender> {
        self.honorifics.get(word).copied()
    }

    pub fn given_name(&self, word: &str) -> Option<Gender> {
        self.given_names.get(word).copied()
    }

    pub fn is_honorific(&self, word: &str) -> bool {
        self.honorifics.contains_key(word)
    }

    /// Length in tokens of the speech verb phrase starting at `words[0]`, if any.
    pub fn speech_verb_at(&self, words: &[&str]) -> Option<usize> {
        self.speech_verbs
            .iter()
            .filter(|phrase| {
                phrase.len() <= words.len() && phrase.iter().zip(words).all(|(p, w)| w.eq_ignore_ascii_case(p))
            })
            .map(Vec::len)
            .max()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn lexicon_error(name: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::Lexicon {
        name: name.to_string(),
        line,
        reason: reason.into(),
    }
}

fn parse_pronouns(text: &str) -> Result<HashMap<String, PronounEntry>> {
    let mut out = HashMap::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(lexicon_error("pronouns", line, "expected 5 tab-separated columns"));
        }
        let err = |e: String| lexicon_error("pronouns", line, e);
        let person: Person = cols[1].parse().map_err(err)?;
        if person == Person::None {
            return Err(lexicon_error("pronouns", line, "pronouns need a grammatical person"));
        }
        let gender: Gender = cols[2].parse().map_err(err)?;
        let number = match cols[3] {
            "singular" => Number::Singular,
            "plural" => Number::Plural,
            other => return Err(lexicon_error("pronouns", line, format!("unknown number {other:?}"))),
        };
        let case = match cols[4] {
            "subject" => Case::Subject,
            "object" => Case::Object,
            "possessive" => Case::Possessive,
            "reflexive" => Case::Reflexive,
            other => return Err(lexicon_error("pronouns", line, format!("unknown case {other:?}"))),
        };
        out.insert(
            cols[0].to_lowercase(),
            PronounEntry {
                person,
                gender,
                number,
                case,
            },
        );
    }
    Ok(out)
}

fn parse_gendered(name: &str, text: &str) -> Result<HashMap<String, Gender>> {
    let mut out = HashMap::new();
    for (line, l) in data_lines(text) {
        let mut cols = l.split('\t').map(str::trim);
        let surface = cols.next().unwrap_or_default();
        let gender = cols
            .next()
            .unwrap_or("unknown")
            .parse()
            .map_err(|e: String| lexicon_error(name, line, e))?;
        out.insert(surface.to_string(), gender);
    }
    Ok(out)
}
