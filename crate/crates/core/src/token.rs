//! Minimal word/punctuation tokenizer with byte offsets.

use crate::ingest::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub span: Span,
    pub kind: TokenKind,
}

impl Token {
    pub fn text<'a>(&self, text: &'a str) -> &'a str {
        &text[self.span.start..self.span.end]
    }

    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

/// Tokenizes `text[range]`; spans are absolute offsets into `text`.
///
/// Words are alphanumeric runs that may contain an apostrophe or hyphen
/// followed by another alphanumeric ("don't", "to-morrow"). Every other
/// non-space character is a single punctuation token.
pub fn tokenize(text: &str, start: usize, end: usize) -> Vec<Token> {
    let slice = &text[start..end];
    let mut out = Vec::new();
    let mut chars = slice.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        if c.is_alphanumeric() {
            let mut j = i + c.len_utf8();
            loop {
                match chars.peek().copied() {
                    Some((_, n)) if n.is_alphanumeric() => {
                        j += n.len_utf8();
                        chars.next();
                    }
                    Some((k, n)) if is_joiner(n) => {
                        let after = slice[k + n.len_utf8()..].chars().next();
                        if after.is_some_and(char::is_alphanumeric) {
                            j += n.len_utf8();
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    _ => break,
                }
            }
            out.push(Token {
                span: Span::new(start + i, start + j),
                kind: TokenKind::Word,
            });
        } else {
            out.push(Token {
                span: Span::new(start + i, start + i + c.len_utf8()),
                kind: TokenKind::Punct,
            });
        }
    }
    out
}

/// Splits a trailing possessive or contraction off a word: `"Bingley's"` -> `"Bingley"`.
pub fn word_stem(word: &str) -> &str {
    for sep in ['\'', '\u{2019}'] {
        if let Some(pos) = word.find(sep) {
            return &word[..pos];
        }
    }
    word
}

pub fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// All-caps words of two or more letters (headings, roman numerals).
pub fn is_all_caps(word: &str) -> bool {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
}

/// Collapses whitespace runs into single spaces and trims the ends.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace token count.
pub fn whitespace_tokens(s: &str) -> usize {
    s.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        tokenize(s, 0, s.len()).iter().map(|t| t.text(s)).collect()
    }

    #[test]
    fn splits_words_and_punctuation() {
        assert_eq!(
            words("\"You certainly do,\" she replied."),
            vec!["\"", "You", "certainly", "do", ",", "\"", "she", "replied", "."]
        );
    }

    #[test]
    fn keeps_internal_apostrophes_and_hyphens() {
        assert_eq!(
            words("don't to-morrow Bingley's girls' --"),
            vec!["don't", "to-morrow", "Bingley's", "girls", "'", "-", "-"]
        );
        assert_eq!(word_stem("Bingley's"), "Bingley");
        assert_eq!(word_stem("I'm"), "I");
    }

    #[test]
    fn offsets_are_absolute() {
        let s = "ab Élise cd";
        let toks = tokenize(s, 3, s.len());
        assert_eq!(toks[0].text(s), "Élise");
        assert_eq!(toks[0].span.start, 3);
    }
}
