//! Parsing of LLM annotation responses (lists of `(word, tag)` tuples) and
//! their token-level LCS alignment back onto the original sentence.

use serde::{Deserialize, Serialize};

use crate::corpus::{repair_bio, LabelSpace, Tag};
use crate::error::{Error, Result};

/// One model response, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLlmOutput {
    pub sentence_id: usize,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuple {
    pub word: String,
    pub tag: Tag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentStatus {
    Exact,
    LcsRepaired,
    #[serde(rename = "fallback_O")]
    FallbackO,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentResult {
    pub bio: Vec<Tag>,
    /// Tokens that took a tag from a tuple.
    pub matched: usize,
    pub status: AlignmentStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme {
    Open(char),
    Close(char),
    Comma,
    Text(String),
}

const QUOTE_PAIRS: [(&str, &str); 5] = [("``", "''"), ("\u{201c}", "\u{201d}"), ("\u{2018}", "\u{2019}"), ("\"", "\""), ("'", "'")];

fn closes_item(rest: &str) -> bool {
    matches!(rest.trim_start().chars().next(), None | Some(',' | ')' | ']'))
}

fn lex(payload: &str) -> Vec<Lexeme> {
    let mut out = Vec::new();
    let mut rest = payload;
    while let Some(c) = rest.chars().next() {
        match c {
            '(' | '[' => {
                out.push(Lexeme::Open(c));
                rest = &rest[1..];
            }
            ')' | ']' => {
                out.push(Lexeme::Close(c));
                rest = &rest[1..];
            }
            ',' => {
                out.push(Lexeme::Comma);
                rest = &rest[1..];
            }
            c if c.is_whitespace() => rest = &rest[c.len_utf8()..],
            _ => {
                let quoted = QUOTE_PAIRS.iter().find_map(|(open, close)| {
                    let body = rest.strip_prefix(open)?;
                    // The closing quote must end the item, so apostrophes
                    // inside a word do not terminate it.
                    body.match_indices(close)
                        .find(|(ix, _)| closes_item(&body[ix + close.len()..]))
                        .map(|(ix, _)| (body[..ix].to_string(), &body[ix + close.len()..]))
                });
                match quoted {
                    Some((text, after)) => {
                        out.push(Lexeme::Text(text));
                        rest = after;
                    }
                    None => {
                        let end = rest.find([',', '(', ')', '[', ']']).unwrap_or(rest.len());
                        let end = end.max(c.len_utf8());
                        out.push(Lexeme::Text(rest[..end].trim().to_string()));
                        rest = &rest[end..];
                    }
                }
            }
        }
    }
    out
}

fn valid_tag_syntax(tag: &str) -> bool {
    tag == "O"
        || tag
            .strip_prefix("B-")
            .or_else(|| tag.strip_prefix("I-"))
            .is_some_and(|l| !l.is_empty() && !l.contains(char::is_whitespace))
}

/// Extracts `(word, tag)` pairs written with `(...)` or `[...]` and any of
/// the usual quote styles. Tags outside `labels` become `O` with a warning;
/// text with no tuple structure yields an empty list.
pub fn parse_tuples(payload: &str, labels: &LabelSpace) -> Vec<Tuple> {
    let lexemes = lex(payload);
    let mut out = Vec::new();
    let mut i = 0;
    while i + 4 < lexemes.len() {
        let window = &lexemes[i..i + 5];
        if let [Lexeme::Open(o), Lexeme::Text(word), Lexeme::Comma, Lexeme::Text(tag), Lexeme::Close(c)] = window {
            if (*o == '(' && *c == ')') || (*o == '[' && *c == ']') {
                let tag = tag.trim();
                let parsed = if valid_tag_syntax(tag) { labels.parse_tag(tag).ok() } else { None };
                let tag = parsed.unwrap_or_else(|| {
                    log::warn!("unknown tag {tag:?} for {word:?}; using O");
                    Tag::O
                });
                out.push(Tuple {
                    word: word.clone(),
                    tag,
                });
                i += 5;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn strip_quotes(s: &str) -> &str {
    s.trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}'))
}

/// Element equality for alignment: exact, or exact after trimming
/// surrounding quote characters from both sides.
pub fn words_match(token: &str, word: &str) -> bool {
    if token == word {
        return true;
    }
    let (t, w) = (strip_quotes(token), strip_quotes(word));
    !w.is_empty() && t == w
}

/// Index pairs `(token, tuple)` of a maximum common subsequence, taking
/// the earliest tokens possible.
pub fn lcs_pairs(tokens: &[String], words: &[&str]) -> Vec<(usize, usize)> {
    let (n, m) = (tokens.len(), words.len());
    // suffix[i][j] = LCS length of tokens[i..] and words[j..]
    let mut suffix = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i][j] = if words_match(&tokens[i], words[j]) {
                suffix[i + 1][j + 1] + 1
            } else {
                suffix[i + 1][j].max(suffix[i][j + 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(suffix[0][0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if words_match(&tokens[i], words[j]) && suffix[i][j] == suffix[i + 1][j + 1] + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if suffix[i][j + 1] == suffix[i][j] {
            j += 1;
        } else {
            i += 1;
        }
    }
    pairs
}

pub fn lcs_align(tokens: &[String], tuples: &[Tuple]) -> Result<AlignmentResult> {
    if tokens.is_empty() {
        return Err(Error::Shape("cannot align an empty token sequence".into()));
    }
    let n = tokens.len();
    if tuples.is_empty() {
        return Ok(AlignmentResult {
            bio: vec![Tag::O; n],
            matched: 0,
            status: AlignmentStatus::FallbackO,
        });
    }
    let words: Vec<&str> = tuples.iter().map(|t| t.word.as_str()).collect();
    let exact = n == words.len() && tokens.iter().zip(&words).all(|(t, w)| words_match(t, w));
    let pairs = lcs_pairs(tokens, &words);
    let mut bio = vec![Tag::O; n];
    for &(i, j) in &pairs {
        bio[i] = tuples[j].tag;
    }
    repair_bio(&mut bio);
    Ok(AlignmentResult {
        bio,
        matched: pairs.len(),
        status: if exact { AlignmentStatus::Exact } else { AlignmentStatus::LcsRepaired },
    })
}
