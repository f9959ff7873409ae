use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{is_valid_continuation, split_tag, Dataset, LabelSpace, RawTag, Sentence, Tag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct ConllOptions {
    /// Expect a third column holding gold tags.
    pub has_gold_column: bool,
    /// Promote orphan `I-X` tags to `B-X` instead of failing.
    pub repair: bool,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub dataset: Dataset,
    /// Number of tags rewritten by BIO repair, over both columns.
    pub repairs: usize,
}

struct RawSentence<'a> {
    first_line: usize,
    tokens: Vec<&'a str>,
    observed: Vec<&'a str>,
    gold: Vec<&'a str>,
}

/// Parse CoNLL columns, taking the label space from the file's own tags.
pub fn parse_conll(text: &str, options: ConllOptions) -> Result<ParseOutcome> {
    parse_conll_with_labels(text, options, None)
}

/// Parse CoNLL columns against a fixed label space, or against the sorted set
/// of labels found in the file when `labels` is `None`.
pub fn parse_conll_with_labels(
    text: &str,
    options: ConllOptions,
    labels: Option<&LabelSpace>,
) -> Result<ParseOutcome> {
    let expected = if options.has_gold_column { 3 } else { 2 };
    let mut raw: Vec<RawSentence<'_>> = Vec::new();
    let mut current: Option<RawSentence<'_>> = None;
    for (ix, line) in text.lines().enumerate() {
        let line_no = ix + 1;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            if let Some(s) = current.take() {
                raw.push(s);
            }
            continue;
        }
        if cols.len() != expected {
            return Err(Error::RaggedColumns {
                line: line_no,
                expected,
                found: cols.len(),
            });
        }
        let s = current.get_or_insert_with(|| RawSentence {
            first_line: line_no,
            tokens: Vec::new(),
            observed: Vec::new(),
            gold: Vec::new(),
        });
        s.tokens.push(cols[0]);
        s.observed.push(cols[1]);
        if options.has_gold_column {
            s.gold.push(cols[2]);
        }
    }
    if let Some(s) = current.take() {
        raw.push(s);
    }

    let discovered;
    let labels = match labels {
        Some(l) => l,
        None => {
            let mut names = BTreeSet::new();
            for s in &raw {
                for (k, tag) in s.observed.iter().chain(&s.gold).enumerate() {
                    match split_tag(tag) {
                        Some(RawTag::B(n)) | Some(RawTag::I(n)) => {
                            names.insert(n);
                        }
                        Some(RawTag::O) => {}
                        None => {
                            return Err(Error::Parse {
                                line: s.first_line + k % s.tokens.len(),
                                message: format!("malformed tag `{tag}`"),
                            })
                        }
                    }
                }
            }
            discovered = LabelSpace::new(names.into_iter().map(str::to_string))?;
            &discovered
        }
    };

    let mut repairs = 0;
    let mut sentences = Vec::with_capacity(raw.len());
    for (id, s) in raw.iter().enumerate() {
        let observed = convert_column(&s.observed, s.first_line, labels, options.repair, &mut repairs)?;
        let gold = if options.has_gold_column {
            Some(convert_column(&s.gold, s.first_line, labels, options.repair, &mut repairs)?)
        } else {
            None
        };
        sentences.push(Sentence {
            id,
            tokens: s.tokens.iter().map(|t| t.to_string()).collect(),
            observed,
            gold,
        });
    }
    if repairs > 0 {
        log::info!("repaired {repairs} orphan I- tags");
    }
    Ok(ParseOutcome {
        dataset: Dataset::new(sentences, labels.clone())?,
        repairs,
    })
}

fn convert_column(
    column: &[&str],
    first_line: usize,
    labels: &LabelSpace,
    repair: bool,
    repairs: &mut usize,
) -> Result<Vec<Tag>> {
    let mut tags: Vec<Tag> = Vec::with_capacity(column.len());
    for (i, text) in column.iter().enumerate() {
        let line = first_line + i;
        let mut tag = labels.parse_tag(text).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !is_valid_continuation(tags.last().copied(), tag) {
            if !repair {
                return Err(Error::Parse {
                    line,
                    message: format!("orphan `{text}` tag"),
                });
            }
            tag = Tag::B(tag.class());
            *repairs += 1;
        }
        tags.push(tag);
    }
    Ok(tags)
}

/// Serialize in the column format read by [`parse_conll`]: single-space
/// separated columns, one blank line between sentences. The gold column is
/// written only when every sentence carries one and `with_gold` is set.
pub fn write_conll(dataset: &Dataset, with_gold: bool) -> String {
    let with_gold = with_gold && dataset.has_gold();
    let mut out = String::new();
    for (k, s) in dataset.sentences.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for i in 0..s.len() {
            let _ = write!(out, "{} {}", s.tokens[i], dataset.labels.format_tag(s.observed[i]));
            if with_gold {
                if let Some(gold) = &s.gold {
                    let _ = write!(out, " {}", dataset.labels.format_tag(gold[i]));
                }
            }
            out.push('\n');
        }
    }
    out
}
