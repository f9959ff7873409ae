use std::collections::HashMap;
use std::io::BufRead;

use crate::corpus::{Dataset, Sentence};
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";

/// Token → row map for a trainable embedding table. Row 0 is the shared
/// unknown-token row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self {
            tokens: vec![UNK.to_string()],
            index: HashMap::from([(UNK.to_string(), 0)]),
        };
        for t in tokens {
            let t = t.as_ref();
            if !vocab.index.contains_key(t) {
                vocab.index.insert(t.to_string(), vocab.tokens.len());
                vocab.tokens.push(t.to_string());
            }
        }
        vocab
    }

    /// Vocabulary in first-appearance order over the given datasets.
    pub fn from_datasets(datasets: &[&Dataset]) -> Self {
        Self::from_tokens(
            datasets
                .iter()
                .flat_map(|d| d.sentences.iter())
                .flat_map(|s| s.tokens.iter()),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn row(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Precomputed per-token vectors keyed by sentence id. Never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenVectors {
    dim: usize,
    by_sentence: HashMap<usize, Vec<Vec<f64>>>,
}

impl FrozenVectors {
    pub fn new(dim: usize, by_sentence: HashMap<usize, Vec<Vec<f64>>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dimension must be positive".into()));
        }
        for (sid, rows) in &by_sentence {
            if rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Shape(format!("sentence {sid}: vector length differs from {dim}")));
            }
        }
        Ok(Self { dim, by_sentence })
    }

    /// Text format: `sentence_id token_index v1 ... vd` per line. Every
    /// sentence must list token indices `0..n` exactly once.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut dim = None;
        let mut raw: HashMap<usize, Vec<(usize, Vec<f64>)>> = HashMap::new();
        for (ix, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = ix + 1;
            let mut cols = line.split_whitespace();
            let Some(first) = cols.next() else { continue };
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let sid: usize = first.parse().map_err(|_| parse_err(format!("bad sentence id `{first}`")))?;
            let tix: usize = cols
                .next()
                .ok_or_else(|| parse_err("missing token index".into()))?
                .parse()
                .map_err(|_| parse_err("bad token index".into()))?;
            let values = cols
                .map(|c| c.parse::<f64>().map_err(|_| parse_err(format!("bad value `{c}`"))))
                .collect::<Result<Vec<f64>>>()?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(parse_err("non-finite value".into()));
            }
            match dim {
                None if values.is_empty() => return Err(parse_err("empty vector".into())),
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(parse_err(format!("expected {d} values, found {}", values.len())))
                }
                Some(_) => {}
            }
            raw.entry(sid).or_default().push((tix, values));
        }
        let dim = dim.ok_or_else(|| Error::Parse {
            line: 0,
            message: "no vectors".into(),
        })?;
        let mut by_sentence = HashMap::new();
        for (sid, mut rows) in raw {
            rows.sort_by_key(|(t, _)| *t);
            if rows.iter().enumerate().any(|(k, (t, _))| k != *t) {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("sentence {sid}: token indices are not 0..n"),
                });
            }
            by_sentence.insert(sid, rows.into_iter().map(|(_, v)| v).collect());
        }
        Self::new(dim, by_sentence)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sentence(&self, sentence: &Sentence) -> Result<&[Vec<f64>]> {
        let rows = self
            .by_sentence
            .get(&sentence.id)
            .ok_or_else(|| Error::Shape(format!("no vectors for sentence {}", sentence.id)))?;
        if rows.len() != sentence.len() {
            return Err(Error::LengthMismatch {
                sentence: sentence.id,
                left: sentence.len(),
                right: rows.len(),
            });
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingProvider {
    /// Learned lookup table; its matrix lives in the classifier parameters.
    TrainableTable(Vocab),
    FileBacked(FrozenVectors),
}

/// Average of raw vectors over `[i - w, i + w]` clipped to the sentence.
pub fn context_pool(raw: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let n = raw.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(n - 1);
            let mut h = vec![0.0; raw[i].len()];
            for row in &raw[lo..=hi] {
                for (a, b) in h.iter_mut().zip(row) {
                    *a += b;
                }
            }
            let inv = 1.0 / (hi - lo + 1) as f64;
            h.iter_mut().for_each(|x| *x *= inv);
            h
        })
        .collect()
}
