//! Noise transition matrices between observed and true labels, their
//! three-area decomposition, and synthetic corruption of clean corpora.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::corpus::{bio_to_spans, spans_to_bio, ClassId, Dataset, LabelSpace, LabeledSpan, Sentence};
use crate::error::{Error, Result};
use crate::rng::{self, SeedStreams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Token,
    Span,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(Self::Token),
            "span" => Ok(Self::Span),
            other => Err(Error::Config(format!("unknown granularity `{other}`"))),
        }
    }
}

/// Counts indexed `[observed][true]` over `L ∪ {O}` (`O` at index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTransitionMatrix {
    pub labels: LabelSpace,
    pub counts: Vec<Vec<u64>>,
    pub row_probs: Vec<Vec<f64>>,
    /// Observed-label rows without any unit.
    pub zero_rows: Vec<bool>,
}

impl NoiseTransitionMatrix {
    pub fn from_counts(labels: LabelSpace, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.num_classes();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape(format!("transition counts must be {k}x{k}")));
        }
        let mut row_probs = vec![vec![0.0; k]; k];
        let mut zero_rows = vec![false; k];
        for (i, row) in counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                zero_rows[i] = true;
                continue;
            }
            for (j, &c) in row.iter().enumerate() {
                row_probs[i][j] = c as f64 / total as f64;
            }
        }
        Ok(Self {
            labels,
            counts,
            row_probs,
            zero_rows,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn count(&self, observed: ClassId, truth: ClassId) -> u64 {
        self.counts[observed.0][truth.0]
    }
}

/// Observed-vs-gold tally at token or span granularity.
///
/// Span granularity matches spans by identical boundaries: a gold span takes
/// the type of the observed span with the same boundaries (else `O`), and an
/// observed span with no boundary-identical gold span counts as `(type, O)`.
pub fn transition_matrix(dataset: &Dataset, granularity: Granularity) -> Result<NoiseTransitionMatrix> {
    let k = dataset.labels.num_classes();
    let mut counts = vec![vec![0u64; k]; k];
    for s in &dataset.sentences {
        let gold = s.gold.as_ref().ok_or(Error::MissingGold(s.id))?;
        match granularity {
            Granularity::Token => {
                for (o, g) in s.observed.iter().zip(gold) {
                    counts[o.class().0][g.class().0] += 1;
                }
            }
            Granularity::Span => {
                let observed = s.observed_spans();
                let gold_spans = bio_to_spans(gold);
                for g in &gold_spans {
                    let obs = observed
                        .iter()
                        .find(|o| o.bounds() == g.bounds())
                        .map_or(ClassId::O, |o| o.label);
                    counts[obs.0][g.label.0] += 1;
                }
                for o in &observed {
                    if !gold_spans.iter().any(|g| g.bounds() == o.bounds()) {
                        counts[o.label.0][ClassId::O.0] += 1;
                    }
                }
            }
        }
    }
    NoiseTransitionMatrix::from_counts(dataset.labels.clone(), counts)
}

/// Disjoint regions of a transition matrix, as counts and as fractions of
/// the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseAreas {
    pub correct: u64,
    pub uep: u64,
    pub nep: u64,
    pub total: u64,
    pub correct_mass: f64,
    pub uep_mass: f64,
    pub nep_mass: f64,
}

/// Correct: `y* = ỹ`. Unlabeled-entity area: `ỹ = O, y* ∈ L`. Noisy-entity
/// area: `ỹ ≠ O, y* ≠ ỹ`.
pub fn decompose_areas(m: &NoiseTransitionMatrix) -> NoiseAreas {
    let (mut correct, mut uep, mut nep) = (0, 0, 0);
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if i == j {
                correct += c;
            } else if i == ClassId::O.0 {
                uep += c;
            } else {
                nep += c;
            }
        }
    }
    let total = correct + uep + nep;
    let frac = |x: u64| if total == 0 { 0.0 } else { x as f64 / total as f64 };
    NoiseAreas {
        correct,
        uep,
        nep,
        total,
        correct_mass: frac(correct),
        uep_mass: frac(uep),
        nep_mass: frac(nep),
    }
}

/// Row-normalized percentages. Header holds true labels; the leading column
/// holds observed labels; `zero_row` flags rows without any unit.
pub fn export_matrix_csv(m: &NoiseTransitionMatrix) -> String {
    let mut out = String::from("observed\\true");
    for c in m.labels.classes() {
        let _ = write!(out, ",{}", m.labels.name(c));
    }
    out.push_str(",zero_row\n");
    for i in m.labels.classes() {
        out.push_str(m.labels.name(i));
        for p in &m.row_probs[i.0] {
            let _ = write!(out, ",{:.2}", p * 100.0);
        }
        let _ = writeln!(out, ",{}", u8::from(m.zero_rows[i.0]));
    }
    out
}

fn clean_reference(s: &Sentence) -> &[crate::corpus::Tag] {
    s.gold.as_deref().unwrap_or(&s.observed)
}

/// Whole-span masking: every reference entity is independently erased from
/// the observed column with probability `mask_prob`. The reference column is
/// the gold column when present, else the (assumed clean) observed column;
/// it becomes the output's gold column.
pub fn mask_entities(dataset: &Dataset, mask_prob: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&mask_prob) {
        return Err(Error::InvalidProbability {
            name: "mask_prob",
            value: mask_prob,
        });
    }
    let streams = SeedStreams::new(seed);
    let sentences = dataset
        .sentences
        .iter()
        .map(|s| {
            let gold = clean_reference(s).to_vec();
            let mut rng = streams.rng(rng::MASK, &[s.id as u64]);
            let kept: Vec<LabeledSpan> = bio_to_spans(&gold)
                .into_iter()
                .filter(|_| !rng.gen_bool(mask_prob))
                .collect();
            Ok(Sentence {
                id: s.id,
                tokens: s.tokens.clone(),
                observed: spans_to_bio(&kept, s.len())?,
                gold: Some(gold),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        sentences,
        labels: dataset.labels.clone(),
    })
}

/// Synthetic noisy-entity corruptor: each observed entity keeps its
/// boundaries but, with probability `flip_prob`, takes a uniformly drawn
/// different entity label. Gold is set from the clean reference as in
/// [`mask_entities`].
pub fn corrupt_labels(dataset: &Dataset, flip_prob: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(Error::InvalidProbability {
            name: "flip_prob",
            value: flip_prob,
        });
    }
    let k = dataset.labels.num_entity_labels();
    if k < 2 && flip_prob > 0.0 {
        return Err(Error::Config("label flipping needs at least two entity labels".into()));
    }
    let streams = SeedStreams::new(seed);
    let sentences = dataset
        .sentences
        .iter()
        .map(|s| {
            let gold = clean_reference(s).to_vec();
            let mut rng = streams.rng(rng::CORRUPT, &[s.id as u64]);
            let flipped: Vec<LabeledSpan> = bio_to_spans(&gold)
                .into_iter()
                .map(|mut span| {
                    if rng.gen_bool(flip_prob) {
                        // Draw among the k-1 other labels.
                        let mut c = rng.gen_range(1..k);
                        if c >= span.label.0 {
                            c += 1;
                        }
                        span.label = ClassId(c);
                    }
                    span
                })
                .collect();
            Ok(Sentence {
                id: s.id,
                tokens: s.tokens.clone(),
                observed: spans_to_bio(&flipped, s.len())?,
                gold: Some(gold),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        sentences,
        labels: dataset.labels.clone(),
    })
}
