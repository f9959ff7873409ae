//! Entity-level P/R/F1, false-negative diagnostics and the noisy-positive
//! threshold search.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::{bio_to_spans, ClassId, Dataset, LabeledSpan, Tag};
use crate::error::{Error, Result};
use crate::selection::{PositiveScore, PredictionTable};

/// Precision/recall/F1 with raw counts. A zero denominator yields 0 and
/// clears the matching `*_defined` flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            precision_defined: tp + fp > 0,
            recall_defined: tp + fn_ > 0,
        }
    }
}

/// Micro-averaged exact-match (boundaries and type) entity F1.
pub fn entity_f1(pred: &[Vec<Tag>], gold: &[Vec<Tag>]) -> Result<Prf> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            sentence: usize::MAX,
            left: pred.len(),
            right: gold.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (k, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::LengthMismatch {
                sentence: k,
                left: p.len(),
                right: g.len(),
            });
        }
        let ps: BTreeSet<LabeledSpan> = bio_to_spans(p).into_iter().collect();
        let gs: BTreeSet<LabeledSpan> = bio_to_spans(g).into_iter().collect();
        let hit = ps.intersection(&gs).count();
        tp += hit;
        fp += ps.len() - hit;
        fn_ += gs.len() - hit;
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

/// Score a dataset's observed column against its gold column.
pub fn observed_vs_gold(dataset: &Dataset) -> Result<Prf> {
    let gold = dataset
        .sentences
        .iter()
        .map(|s| s.gold.clone().ok_or(Error::MissingGold(s.id)))
        .collect::<Result<Vec<_>>>()?;
    let observed: Vec<Vec<Tag>> = dataset.sentences.iter().map(|s| s.observed.clone()).collect();
    entity_f1(&observed, &gold)
}

/// How well predictions single out false negatives among the negatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FnReport {
    /// Absent when there are no false negatives.
    pub fn_recall: Option<f64>,
    /// Absent when no negative is predicted as an entity.
    pub fn_precision: Option<f64>,
    /// False negatives predicted as entities (shared numerator).
    pub flagged_false_negatives: usize,
    pub false_negatives: usize,
    /// Negatives predicted as entities.
    pub flagged_negatives: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FnTally {
    flagged_fal: usize,
    fal: usize,
    flagged_neg: usize,
}

impl FnTally {
    /// `false_negatives` must be a subset of `negatives`.
    pub fn add(
        &mut self,
        sentence_id: usize,
        negatives: &[LabeledSpan],
        false_negatives: &[LabeledSpan],
        predictions: &PredictionTable,
    ) -> Result<()> {
        let fal: BTreeSet<(usize, usize)> = false_negatives.iter().map(LabeledSpan::bounds).collect();
        for neg in negatives {
            let p = predictions.get(neg.start, neg.end).ok_or(Error::MissingPrediction {
                sentence: sentence_id,
                start: neg.start,
                end: neg.end,
            })?;
            let flagged = p.argmax() != ClassId::O;
            let is_fal = fal.contains(&neg.bounds());
            self.flagged_neg += usize::from(flagged);
            self.fal += usize::from(is_fal);
            self.flagged_fal += usize::from(flagged && is_fal);
        }
        Ok(())
    }

    pub fn report(&self) -> FnReport {
        let ratio = |den: usize| (den > 0).then(|| self.flagged_fal as f64 / den as f64);
        FnReport {
            fn_recall: ratio(self.fal),
            fn_precision: ratio(self.flagged_neg),
            flagged_false_negatives: self.flagged_fal,
            false_negatives: self.fal,
            flagged_negatives: self.flagged_neg,
        }
    }
}

/// One sentence's inputs to [`fn_metrics`].
pub struct FnInput<'a> {
    pub sentence_id: usize,
    pub negatives: &'a [LabeledSpan],
    pub false_negatives: &'a [LabeledSpan],
    pub predictions: &'a PredictionTable,
}

pub fn fn_metrics(inputs: &[FnInput<'_>]) -> Result<FnReport> {
    let mut tally = FnTally::default();
    for i in inputs {
        tally.add(i.sentence_id, i.negatives, i.false_negatives, i.predictions)?;
    }
    Ok(tally.report())
}

/// An observed positive for the threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyCandidate {
    pub label: ClassId,
    pub confidence: f64,
    /// Observed label differs from the gold label of the same span.
    pub noisy: bool,
}

/// Mark each scored positive noisy unless a gold span with identical
/// boundaries carries the same label.
pub fn noisy_candidates(dataset: &Dataset, scores: &[PositiveScore]) -> Result<Vec<NoisyCandidate>> {
    let mut gold_by_sentence = std::collections::HashMap::new();
    for s in &dataset.sentences {
        gold_by_sentence.insert(s.id, s.gold_spans()?);
    }
    scores
        .iter()
        .map(|s| {
            let gold = gold_by_sentence
                .get(&s.sentence_id)
                .ok_or_else(|| Error::Config(format!("unknown sentence {}", s.sentence_id)))?;
            Ok(NoisyCandidate {
                label: s.span.label,
                confidence: s.confidence,
                noisy: !gold.contains(&s.span),
            })
        })
        .collect()
}

pub const TAU_STEP: f64 = 0.001;
const TAU_GRID: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSearchResult {
    pub tau: f64,
    pub ne_recall: f64,
    pub ne_precision: f64,
    pub f1: f64,
    pub step: f64,
}

/// Grid search over `τ ∈ {0, 0.001, …, 1}`: flag positives with confidence
/// below `τ`, score the flags against the noisy set by harmonic mean of
/// recall and precision, and return the best `τ` (smallest on ties).
pub fn optimal_tau(candidates: &[NoisyCandidate]) -> Result<ThresholdSearchResult> {
    let noisy_total = candidates.iter().filter(|c| c.noisy).count();
    if noisy_total == 0 {
        return Err(Error::NoNoisyPositives);
    }
    let mut sorted: Vec<(f64, bool)> = candidates.iter().map(|c| (c.confidence, c.noisy)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<ThresholdSearchResult> = None;
    let (mut cursor, mut flagged, mut flagged_noisy) = (0, 0usize, 0usize);
    for k in 0..=TAU_GRID {
        let tau = f64::from(k) / f64::from(TAU_GRID);
        while cursor < sorted.len() && sorted[cursor].0 < tau {
            flagged += 1;
            flagged_noisy += usize::from(sorted[cursor].1);
            cursor += 1;
        }
        let recall = flagged_noisy as f64 / noisy_total as f64;
        let precision = if flagged == 0 {
            0.0
        } else {
            flagged_noisy as f64 / flagged as f64
        };
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        if best.is_none_or(|b| f1 > b.f1) {
            best = Some(ThresholdSearchResult {
                tau,
                ne_recall: recall,
                ne_precision: precision,
                f1,
                step: TAU_STEP,
            });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span_model::SpanPrediction;

    const PER: ClassId = ClassId(1);
    const LOC: ClassId = ClassId(2);

    #[test]
    fn perfect_and_empty_predictions() {
        let gold = vec![vec![Tag::B(PER), Tag::I(PER), Tag::O], vec![Tag::B(LOC)]];
        let p = entity_f1(&gold, &gold).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let none = vec![vec![Tag::O; 3], vec![Tag::O]];
        let p = entity_f1(&none, &gold).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        assert!(!p.precision_defined);
        assert!(p.recall_defined);
    }

    #[test]
    fn hand_counted_fixture() {
        // 3 TP, 1 FP, 2 FN over five sentences.
        let gold = vec![
            vec![Tag::B(PER), Tag::O],
            vec![Tag::B(LOC), Tag::I(LOC)],
            vec![Tag::O, Tag::B(PER)],
            vec![Tag::B(PER), Tag::O, Tag::B(LOC)],
            vec![Tag::O, Tag::O],
        ];
        let pred = vec![
            vec![Tag::B(PER), Tag::O],
            vec![Tag::B(LOC), Tag::O],
            vec![Tag::O, Tag::B(PER)],
            vec![Tag::B(PER), Tag::O, Tag::O],
            vec![Tag::O, Tag::O],
        ];
        // Sentence 1: predicted (0,0,LOC) is an FP and gold (0,1,LOC) an FN.
        let p = entity_f1(&pred, &gold).unwrap();
        assert_eq!((p.tp, p.fp, p.fn_), (3, 1, 2));
        assert!((p.precision - 0.75).abs() < 1e-15);
        assert!((p.recall - 0.6).abs() < 1e-15);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn swapping_roles_swaps_p_and_r() {
        let a = vec![vec![Tag::B(PER), Tag::O, Tag::B(LOC)]];
        let b = vec![vec![Tag::B(PER), Tag::I(PER), Tag::B(LOC)]];
        let x = entity_f1(&a, &b).unwrap();
        let y = entity_f1(&b, &a).unwrap();
        assert_eq!((x.precision, x.recall), (y.recall, y.precision));
    }

    #[test]
    fn length_mismatch() {
        assert!(entity_f1(&[vec![Tag::O]], &[vec![Tag::O, Tag::O]]).is_err());
        assert!(entity_f1(&[vec![Tag::O]], &[]).is_err());
    }

    fn table(spans: &[(usize, usize, bool)]) -> PredictionTable {
        PredictionTable::new(
            spans
                .iter()
                .map(|&(s, e, entity)| SpanPrediction {
                    start: s,
                    end: e,
                    probs: if entity { vec![0.1, 0.9] } else { vec![0.9, 0.1] },
                })
                .collect(),
        )
    }

    #[test]
    fn fn_metric_extremes() {
        let neg: Vec<LabeledSpan> = (0..4).map(|i| LabeledSpan::new(i, i, ClassId::O)).collect();
        let fal = vec![neg[1], neg[3]];
        let exact = table(&[(0, 0, false), (1, 1, true), (2, 2, false), (3, 3, true)]);
        let r = fn_metrics(&[FnInput {
            sentence_id: 0,
            negatives: &neg,
            false_negatives: &fal,
            predictions: &exact,
        }])
        .unwrap();
        assert_eq!((r.fn_recall, r.fn_precision), (Some(1.0), Some(1.0)));

        let all_o = table(&[(0, 0, false), (1, 1, false), (2, 2, false), (3, 3, false)]);
        let r = fn_metrics(&[FnInput {
            sentence_id: 0,
            negatives: &neg,
            false_negatives: &fal,
            predictions: &all_o,
        }])
        .unwrap();
        assert_eq!((r.fn_recall, r.fn_precision), (Some(0.0), None));

        let r = fn_metrics(&[FnInput {
            sentence_id: 0,
            negatives: &neg,
            false_negatives: &[],
            predictions: &exact,
        }])
        .unwrap();
        assert_eq!(r.fn_recall, None);
        assert_eq!(r.fn_precision, Some(0.0));
    }

    #[test]
    fn separable_tau() {
        let mut c: Vec<NoisyCandidate> = (0..5)
            .map(|_| NoisyCandidate {
                label: PER,
                confidence: 0.2,
                noisy: true,
            })
            .collect();
        c.extend((0..5).map(|_| NoisyCandidate {
            label: PER,
            confidence: 0.9,
            noisy: false,
        }));
        let r = optimal_tau(&c).unwrap();
        assert_eq!(r.tau, 0.201);
        assert_eq!((r.ne_recall, r.ne_precision, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.step, 0.001);
    }

    #[test]
    fn tau_needs_noisy_positives() {
        let c = [NoisyCandidate {
            label: PER,
            confidence: 0.5,
            noisy: false,
        }];
        assert!(matches!(optimal_tau(&c), Err(Error::NoNoisyPositives)));
    }
}
