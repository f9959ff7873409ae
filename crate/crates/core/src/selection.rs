//! Span selection: negative enumeration, the cross-entity / between-entity
//! split, uniform negative sampling, confident negatives and positives, and
//! the confident-joint rank-and-prune strategies.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, LabeledSpan, Sentence};
use crate::error::{Error, Result};
use crate::rng::{self, SeedStreams};
use crate::span_model::SpanPrediction;

/// Identifies a span within a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanKey {
    pub sentence_id: usize,
    pub start: usize,
    pub end: usize,
}

impl SpanKey {
    pub fn new(sentence_id: usize, span: &LabeledSpan) -> Self {
        Self {
            sentence_id,
            start: span.start,
            end: span.end,
        }
    }
}

/// Every span of length ≤ `max_len` whose boundaries are not those of a span
/// in `exclude`, labeled `O`, ordered by `(start, end)`.
pub fn enumerate_negatives(sentence: &Sentence, exclude: &[LabeledSpan], max_len: usize) -> Vec<LabeledSpan> {
    let n = sentence.len();
    let excluded: BTreeSet<(usize, usize)> = exclude.iter().map(LabeledSpan::bounds).collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n.min(i.saturating_add(max_len)) {
            if !excluded.contains(&(i, j)) {
                out.push(LabeledSpan::new(i, j, ClassId::O));
            }
        }
    }
    out
}

/// Split negatives into those intersecting some positive (cross-entity,
/// `N_ce`) and the rest (between-entity, `N_be`).
pub fn partition_cen_ben(negatives: &[LabeledSpan], positives: &[LabeledSpan]) -> (Vec<LabeledSpan>, Vec<LabeledSpan>) {
    negatives
        .iter()
        .partition(|neg| positives.iter().any(|p| p.overlaps(neg)))
}

/// Negatives whose gold label is an entity: boundaries equal to a gold span.
pub fn false_negative_set(sentence: &Sentence, negatives: &[LabeledSpan]) -> Result<Vec<LabeledSpan>> {
    let gold: BTreeSet<(usize, usize)> = sentence.gold_spans()?.iter().map(LabeledSpan::bounds).collect();
    Ok(negatives
        .iter()
        .filter(|s| gold.contains(&s.bounds()))
        .copied()
        .collect())
}

/// `⌈λ·n⌉`. A 1e-9 slack keeps products such as `0.3 · 10` from rounding up
/// to the next integer.
pub fn negative_budget(lambda: f64, n: usize) -> usize {
    ((lambda * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Uniform sample without replacement, deterministic per
/// `(seed, sentence id, epoch)`. Asking for more than the pool returns the
/// whole pool.
pub fn sample_uniform(
    pool: &[LabeledSpan],
    count: usize,
    streams: &SeedStreams,
    sentence_id: usize,
    epoch: usize,
) -> Vec<LabeledSpan> {
    if count >= pool.len() {
        if count > pool.len() {
            log::debug!(
                "sentence {sentence_id}: budget {count} exceeds pool of {}, taking all",
                pool.len()
            );
        }
        return pool.to_vec();
    }
    let mut rng = streams.rng(rng::SAMPLE, &[sentence_id as u64, epoch as u64]);
    sample_with(pool, count, &mut rng)
}

/// Uniform sample without replacement from an explicit generator.
pub fn sample_with<R: Rng + ?Sized>(pool: &[LabeledSpan], count: usize, rng: &mut R) -> Vec<LabeledSpan> {
    if count >= pool.len() {
        return pool.to_vec();
    }
    index::sample(rng, pool.len(), count)
        .into_iter()
        .map(|k| pool[k])
        .collect()
}

/// Lookup of a sentence's span predictions by boundaries.
#[derive(Debug, Clone, Default)]
pub struct PredictionTable {
    by_span: HashMap<(usize, usize), SpanPrediction>,
}

impl PredictionTable {
    pub fn new(predictions: Vec<SpanPrediction>) -> Self {
        Self {
            by_span: predictions.into_iter().map(|p| ((p.start, p.end), p)).collect(),
        }
    }

    pub fn get(&self, start: usize, end: usize) -> Option<&SpanPrediction> {
        self.by_span.get(&(start, end))
    }

    fn require(&self, sentence_id: usize, span: &LabeledSpan) -> Result<&SpanPrediction> {
        self.get(span.start, span.end).ok_or(Error::MissingPrediction {
            sentence: sentence_id,
            start: span.start,
            end: span.end,
        })
    }

    pub fn len(&self) -> usize {
        self.by_span.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_span.is_empty()
    }
}

/// `N̂`: negatives whose predicted label is also `O`.
pub fn confident_negatives(sentence_id: usize, negatives: &[LabeledSpan], predictions: &PredictionTable) -> Result<Vec<LabeledSpan>> {
    let mut out = Vec::new();
    for neg in negatives {
        if predictions.require(sentence_id, neg)?.argmax() == ClassId::O {
            out.push(*neg);
        }
    }
    Ok(out)
}

/// An observed positive with the model's probability for its observed label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveScore {
    pub sentence_id: usize,
    pub span: LabeledSpan,
    pub confidence: f64,
}

impl PositiveScore {
    pub fn from_prediction(sentence_id: usize, span: LabeledSpan, prediction: &SpanPrediction) -> Self {
        Self {
            sentence_id,
            span,
            confidence: prediction.prob(span.label),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelThreshold {
    pub mean: f64,
    pub support: usize,
}

/// Per-label mean confidence `t_l`. Labels without observed spans are absent.
pub type Thresholds = BTreeMap<ClassId, LabelThreshold>;

pub fn npe_thresholds(scores: &[PositiveScore]) -> Thresholds {
    let mut acc: BTreeMap<ClassId, (f64, usize)> = BTreeMap::new();
    for s in scores {
        let e = acc.entry(s.span.label).or_insert((0.0, 0));
        e.0 += s.confidence;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(label, (sum, support))| {
            (
                label,
                LabelThreshold {
                    mean: sum / support as f64,
                    support,
                },
            )
        })
        .collect()
}

/// `P̂`: keep a positive iff its confidence is strictly greater than its
/// label's threshold. Labels with fewer than `min_support` observed spans,
/// or without a threshold, are kept whole.
pub fn confident_positives(scores: &[PositiveScore], thresholds: &Thresholds, min_support: usize) -> Vec<PositiveScore> {
    scores
        .iter()
        .filter(|s| match thresholds.get(&s.span.label) {
            Some(t) if t.support >= min_support => s.confidence > t.mean,
            _ => true,
        })
        .copied()
        .collect()
}

/// Per-sentence view of every selection set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSets {
    pub positives: Vec<LabeledSpan>,
    pub negatives: Vec<LabeledSpan>,
    pub cross_entity: Vec<LabeledSpan>,
    pub between_entity: Vec<LabeledSpan>,
    /// Present only when the sentence has gold labels.
    pub false_negatives: Option<Vec<LabeledSpan>>,
    pub confident_positives: Option<Vec<LabeledSpan>>,
    pub confident_negatives: Option<Vec<LabeledSpan>>,
}

impl SelectionSets {
    pub fn build(sentence: &Sentence, max_len: usize) -> Self {
        Self::build_excluding(sentence, max_len, &[])
    }

    /// As [`SelectionSets::build`], but spans in `excluded` are dropped from
    /// the positives and never enumerated as negatives.
    pub fn build_excluding(sentence: &Sentence, max_len: usize, excluded: &[(usize, usize)]) -> Self {
        let observed = sentence.observed_spans();
        let negatives: Vec<LabeledSpan> = enumerate_negatives(sentence, &observed, max_len)
            .into_iter()
            .filter(|s| !excluded.contains(&s.bounds()))
            .collect();
        let positives: Vec<LabeledSpan> = observed
            .into_iter()
            .filter(|s| !excluded.contains(&s.bounds()))
            .collect();
        let (cross_entity, between_entity) = partition_cen_ben(&negatives, &positives);
        let false_negatives = sentence
            .gold
            .is_some()
            .then(|| false_negative_set(sentence, &negatives).expect("gold present"));
        Self {
            positives,
            negatives,
            cross_entity,
            between_entity,
            false_negatives,
            confident_positives: None,
            confident_negatives: None,
        }
    }
}

/// How confident-joint counting treats an example above several thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointCounting {
    /// Count the example in every qualifying cell.
    #[default]
    Literal,
    /// Count only in the most probable qualifying cell.
    Argmax,
}

/// An example for confident learning: observed label and full distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub key: SpanKey,
    pub observed: ClassId,
    pub probs: Vec<f64>,
}

/// Counts `C[i][j]`, calibrated joint `Q̂[i][j]` and thresholds over
/// `classes` (positions, not class ids, index the matrices).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidentJoint {
    pub classes: Vec<ClassId>,
    pub counts: Vec<Vec<u64>>,
    pub joint: Vec<Vec<f64>>,
    /// `t_j`, absent for classes with no example observed as `j`.
    pub thresholds: Vec<Option<f64>>,
    /// `|X_{ỹ=i}|`
    pub observed_sizes: Vec<usize>,
}

impl ConfidentJoint {
    pub fn position(&self, class: ClassId) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }
}

/// Threshold each class at its mean self-confidence, count example `x`
/// observed as `i` into `C[i][j]` whenever `p(j; x) ≥ t_j`, then row-normalize,
/// rescale rows by `|X_{ỹ=i}|` and normalize globally.
pub fn confident_joint(examples: &[LabeledExample], classes: &[ClassId], counting: JointCounting) -> Result<ConfidentJoint> {
    let k = classes.len();
    let pos = |c: ClassId| classes.iter().position(|&x| x == c);
    let mut sums = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    for ex in examples {
        let i = pos(ex.observed).ok_or_else(|| Error::UnknownLabel(format!("class {}", ex.observed.0)))?;
        if classes.iter().any(|c| c.0 >= ex.probs.len()) {
            return Err(Error::Shape("probability row shorter than class list".into()));
        }
        sums[i] += ex.probs[ex.observed.0];
        sizes[i] += 1;
    }
    let thresholds: Vec<Option<f64>> = (0..k)
        .map(|i| (sizes[i] > 0).then(|| sums[i] / sizes[i] as f64))
        .collect();

    let mut counts = vec![vec![0u64; k]; k];
    for ex in examples {
        let i = pos(ex.observed).expect("checked above");
        let qualifying = (0..k).filter(|&j| thresholds[j].is_some_and(|t| ex.probs[classes[j].0] >= t));
        match counting {
            JointCounting::Literal => {
                for j in qualifying {
                    counts[i][j] += 1;
                }
            }
            JointCounting::Argmax => {
                let best = qualifying.fold(None::<usize>, |best, j| match best {
                    Some(b) if ex.probs[classes[b].0] >= ex.probs[classes[j].0] => Some(b),
                    _ => Some(j),
                });
                if let Some(j) = best {
                    counts[i][j] += 1;
                }
            }
        }
    }

    let mut joint = vec![vec![0.0; k]; k];
    for i in 0..k {
        let row: u64 = counts[i].iter().sum();
        if row == 0 {
            continue;
        }
        for j in 0..k {
            joint[i][j] = counts[i][j] as f64 / row as f64 * sizes[i] as f64;
        }
    }
    let total: f64 = joint.iter().flatten().sum();
    if total > 0.0 {
        joint.iter_mut().flatten().for_each(|q| *q /= total);
    }
    Ok(ConfidentJoint {
        classes: classes.to_vec(),
        counts,
        joint,
        thresholds,
        observed_sizes: sizes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneStrategy {
    /// Rank by class: lowest self-confidence per observed label.
    Rbc,
    /// Rank by noise rate: largest off-label margin per joint cell.
    Rbnr,
    /// Prune only what both strategies prune.
    Both,
}

impl std::str::FromStr for PruneStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbc" => Ok(Self::Rbc),
            "rbnr" => Ok(Self::Rbnr),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown prune strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneLevel {
    Span,
    Sentence,
}

impl std::str::FromStr for PruneLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "span" => Ok(Self::Span),
            "sentence" => Ok(Self::Sentence),
            other => Err(Error::Config(format!("unknown prune level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneDecision {
    pub strategy: PruneStrategy,
    pub level: PruneLevel,
    /// Spans chosen for removal (both levels report them).
    pub removed_spans: BTreeSet<SpanKey>,
    /// Sentences dropped; empty at span level.
    pub removed_sentences: BTreeSet<usize>,
}

impl PruneDecision {
    pub fn empty(strategy: PruneStrategy, level: PruneLevel) -> Self {
        Self {
            strategy,
            level,
            removed_spans: BTreeSet::new(),
            removed_sentences: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.removed_spans.is_empty() && self.removed_sentences.is_empty()
    }
}

/// `⌊n·mass⌋`, with a 1e-9 slack so that exact products are not floored
/// one below by rounding.
pub fn prune_budget(n: usize, mass: f64) -> usize {
    (n as f64 * mass + 1e-9).floor().max(0.0) as usize
}

fn take_budget(mut ranked: Vec<&LabeledExample>, budget: usize, what: &str) -> Vec<SpanKey> {
    if budget > ranked.len() {
        log::info!("{what}: prune budget {budget} exceeds {} candidates, clamping", ranked.len());
    }
    ranked.truncate(budget);
    ranked.into_iter().map(|e| e.key).collect()
}

/// Rank-by-class removals.
pub fn rank_by_class(examples: &[LabeledExample], joint: &ConfidentJoint) -> BTreeSet<SpanKey> {
    let n = examples.len();
    let mut removed = BTreeSet::new();
    for (i, &class) in joint.classes.iter().enumerate() {
        let off_diagonal: f64 = (0..joint.classes.len()).filter(|&j| j != i).map(|j| joint.joint[i][j]).sum();
        let budget = prune_budget(n, off_diagonal);
        if budget == 0 {
            continue;
        }
        let mut ranked: Vec<&LabeledExample> = examples.iter().filter(|e| e.observed == class).collect();
        ranked.sort_by(|a, b| a.probs[class.0].total_cmp(&b.probs[class.0]).then(a.key.cmp(&b.key)));
        removed.extend(take_budget(ranked, budget, "rbc"));
    }
    removed
}

/// Rank-by-noise-rate removals; the margin of `x` for cell `(i, j)` is
/// `p(j; x) - p(i; x)`.
pub fn rank_by_noise_rate(examples: &[LabeledExample], joint: &ConfidentJoint) -> BTreeSet<SpanKey> {
    let n = examples.len();
    let mut removed = BTreeSet::new();
    for (i, &ci) in joint.classes.iter().enumerate() {
        for (j, &cj) in joint.classes.iter().enumerate() {
            if i == j {
                continue;
            }
            let budget = prune_budget(n, joint.joint[i][j]);
            if budget == 0 {
                continue;
            }
            let margin = |e: &LabeledExample| e.probs[cj.0] - e.probs[ci.0];
            let mut ranked: Vec<&LabeledExample> = examples.iter().filter(|e| e.observed == ci).collect();
            ranked.sort_by(|a, b| margin(b).total_cmp(&margin(a)).then(a.key.cmp(&b.key)));
            removed.extend(take_budget(ranked, budget, "rbnr"));
        }
    }
    removed
}

pub fn rank_and_prune(
    examples: &[LabeledExample],
    joint: &ConfidentJoint,
    strategy: PruneStrategy,
    level: PruneLevel,
) -> PruneDecision {
    let removed_spans: BTreeSet<SpanKey> = match strategy {
        PruneStrategy::Rbc => rank_by_class(examples, joint),
        PruneStrategy::Rbnr => rank_by_noise_rate(examples, joint),
        PruneStrategy::Both => {
            let rbc = rank_by_class(examples, joint);
            rank_by_noise_rate(examples, joint)
                .into_iter()
                .filter(|k| rbc.contains(k))
                .collect()
        }
    };
    let removed_sentences = match level {
        PruneLevel::Span => BTreeSet::new(),
        PruneLevel::Sentence => removed_spans.iter().map(|k| k.sentence_id).collect(),
    };
    PruneDecision {
        strategy,
        level,
        removed_spans,
        removed_sentences,
    }
}
