//! Training loop with reliable-negative warm-up, per-epoch recomputation of
//! confident negatives and positives, the k-fold confidence harness and
//! retraining on pruned data.
//!
//! Each epoch trains on, per sentence, a positive part plus `⌈λn⌉` sampled
//! negatives:
//!
//! | phase   | positives             | negative pool                         |
//! |---------|-----------------------|---------------------------------------|
//! | warm-up | `P`                   | `N_ce` (UES on) or `N` (UES off)      |
//! | later   | `P̂` (NPE on) or `P`   | `N̂` topped up from `N_ce`, or `N`     |
//!
//! `P̂` and `N̂` are recomputed once per epoch from a full-corpus pass with
//! the parameters as they stand before that epoch's first step.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{greedy_decode, spans_to_bio, ClassId, Dataset, LabeledSpan, ScoredSpan, Sentence, Tag};
use crate::error::{Error, Result};
use crate::metrics::{entity_f1, FnReport, FnTally, Prf};
use crate::rng::{self, SeedStreams};
use crate::selection::{
    confident_negatives, confident_positives, negative_budget, npe_thresholds, sample_with, LabeledExample,
    PositiveScore, PredictionTable, PruneDecision, PruneLevel, SelectionSets, SpanKey,
};
use crate::span_model::{AdamW, EmbeddingProvider, FrozenVectors, ModelConfig, SentenceInstances, SpanClassifier, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// Negative sampling ratio λ.
    pub lambda: f64,
    /// Total epochs T, warm-up included.
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Sentences per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    /// Reliable-negative warm-up and confident negatives.
    pub ues: bool,
    /// Noisy-positive elimination.
    pub npe: bool,
    pub max_span_len: usize,
    /// Labels with fewer observed spans than this skip NPE.
    pub npe_min_support: usize,
    pub model: ModelConfig,
    pub k_folds: usize,
    /// Keep the parameters of the epoch with the best dev F1.
    pub select_on_dev: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.35,
            epochs: 8,
            warmup_epochs: 1,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            batch_size: 1,
            seed: 0,
            ues: true,
            npe: true,
            max_span_len: 8,
            npe_min_support: 5,
            model: ModelConfig::default(),
            k_folds: 5,
            select_on_dev: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail("lambda must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.warmup_epochs > self.epochs {
            return fail("warmup_epochs cannot exceed epochs");
        }
        if self.batch_size == 0 || self.max_span_len == 0 {
            return fail("batch_size and max_span_len must be positive");
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return fail("learning_rate must be positive and weight_decay non-negative");
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return fail("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// Where token vectors come from.
#[derive(Debug, Clone, Default)]
pub enum EmbeddingSource {
    /// A table learned over the training vocabulary.
    #[default]
    Table,
    /// Frozen per-sentence vectors for the training split and, optionally,
    /// the dev split.
    Frozen {
        train: FrozenVectors,
        dev: Option<FrozenVectors>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub warmup: bool,
    pub loss: f64,
    pub instances: usize,
    /// Positive spans available this epoch (`|P|` after exclusions).
    pub positives: usize,
    pub cross_entity: usize,
    /// `|P̂|` used this epoch, when computed.
    pub confident_positives: Option<usize>,
    /// `|N̂|` used this epoch, when computed.
    pub confident_negatives: Option<usize>,
    /// Thresholds `t_l` from the pass at the end of this epoch.
    pub thresholds: BTreeMap<String, f64>,
    /// False-negative diagnostics at the end of this epoch (gold only).
    pub fn_report: Option<FnReport>,
    pub dev: Option<Prf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final parameters, or the best-on-dev ones under `select_on_dev`.
    pub model: SpanClassifier,
    pub reports: Vec<EpochReport>,
    /// 0-based epoch whose parameters were returned.
    pub selected_epoch: usize,
}

/// Per-sentence training instances for `epoch`. `sets` must carry `P̂` / `N̂`
/// for post-warm-up epochs when NPE / UES are on.
pub fn training_instances(
    sets: &SelectionSets,
    sentence: &Sentence,
    epoch: usize,
    config: &TrainerConfig,
    streams: &SeedStreams,
) -> Vec<LabeledSpan> {
    let budget = negative_budget(config.lambda, sentence.len());
    let key = [sentence.id as u64, epoch as u64];
    let mut rng = streams.rng(rng::SAMPLE, &key);
    let warmup = epoch < config.warmup_epochs;

    let positives = match (&sets.confident_positives, config.npe && !warmup) {
        (Some(p), true) => p.as_slice(),
        _ => sets.positives.as_slice(),
    };
    let mut out = positives.to_vec();
    if warmup {
        let pool = if config.ues { &sets.cross_entity } else { &sets.negatives };
        out.extend(sample_with(pool, budget, &mut rng));
    } else if config.ues {
        let confident = sets.confident_negatives.as_deref().unwrap_or(&[]);
        let taken = sample_with(confident, budget, &mut rng);
        let shortfall = budget - taken.len();
        out.extend(taken);
        if shortfall > 0 {
            let rest: Vec<LabeledSpan> = sets
                .cross_entity
                .iter()
                .filter(|s| !confident.contains(s))
                .copied()
                .collect();
            let mut top_up = streams.rng(rng::SAMPLE, &[key[0], key[1], 1]);
            out.extend(sample_with(&rest, shortfall, &mut top_up));
        }
    } else {
        out.extend(sample_with(&sets.negatives, budget, &mut rng));
    }
    out
}

/// Greedy-decoded BIO predictions for every sentence.
pub fn predict_bio(model: &SpanClassifier, dataset: &Dataset, max_len: usize) -> Result<Vec<Vec<Tag>>> {
    dataset
        .sentences
        .par_iter()
        .map(|s| {
            let scored: Vec<ScoredSpan> = model
                .predict_all(s, max_len)?
                .into_iter()
                .filter_map(|p| {
                    let label = p.argmax();
                    label.is_entity().then(|| ScoredSpan {
                        span: LabeledSpan::new(p.start, p.end, label),
                        score: p.score(),
                    })
                })
                .collect();
            spans_to_bio(&greedy_decode(&scored, s.len()), s.len())
        })
        .collect()
}

/// Entity F1 of the model on `dataset`, against its gold column when present
/// and its observed column otherwise.
pub fn evaluate(model: &SpanClassifier, dataset: &Dataset, max_len: usize) -> Result<Prf> {
    let pred = predict_bio(model, dataset, max_len)?;
    let gold: Vec<Vec<Tag>> = dataset
        .sentences
        .iter()
        .map(|s| s.gold.clone().unwrap_or_else(|| s.observed.clone()))
        .collect();
    entity_f1(&pred, &gold)
}

fn build_model(train: &Dataset, config: &TrainerConfig, embeddings: &EmbeddingSource) -> Result<SpanClassifier> {
    let provider = match embeddings {
        EmbeddingSource::Table => EmbeddingProvider::TrainableTable(Vocab::from_datasets(&[train])),
        EmbeddingSource::Frozen { train, .. } => EmbeddingProvider::FileBacked(train.clone()),
    };
    SpanClassifier::new(train.labels.clone(), provider, &config.model, config.seed)
}

fn dev_model(model: &SpanClassifier, embeddings: &EmbeddingSource) -> Result<SpanClassifier> {
    match embeddings {
        EmbeddingSource::Frozen { dev: Some(v), .. } => model.with_frozen_vectors(v.clone()),
        _ => Ok(model.clone()),
    }
}

struct PassSummary {
    fn_report: Option<FnReport>,
    thresholds: BTreeMap<String, f64>,
}

/// Full-corpus pass with the current parameters: refreshes `P̂` / `N̂` in
/// `sets` and measures false-negative diagnostics when gold is present.
fn selection_pass(
    model: &SpanClassifier,
    train: &Dataset,
    sets: &mut [SelectionSets],
    config: &TrainerConfig,
    refresh: bool,
) -> Result<PassSummary> {
    let tables: Vec<PredictionTable> = train
        .sentences
        .par_iter()
        .map(|s| model.predict_all(s, config.max_span_len).map(PredictionTable::new))
        .collect::<Result<_>>()?;

    let with_gold = sets.iter().all(|s| s.false_negatives.is_some());
    let mut tally = FnTally::default();
    let mut scores = Vec::new();
    for ((s, set), table) in train.sentences.iter().zip(sets.iter()).zip(&tables) {
        if with_gold {
            tally.add(s.id, &set.negatives, set.false_negatives.as_deref().unwrap_or(&[]), table)?;
        }
        for p in &set.positives {
            let pred = table.get(p.start, p.end).ok_or(Error::MissingPrediction {
                sentence: s.id,
                start: p.start,
                end: p.end,
            })?;
            scores.push(PositiveScore::from_prediction(s.id, *p, pred));
        }
    }
    let thresholds = npe_thresholds(&scores);

    if refresh {
        let kept: BTreeSet<SpanKey> = if config.npe {
            confident_positives(&scores, &thresholds, config.npe_min_support)
                .iter()
                .map(|p| SpanKey::new(p.sentence_id, &p.span))
                .collect()
        } else {
            BTreeSet::new()
        };
        if config.npe && !scores.is_empty() && kept.is_empty() {
            return Err(Error::TrainingAborted(
                "noisy-positive elimination removed every positive span".into(),
            ));
        }
        for ((s, set), table) in train.sentences.iter().zip(sets.iter_mut()).zip(&tables) {
            if config.npe {
                set.confident_positives = Some(
                    set.positives
                        .iter()
                        .filter(|p| kept.contains(&SpanKey::new(s.id, p)))
                        .copied()
                        .collect(),
                );
            }
            if config.ues {
                set.confident_negatives = Some(confident_negatives(s.id, &set.negatives, table)?);
            }
        }
    }

    Ok(PassSummary {
        fn_report: with_gold.then(|| tally.report()),
        thresholds: thresholds
            .iter()
            .map(|(c, t)| (train.labels.name(*c).to_string(), t.mean))
            .collect(),
    })
}

pub fn train(train: &Dataset, dev: Option<&Dataset>, config: &TrainerConfig, embeddings: &EmbeddingSource) -> Result<TrainOutcome> {
    train_excluding(train, dev, config, embeddings, &BTreeSet::new())
}

/// Train with the given observed spans removed from the positives (and kept
/// out of the negatives).
pub fn train_excluding(
    train: &Dataset,
    dev: Option<&Dataset>,
    config: &TrainerConfig,
    embeddings: &EmbeddingSource,
    excluded: &BTreeSet<SpanKey>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::TrainingAborted("no training sentences".into()));
    }
    let streams = SeedStreams::new(config.seed);
    let mut model = build_model(train, config, embeddings)?;
    let mut optimizer = AdamW::new(config.learning_rate, config.weight_decay);

    let mut sets: Vec<SelectionSets> = train
        .sentences
        .iter()
        .map(|s| {
            let skip: Vec<(usize, usize)> = excluded
                .range(SpanKey { sentence_id: s.id, start: 0, end: 0 }..=SpanKey { sentence_id: s.id, start: usize::MAX, end: usize::MAX })
                .map(|k| (k.start, k.end))
                .collect();
            SelectionSets::build_excluding(s, config.max_span_len, &skip)
        })
        .collect();
    let positives: usize = sets.iter().map(|s| s.positives.len()).sum();
    let cross_entity: usize = sets.iter().map(|s| s.cross_entity.len()).sum();
    let has_gold = train.has_gold();

    let mut reports = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, SpanClassifier)> = None;
    for epoch in 0..config.epochs {
        let warmup = epoch < config.warmup_epochs;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut streams.rng(rng::SHUFFLE, &[epoch as u64]));

        let mut loss = 0.0;
        let mut instances = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<SentenceInstances<'_>> = chunk
                .iter()
                .map(|&ix| {
                    let s = &train.sentences[ix];
                    SentenceInstances {
                        sentence: s,
                        targets: training_instances(&sets[ix], s, epoch, config, &streams),
                        dropout_seed: streams.seed(rng::DROPOUT, &[s.id as u64, epoch as u64]),
                    }
                })
                .filter(|b| !b.targets.is_empty())
                .collect();
            if batch.is_empty() {
                continue;
            }
            instances += batch.iter().map(|b| b.targets.len()).sum::<usize>();
            let (batch_loss, grad) = model.loss_and_grad(&batch, config.model.dropout)?;
            loss += batch_loss;
            optimizer.step(&mut model.params, &grad)?;
        }

        let used_p = (!warmup && config.npe)
            .then(|| sets.iter().map(|s| s.confident_positives.as_ref().map_or(0, Vec::len)).sum());
        let used_n = (!warmup && config.ues)
            .then(|| sets.iter().map(|s| s.confident_negatives.as_ref().map_or(0, Vec::len)).sum());

        let next_needs_selection = epoch + 1 < config.epochs && epoch + 1 >= config.warmup_epochs && (config.npe || config.ues);
        let summary = if next_needs_selection || has_gold {
            Some(selection_pass(&model, train, &mut sets, config, next_needs_selection)?)
        } else {
            None
        };

        let dev_prf = match dev {
            Some(d) => Some(evaluate(&dev_model(&model, embeddings)?, d, config.max_span_len)?),
            None => None,
        };
        if let Some(prf) = &dev_prf {
            if config.select_on_dev && best.as_ref().is_none_or(|(f, _, _)| prf.f1 > *f) {
                best = Some((prf.f1, epoch, model.clone()));
            }
        }
        let report = EpochReport {
            epoch,
            warmup,
            loss,
            instances,
            positives,
            cross_entity,
            confident_positives: used_p,
            confident_negatives: used_n,
            thresholds: summary.as_ref().map(|s| s.thresholds.clone()).unwrap_or_default(),
            fn_report: summary.and_then(|s| s.fn_report),
            dev: dev_prf,
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, {} instances, dev f1 {}",
            report.loss,
            report.instances,
            report.dev.map_or("-".to_string(), |p| format!("{:.4}", p.f1))
        );
        reports.push(report);
    }

    let (model, selected_epoch) = match best {
        Some((_, epoch, m)) => (m, epoch),
        None => (model, config.epochs - 1),
    };
    Ok(TrainOutcome {
        model,
        reports,
        selected_epoch,
    })
}

/// Sentence-level fold assignment: a seeded shuffle dealt round-robin.
pub fn fold_assignment(num_sentences: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config("k must be at least 2".into()));
    }
    if num_sentences < k {
        return Err(Error::Config(format!("{num_sentences} sentences cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..num_sentences).collect();
    order.shuffle(&mut SeedStreams::new(seed).rng(rng::FOLDS, &[k as u64]));
    let mut folds = vec![0; num_sentences];
    for (pos, ix) in order.into_iter().enumerate() {
        folds[ix] = pos % k;
    }
    Ok(folds)
}

#[derive(Debug, Clone)]
pub struct KFoldOutput {
    /// Held-out fold of each sentence, by position in the dataset.
    pub folds: Vec<usize>,
    /// Out-of-sample distributions for every observed positive span.
    pub examples: Vec<LabeledExample>,
}

/// Out-of-sample confidences for every observed positive: each fold is
/// scored by a model trained on the other `k - 1` folds.
pub fn kfold_confidences(dataset: &Dataset, config: &TrainerConfig, k: usize, embeddings: &EmbeddingSource) -> Result<KFoldOutput> {
    let folds = fold_assignment(dataset.len(), k, config.seed)?;
    let mut examples = Vec::new();
    for fold in 0..k {
        let train_part = Dataset {
            sentences: dataset
                .sentences
                .iter()
                .zip(&folds)
                .filter(|(_, &f)| f != fold)
                .map(|(s, _)| s.clone())
                .collect(),
            labels: dataset.labels.clone(),
        };
        let outcome = train(&train_part, None, config, embeddings)?;
        for (s, _) in dataset.sentences.iter().zip(&folds).filter(|(_, &f)| f == fold) {
            let positives = s.observed_spans();
            let bounds: Vec<(usize, usize)> = positives.iter().map(LabeledSpan::bounds).collect();
            for (span, pred) in positives.iter().zip(outcome.model.forward(s, &bounds)?) {
                examples.push(LabeledExample {
                    key: SpanKey::new(s.id, span),
                    observed: span.label,
                    probs: pred.probs,
                });
            }
        }
    }
    examples.sort_by_key(|e| e.key);
    Ok(KFoldOutput { folds, examples })
}

/// Fresh training run with the decision's spans (or sentences) removed.
pub fn retrain_on_pruned(
    dataset: &Dataset,
    decision: &PruneDecision,
    dev: Option<&Dataset>,
    config: &TrainerConfig,
    embeddings: &EmbeddingSource,
) -> Result<TrainOutcome> {
    match decision.level {
        PruneLevel::Span => train_excluding(dataset, dev, config, embeddings, &decision.removed_spans),
        PruneLevel::Sentence => {
            let kept = dataset.subset(|s| !decision.removed_sentences.contains(&s.id));
            if kept.is_empty() {
                return Err(Error::TrainingAborted("pruning removed every sentence".into()));
            }
            train(&kept, dev, config, embeddings)
        }
    }
}

/// Classes that appear as observed entity labels, for confident learning
/// over positives.
pub fn entity_classes(dataset: &Dataset) -> Vec<ClassId> {
    dataset.labels.entity_classes().collect()
}
