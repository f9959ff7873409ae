use std::collections::BTreeSet;

use dsner_core::corpus::{parse_conll, ConllOptions, Dataset};
use dsner_core::noise_lab::mask_entities;
use dsner_core::selection::{PruneDecision, PruneLevel, PruneStrategy, SpanKey};
use dsner_core::span_model::{load_checkpoint, save_checkpoint};
use dsner_core::synth::{generate, SynthConfig};
use dsner_core::trainer::{fold_assignment, retrain_on_pruned, train, EmbeddingSource, TrainerConfig};
use dsner_core::Error;

fn small(epochs: usize, ues: bool, npe: bool) -> TrainerConfig {
    let mut c = TrainerConfig {
        epochs,
        ues,
        npe,
        seed: 4,
        ..TrainerConfig::default()
    };
    c.model.embed_dim = 8;
    c.model.hidden_dim = 16;
    c
}

fn corpus() -> Dataset {
    mask_entities(&generate(&SynthConfig::default(), 40, 0, 2).unwrap(), 0.5, 2).unwrap()
}

#[test]
fn replay_is_identical() {
    let data = corpus();
    let a = train(&data, None, &small(3, true, true), &EmbeddingSource::Table).unwrap();
    let b = train(&data, None, &small(3, true, true), &EmbeddingSource::Table).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.model, b.model);
}

#[test]
fn flag_matrix() {
    let data = corpus();
    for (ues, npe) in [(false, false), (true, false), (false, true), (true, true)] {
        let out = train(&data, None, &small(3, ues, npe), &EmbeddingSource::Table).unwrap();
        assert_eq!(out.reports.len(), 3);
        assert!(out.reports[0].warmup && !out.reports[1].warmup);
        assert!(out.reports[0].confident_positives.is_none());
        for r in &out.reports[1..] {
            assert_eq!(r.confident_positives.is_some(), npe, "ues={ues} npe={npe}");
            assert_eq!(r.confident_negatives.is_some(), ues, "ues={ues} npe={npe}");
            assert!(r.confident_positives.unwrap_or(0) <= r.positives);
        }
        assert!(out.reports.iter().all(|r| r.fn_report.is_some() && r.loss.is_finite()));
    }
}

#[test]
fn single_epoch_is_pure_warmup() {
    let out = train(&corpus(), None, &small(1, true, true), &EmbeddingSource::Table).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert!(out.reports[0].confident_positives.is_none() && out.reports[0].confident_negatives.is_none());
}

#[test]
fn empty_decision_equals_plain_training() {
    let data = corpus();
    let config = small(2, true, true);
    let plain = train(&data, None, &config, &EmbeddingSource::Table).unwrap();
    for level in [PruneLevel::Span, PruneLevel::Sentence] {
        let decision = PruneDecision::empty(PruneStrategy::Both, level);
        let again = retrain_on_pruned(&data, &decision, None, &config, &EmbeddingSource::Table).unwrap();
        assert_eq!(again.model, plain.model);
    }
}

#[test]
fn span_pruning_removes_positives() {
    let data = corpus();
    let mut decision = PruneDecision::empty(PruneStrategy::Rbc, PruneLevel::Span);
    let first = &data.sentences.iter().find(|s| !s.observed_spans().is_empty()).unwrap();
    decision.removed_spans.insert(SpanKey::new(first.id, &first.observed_spans()[0]));
    let config = small(1, true, true);
    let plain = train(&data, None, &config, &EmbeddingSource::Table).unwrap();
    let pruned = retrain_on_pruned(&data, &decision, None, &config, &EmbeddingSource::Table).unwrap();
    assert_eq!(pruned.reports[0].positives + 1, plain.reports[0].positives);
}

#[test]
fn over_pruning_aborts() {
    let data = corpus();
    let mut decision = PruneDecision::empty(PruneStrategy::Both, PruneLevel::Sentence);
    decision.removed_sentences = data.sentences.iter().map(|s| s.id).collect::<BTreeSet<_>>();
    let err = retrain_on_pruned(&data, &decision, None, &small(1, true, true), &EmbeddingSource::Table).unwrap_err();
    assert!(matches!(err, Error::TrainingAborted(_)));
}

#[test]
fn npe_removing_everything_aborts() {
    // Identical spans get identical confidences, none strictly above the mean.
    let text = "x B-A\ny O\n\n".repeat(6);
    let data = parse_conll(&text, ConllOptions::default()).unwrap().dataset;
    let mut config = small(2, true, true);
    config.model.context_window = 0;
    config.npe_min_support = 1;
    let err = train(&data, None, &config, &EmbeddingSource::Table).unwrap_err();
    assert!(matches!(err, Error::TrainingAborted(_)));
}

#[test]
fn invalid_config_is_rejected() {
    let data = corpus();
    let mut c = small(1, true, true);
    c.lambda = 0.0;
    assert!(train(&data, None, &c, &EmbeddingSource::Table).is_err());
    let mut c = small(1, true, true);
    c.warmup_epochs = 2;
    assert!(train(&data, None, &c, &EmbeddingSource::Table).is_err());
}

#[test]
fn folds_partition_and_replay() {
    let folds = fold_assignment(100, 5, 7).unwrap();
    assert_eq!(folds, fold_assignment(100, 5, 7).unwrap());
    for f in 0..5 {
        assert_eq!(folds.iter().filter(|&&x| x == f).count(), 20);
    }
    let loo = fold_assignment(6, 6, 1).unwrap();
    assert_eq!(loo.iter().collect::<BTreeSet<_>>().len(), 6);
    assert!(fold_assignment(3, 5, 0).is_err());
}

#[test]
fn dev_selection_picks_best_epoch() {
    let data = corpus();
    let dev = generate(&SynthConfig::default(), 15, 100, 2).unwrap();
    let mut config = small(3, true, true);
    config.select_on_dev = true;
    let out = train(&data, Some(&dev), &config, &EmbeddingSource::Table).unwrap();
    let f1: Vec<f64> = out.reports.iter().map(|r| r.dev.unwrap().f1).collect();
    let best = f1.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(f1[out.selected_epoch], best);
    assert_eq!(f1.iter().position(|&x| x == best), Some(out.selected_epoch));
}

#[test]
fn checkpoint_round_trip() {
    let out = train(&corpus(), None, &small(1, false, false), &EmbeddingSource::Table).unwrap();
    let mut bytes = Vec::new();
    save_checkpoint(&out.model, &mut bytes).unwrap();
    let loaded = load_checkpoint(bytes.as_slice(), None).unwrap();
    assert_eq!(loaded, out.model);
    bytes[0] ^= 1;
    assert!(load_checkpoint(bytes.as_slice(), None).is_err());
}
