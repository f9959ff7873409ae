use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use dsner_core::corpus::{
    greedy_decode, parse_conll_with_labels, read_span_jsonl, spans_to_bio, write_conll, write_span_jsonl, ClassId,
    ConllOptions, Dataset, LabelSpace, LabeledSpan, ScoredSpan, Sentence, SpanRecord, Tag,
};
use dsner_core::llm_ingest::{lcs_align, parse_tuples, AlignmentStatus, RawLlmOutput};
use dsner_core::metrics::{entity_f1, noisy_candidates, observed_vs_gold, optimal_tau};
use dsner_core::noise_lab::{corrupt_labels, decompose_areas, export_matrix_csv, mask_entities, transition_matrix, Granularity};
use dsner_core::selection::{
    confident_joint, npe_thresholds, rank_and_prune, JointCounting, PositiveScore, PruneDecision, PruneLevel,
    PruneStrategy, SpanKey,
};
use dsner_core::span_model::{save_checkpoint, FrozenVectors, SpanClassifier};
use dsner_core::trainer::{self, EmbeddingSource};
use dsner_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn column_count(text: &str) -> usize {
    text.lines()
        .map(|l| l.split_whitespace().count())
        .find(|&n| n > 0)
        .unwrap_or(2)
}

fn parse_corpus(text: &str, labels: Option<&LabelSpace>) -> Result<Dataset> {
    let options = ConllOptions {
        has_gold_column: column_count(text) == 3,
        repair: true,
    };
    let outcome = parse_conll_with_labels(text, options, labels)?;
    if outcome.repairs > 0 {
        log::warn!("repaired {} orphan I- tags", outcome.repairs);
    }
    Ok(outcome.dataset)
}

/// Parses several CoNLL texts against the union of their labels.
fn parse_together(texts: &[&str]) -> Result<Vec<Dataset>> {
    let mut names = BTreeSet::new();
    for t in texts {
        names.extend(parse_corpus(t, None)?.labels.entity_labels().iter().cloned());
    }
    let labels = LabelSpace::new(names)?;
    texts.iter().map(|t| parse_corpus(t, Some(&labels))).collect()
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(File::create(&path)?);
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn emit(summary: serde_json::Value) {
    println!("{summary}");
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Distantly annotated corpus (2 columns), or 3 columns with gold last.
    #[arg(long)]
    pub noisy: PathBuf,
    /// Gold corpus with the same tokens; its last column is used.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, default_value = "span")]
    pub granularity: Granularity,
}

pub fn audit(config: &RunConfig, args: &AuditArgs) -> Result<()> {
    let noisy_text = read_text(&args.noisy)?;
    let dataset = match &args.gold {
        None => {
            let d = parse_corpus(&noisy_text, None)?;
            if !d.has_gold() {
                return Err(Error::Config("audit needs --gold or a 3-column corpus".into()));
            }
            d
        }
        Some(gold_path) => {
            let gold_text = read_text(gold_path)?;
            let parsed = parse_together(&[&noisy_text, &gold_text])?;
            let (noisy, gold) = (&parsed[0], &parsed[1]);
            if noisy.len() != gold.len() {
                return Err(Error::Config(format!(
                    "noisy file has {} sentences, gold file {}",
                    noisy.len(),
                    gold.len()
                )));
            }
            let mut sentences = Vec::with_capacity(noisy.len());
            for (n, g) in noisy.sentences.iter().zip(&gold.sentences) {
                if n.len() != g.len() {
                    return Err(Error::LengthMismatch {
                        sentence: n.id,
                        left: n.len(),
                        right: g.len(),
                    });
                }
                if let Some(ix) = (0..n.len()).find(|&i| n.tokens[i] != g.tokens[i]) {
                    return Err(Error::Config(format!(
                        "sentence {}: token {ix} is {:?} in the noisy file but {:?} in the gold file",
                        n.id, n.tokens[ix], g.tokens[ix]
                    )));
                }
                sentences.push(Sentence {
                    id: n.id,
                    tokens: n.tokens.clone(),
                    observed: n.observed.clone(),
                    gold: Some(g.gold.clone().unwrap_or_else(|| g.observed.clone())),
                });
            }
            Dataset::new(sentences, noisy.labels.clone())?
        }
    };
    let matrix = transition_matrix(&dataset, args.granularity)?;
    let areas = decompose_areas(&matrix);
    let f1 = observed_vs_gold(&dataset)?;
    write_file(config.out_dir.join("matrix.csv"), export_matrix_csv(&matrix).as_bytes())?;
    let report = json!({
        "granularity": args.granularity,
        "areas": areas,
        "direct": f1,
    });
    write_json(config.out_dir.join("audit.json"), &report)?;
    emit(report);
    Ok(())
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Probability of erasing each entity.
    #[arg(long, conflicts_with = "flip_prob", required_unless_present = "flip_prob")]
    pub prob: Option<f64>,
    /// Probability of relabeling each entity with a different type.
    #[arg(long)]
    pub flip_prob: Option<f64>,
}

pub fn mask(config: &RunConfig, args: &MaskArgs) -> Result<()> {
    let seed = config.require_seed()?;
    let dataset = parse_corpus(&read_text(&args.input)?, None)?;
    let (out, name) = match (args.prob, args.flip_prob) {
        (Some(p), _) => (mask_entities(&dataset, p, seed)?, "masked.conll"),
        (None, Some(q)) => (corrupt_labels(&dataset, q, seed)?, "corrupted.conll"),
        (None, None) => return Err(Error::Config("give --prob or --flip-prob".into())),
    };
    write_file(config.out_dir.join(name), write_conll(&out, true).as_bytes())?;
    let kept = out.sentences.iter().map(|s| s.observed_spans().len()).sum::<usize>();
    let total = dataset
        .sentences
        .iter()
        .map(|s| dsner_core::corpus::bio_to_spans(s.gold.as_ref().unwrap_or(&s.observed)).len())
        .sum::<usize>();
    emit(json!({ "output": name, "entities": total, "observed_entities": kept }));
    Ok(())
}

/// One pruned span; `level` tells `train --prune-file` how to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub sentence_id: usize,
    pub start: usize,
    pub end: usize,
    pub label: String,
    /// Out-of-fold probability of the observed label.
    pub score: f64,
    pub reason: PruneStrategy,
    pub level: PruneLevel,
}

fn read_prune_file(path: &Path) -> Result<PruneDecision> {
    let text = read_text(path)?;
    let mut decision: Option<PruneDecision> = None;
    for (ix, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: PruneRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: ix + 1,
            message: e.to_string(),
        })?;
        let d = decision.get_or_insert_with(|| PruneDecision::empty(r.reason, r.level));
        if d.level != r.level {
            return Err(Error::Parse {
                line: ix + 1,
                message: "prune records mix span and sentence levels".into(),
            });
        }
        d.removed_spans.insert(SpanKey {
            sentence_id: r.sentence_id,
            start: r.start,
            end: r.end,
        });
        if r.level == PruneLevel::Sentence {
            d.removed_sentences.insert(r.sentence_id);
        }
    }
    Ok(decision.unwrap_or_else(|| PruneDecision::empty(PruneStrategy::Both, PruneLevel::Span)))
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Frozen vectors (`sentence_id token_index v1 .. vd`) for the training file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub dev_embeddings: Option<PathBuf>,
    #[arg(long)]
    pub test_embeddings: Option<PathBuf>,
    /// Disable reliable-negative warm-up and confident negatives.
    #[arg(long)]
    pub no_ues: bool,
    /// Disable noisy-positive elimination.
    #[arg(long)]
    pub no_npe: bool,
    /// Prune records from `select`; the listed spans or sentences are dropped.
    #[arg(long)]
    pub prune_file: Option<PathBuf>,
}

impl TrainArgs {
    pub fn apply(&self, config: &mut RunConfig) {
        let pick = |flag: &Option<PathBuf>, slot: &mut Option<PathBuf>| {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        };
        pick(&self.train, &mut config.train);
        pick(&self.dev, &mut config.dev);
        pick(&self.test, &mut config.test);
        pick(&self.embeddings, &mut config.embeddings);
        pick(&self.dev_embeddings, &mut config.dev_embeddings);
        pick(&self.test_embeddings, &mut config.test_embeddings);
        if self.no_ues {
            config.trainer.ues = false;
        }
        if self.no_npe {
            config.trainer.npe = false;
        }
    }
}

fn read_vectors(path: &Option<PathBuf>) -> Result<Option<FrozenVectors>> {
    path.as_ref()
        .map(|p| FrozenVectors::read(BufReader::new(File::open(p)?)))
        .transpose()
}

fn model_for(model: &SpanClassifier, vectors: Option<FrozenVectors>) -> Result<SpanClassifier> {
    match vectors {
        Some(v) => model.with_frozen_vectors(v),
        None => Ok(model.clone()),
    }
}

fn span_records(model: &SpanClassifier, dataset: &Dataset, max_len: usize) -> Result<Vec<SpanRecord>> {
    let mut out = Vec::new();
    for s in &dataset.sentences {
        let scored: Vec<ScoredSpan> = model
            .predict_all(s, max_len)?
            .into_iter()
            .filter(|p| p.argmax().is_entity())
            .map(|p| ScoredSpan {
                span: LabeledSpan::new(p.start, p.end, p.argmax()),
                score: p.score(),
            })
            .collect();
        let kept = greedy_decode(&scored, s.len());
        for span in kept {
            let score = scored.iter().find(|x| x.span == span).map(|x| x.score);
            out.push(SpanRecord {
                sentence_id: s.id,
                start: span.start,
                end: span.end,
                label: dataset.labels.name(span.label).to_string(),
                score,
                reason: None,
            });
        }
    }
    Ok(out)
}

fn positive_confidences(model: &SpanClassifier, dataset: &Dataset) -> Result<Vec<SpanRecord>> {
    let mut out = Vec::new();
    for s in &dataset.sentences {
        let spans = s.observed_spans();
        let bounds: Vec<(usize, usize)> = spans.iter().map(LabeledSpan::bounds).collect();
        for (span, pred) in spans.iter().zip(model.forward(s, &bounds)?) {
            out.push(SpanRecord {
                sentence_id: s.id,
                start: span.start,
                end: span.end,
                label: dataset.labels.name(span.label).to_string(),
                score: Some(pred.prob(span.label)),
                reason: None,
            });
        }
    }
    Ok(out)
}

pub fn train(config: &mut RunConfig, args: &TrainArgs) -> Result<()> {
    args.apply(config);
    let seed = config.require_seed()?;
    config.trainer.seed = seed;
    let train_path = config
        .train
        .clone()
        .ok_or_else(|| Error::Config("no training file (--train or `train =`)".into()))?;
    let mut texts = vec![read_text(&train_path)?];
    for p in [&config.dev, &config.test].into_iter().flatten() {
        texts.push(read_text(p)?);
    }
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let mut parsed = parse_together(&refs)?.into_iter();
    let train_set = parsed.next().expect("training text parsed");
    let dev = config.dev.as_ref().map(|_| parsed.next().expect("dev text parsed"));
    let test = config.test.as_ref().map(|_| parsed.next().expect("test text parsed"));

    let dev_vectors = read_vectors(&config.dev_embeddings)?;
    let test_vectors = read_vectors(&config.test_embeddings)?;
    let embeddings = match read_vectors(&config.embeddings)? {
        Some(train) => EmbeddingSource::Frozen {
            train,
            dev: dev_vectors.clone(),
        },
        None => EmbeddingSource::Table,
    };

    let tc = &config.trainer;
    let outcome = match &args.prune_file {
        Some(p) => trainer::retrain_on_pruned(&train_set, &read_prune_file(p)?, dev.as_ref(), tc, &embeddings)?,
        None => trainer::train(&train_set, dev.as_ref(), tc, &embeddings)?,
    };

    let out = &config.out_dir;
    let mut ckpt = BufWriter::new(File::create(out.join("model.ckpt"))?);
    save_checkpoint(&outcome.model, &mut ckpt)?;
    ckpt.flush()?;

    let mut epochs = String::new();
    for r in &outcome.reports {
        epochs.push_str(&serde_json::to_string(r)?);
        epochs.push('\n');
    }
    write_file(out.join("epochs.jsonl"), epochs.as_bytes())?;

    let mut conf = Vec::new();
    write_span_jsonl(&mut conf, &positive_confidences(&outcome.model, &train_set)?)?;
    write_file(out.join("train_confidences.jsonl"), &conf)?;

    let dev_prf = match &dev {
        Some(d) => {
            let m = model_for(&outcome.model, dev_vectors)?;
            Some(trainer::evaluate(&m, d, tc.max_span_len)?)
        }
        None => None,
    };
    let test_prf = match &test {
        Some(t) => {
            let m = model_for(&outcome.model, test_vectors)?;
            let mut preds = Vec::new();
            write_span_jsonl(&mut preds, &span_records(&m, t, tc.max_span_len)?)?;
            write_file(out.join("test_predictions.jsonl"), &preds)?;
            Some(trainer::evaluate(&m, t, tc.max_span_len)?)
        }
        None => None,
    };
    let last = outcome.reports.last();
    let metrics = json!({
        "selected_epoch": outcome.selected_epoch,
        "ues": tc.ues,
        "npe": tc.npe,
        "dev": dev_prf,
        "test": test_prf,
        "fn_report": last.and_then(|r| r.fn_report),
        "thresholds": last.map(|r| &r.thresholds),
    });
    write_json(out.join("metrics.json"), &metrics)?;
    emit(metrics);
    Ok(())
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value = "both")]
    pub strategy: PruneStrategy,
    #[arg(long, default_value = "span")]
    pub level: PruneLevel,
    /// Number of folds; defaults to `k_folds` from the config.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value = "literal", value_parser = parse_counting)]
    pub counting: JointCounting,
    /// Frozen vectors covering the training file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

fn parse_counting(s: &str) -> std::result::Result<JointCounting, String> {
    match s {
        "literal" => Ok(JointCounting::Literal),
        "argmax" => Ok(JointCounting::Argmax),
        _ => Err(format!("unknown counting mode `{s}` (literal | argmax)")),
    }
}

pub fn select(config: &RunConfig, args: &SelectArgs) -> Result<()> {
    let seed = config.require_seed()?;
    let path = args
        .train
        .clone()
        .or_else(|| config.train.clone())
        .ok_or_else(|| Error::Config("no training file (--train or `train =`)".into()))?;
    let dataset = parse_corpus(&read_text(&path)?, None)?;
    let mut tc = config.trainer.clone();
    tc.seed = seed;
    let mut config = config.clone();
    if let Some(p) = &args.embeddings {
        config.embeddings = Some(p.clone());
    }
    let k = args.k.unwrap_or(tc.k_folds);
    let embeddings = match read_vectors(&config.embeddings)? {
        Some(train) => EmbeddingSource::Frozen { train, dev: None },
        None => EmbeddingSource::Table,
    };
    let folds = trainer::kfold_confidences(&dataset, &tc, k, &embeddings)?;
    let classes = trainer::entity_classes(&dataset);
    let joint = confident_joint(&folds.examples, &classes, args.counting)?;
    let decision = rank_and_prune(&folds.examples, &joint, args.strategy, args.level);

    let by_key: BTreeMap<SpanKey, (ClassId, f64)> = folds
        .examples
        .iter()
        .map(|e| (e.key, (e.observed, e.probs[e.observed.0])))
        .collect();
    let mut lines = String::new();
    for key in &decision.removed_spans {
        let (label, score) = by_key[key];
        let record = PruneRecord {
            sentence_id: key.sentence_id,
            start: key.start,
            end: key.end,
            label: dataset.labels.name(label).to_string(),
            score,
            reason: args.strategy,
            level: args.level,
        };
        lines.push_str(&serde_json::to_string(&record)?);
        lines.push('\n');
    }
    write_file(config.out_dir.join("prune.jsonl"), lines.as_bytes())?;
    let names: Vec<&str> = classes.iter().map(|c| dataset.labels.name(*c)).collect();
    let report = json!({
        "strategy": args.strategy,
        "level": args.level,
        "k": k,
        "examples": folds.examples.len(),
        "removed_spans": decision.removed_spans.len(),
        "removed_sentences": decision.removed_sentences.len(),
        "classes": names,
        "counts": joint.counts,
        "joint": joint.joint,
        "thresholds": joint.thresholds,
    });
    write_json(config.out_dir.join("joint.json"), &report)?;
    emit(report);
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Gold corpus; its last column is the reference.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions: span JSONL (greedily decoded) or a CoNLL file whose
    /// second column is used.
    #[arg(long, required_unless_present = "tau_search")]
    pub pred: Option<PathBuf>,
    /// Search the noisy-entity threshold instead; `--gold` must then hold
    /// observed and gold columns.
    #[arg(long, requires = "confidences")]
    pub tau_search: bool,
    /// Span JSONL with the model's probability of each observed label.
    #[arg(long)]
    pub confidences: Option<PathBuf>,
}

fn looks_like_jsonl(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e == "jsonl") || text.trim_start().starts_with('{')
}

fn gold_tags(s: &Sentence) -> Vec<Tag> {
    s.gold.clone().unwrap_or_else(|| s.observed.clone())
}

pub fn eval(config: &RunConfig, args: &EvalArgs) -> Result<()> {
    let gold_text = read_text(&args.gold)?;
    if args.tau_search {
        let conf_path = args.confidences.as_ref().expect("clap enforces --confidences");
        return tau_search(config, &gold_text, conf_path);
    }
    let pred_path = args.pred.as_ref().expect("clap enforces --pred");
    let pred_text = read_text(pred_path)?;
    let (gold, pred): (Dataset, Vec<Vec<Tag>>) = if looks_like_jsonl(pred_path, &pred_text) {
        let records = read_span_jsonl(pred_text.as_bytes())?;
        let mut names: BTreeSet<String> = parse_corpus(&gold_text, None)?.labels.entity_labels().iter().cloned().collect();
        names.extend(records.iter().map(|r| r.label.clone()));
        let labels = LabelSpace::new(names)?;
        let gold = parse_corpus(&gold_text, Some(&labels))?;
        let mut by_sentence: BTreeMap<usize, Vec<ScoredSpan>> = BTreeMap::new();
        for r in &records {
            let label = labels.class_of(&r.label).ok_or_else(|| Error::UnknownLabel(r.label.clone()))?;
            by_sentence.entry(r.sentence_id).or_default().push(ScoredSpan {
                span: LabeledSpan::new(r.start, r.end, label),
                score: r.score.unwrap_or(1.0),
            });
        }
        let ids: BTreeSet<usize> = gold.sentences.iter().map(|s| s.id).collect();
        if let Some(bad) = by_sentence.keys().find(|k| !ids.contains(k)) {
            return Err(Error::Config(format!("prediction for unknown sentence {bad}")));
        }
        let pred = gold
            .sentences
            .iter()
            .map(|s| {
                let spans = by_sentence.get(&s.id).map_or(&[][..], Vec::as_slice);
                if let Some(x) = spans.iter().find(|x| x.span.end >= s.len()) {
                    return Err(Error::SpanOutOfBounds {
                        start: x.span.start,
                        end: x.span.end,
                        len: s.len(),
                    });
                }
                spans_to_bio(&greedy_decode(spans, s.len()), s.len())
            })
            .collect::<Result<_>>()?;
        (gold, pred)
    } else {
        let parsed = parse_together(&[&gold_text, &pred_text])?;
        let pred = parsed[1].sentences.iter().map(|s| s.observed.clone()).collect();
        (parsed[0].clone(), pred)
    };
    let reference: Vec<Vec<Tag>> = gold.sentences.iter().map(gold_tags).collect();
    if reference.len() != pred.len() {
        return Err(Error::Config(format!(
            "gold has {} sentences, predictions {}",
            reference.len(),
            pred.len()
        )));
    }
    let prf = entity_f1(&pred, &reference)?;
    write_json(config.out_dir.join("eval.json"), &prf)?;
    emit(serde_json::to_value(prf)?);
    Ok(())
}

fn tau_search(config: &RunConfig, gold_text: &str, conf_path: &Path) -> Result<()> {
    let dataset = parse_corpus(gold_text, None)?;
    if !dataset.has_gold() {
        return Err(Error::Config("--tau-search needs observed and gold columns".into()));
    }
    let records = read_span_jsonl(BufReader::new(File::open(conf_path)?))?;
    let scores: Vec<PositiveScore> = records
        .iter()
        .map(|r| {
            let label = dataset
                .labels
                .class_of(&r.label)
                .ok_or_else(|| Error::UnknownLabel(r.label.clone()))?;
            let confidence = r.score.ok_or_else(|| Error::Config(format!("record for sentence {} lacks a score", r.sentence_id)))?;
            Ok(PositiveScore {
                sentence_id: r.sentence_id,
                span: LabeledSpan::new(r.start, r.end, label),
                confidence,
            })
        })
        .collect::<Result<_>>()?;
    let candidates = noisy_candidates(&dataset, &scores)?;
    let npe = npe_thresholds(&scores);
    let mut per_label = BTreeMap::new();
    for class in dataset.labels.entity_classes() {
        let subset: Vec<_> = candidates.iter().filter(|c| c.label == class).copied().collect();
        let t_l = npe.get(&class).map(|t| t.mean);
        let entry = match optimal_tau(&subset) {
            Ok(r) => json!({
                "tau": r.tau,
                "ne_recall": r.ne_recall,
                "ne_precision": r.ne_precision,
                "f1": r.f1,
                "npe_threshold": t_l,
                "gap": t_l.map(|t| (r.tau - t).abs()),
                "noisy": subset.iter().filter(|c| c.noisy).count(),
                "positives": subset.len(),
            }),
            Err(e) => json!({ "error": e.to_string(), "npe_threshold": t_l, "positives": subset.len() }),
        };
        per_label.insert(dataset.labels.name(class).to_string(), entry);
    }
    let overall = optimal_tau(&candidates)?;
    let report = json!({
        "tau": overall.tau,
        "ne_recall": overall.ne_recall,
        "ne_precision": overall.ne_precision,
        "f1": overall.f1,
        "step": overall.step,
        "per_label": per_label,
    });
    write_json(config.out_dir.join("tau.json"), &report)?;
    emit(report);
    Ok(())
}

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// JSONL of `{"sentence_id": .., "payload": ..}` records.
    #[arg(long)]
    pub llm: PathBuf,
    /// Tokenized sentences, one token per line (first column), blank-line separated.
    #[arg(long)]
    pub tokens: PathBuf,
    /// Entity labels, comma separated; by default taken from the payloads.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Re-prompting hook; no fetcher is bundled, so values above 0 only warn.
    #[arg(long, default_value_t = 0)]
    pub max_retries: u32,
}

fn read_token_sentences(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        match line.split_whitespace().next() {
            Some(tok) => current.push(tok.to_string()),
            None if !current.is_empty() => out.push(std::mem::take(&mut current)),
            None => {}
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn discover_labels(outputs: &[RawLlmOutput]) -> Result<LabelSpace> {
    let mut names = BTreeSet::new();
    for o in outputs {
        for part in o.payload.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_')) {
            if let Some(label) = part.strip_prefix("B-").or_else(|| part.strip_prefix("I-")) {
                if !label.is_empty() {
                    names.insert(label.to_string());
                }
            }
        }
    }
    LabelSpace::new(names)
}

#[derive(Serialize)]
struct AlignReport<'a> {
    sentence_id: usize,
    status: AlignmentStatus,
    matched: usize,
    tokens: usize,
    tuples: usize,
    payload: &'a str,
}

pub fn align(config: &RunConfig, args: &AlignArgs) -> Result<()> {
    if args.max_retries > 0 {
        log::warn!("--max-retries {} ignored: no LLM fetcher is configured", args.max_retries);
    }
    let sentences = read_token_sentences(&read_text(&args.tokens)?);
    let mut outputs: Vec<RawLlmOutput> = Vec::new();
    for (ix, line) in read_text(&args.llm)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        outputs.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            line: ix + 1,
            message: e.to_string(),
        })?);
    }
    let labels = if args.labels.is_empty() {
        discover_labels(&outputs)?
    } else {
        LabelSpace::new(args.labels.iter().cloned())?
    };
    let mut by_id: BTreeMap<usize, &RawLlmOutput> = BTreeMap::new();
    for o in &outputs {
        if o.sentence_id >= sentences.len() {
            return Err(Error::Config(format!("payload for unknown sentence {}", o.sentence_id)));
        }
        if by_id.insert(o.sentence_id, o).is_some() {
            return Err(Error::Config(format!("two payloads for sentence {}", o.sentence_id)));
        }
    }

    let mut aligned = Vec::with_capacity(sentences.len());
    let mut report = String::new();
    let mut counts: BTreeMap<AlignmentStatus, usize> = BTreeMap::new();
    for (id, tokens) in sentences.into_iter().enumerate() {
        let payload = by_id.get(&id).map_or("", |o| o.payload.as_str());
        let tuples = parse_tuples(payload, &labels);
        let result = lcs_align(&tokens, &tuples)?;
        *counts.entry(result.status).or_default() += 1;
        report.push_str(&serde_json::to_string(&AlignReport {
            sentence_id: id,
            status: result.status,
            matched: result.matched,
            tokens: tokens.len(),
            tuples: tuples.len(),
            payload,
        })?);
        report.push('\n');
        aligned.push(Sentence {
            id,
            tokens,
            observed: result.bio,
            gold: None,
        });
    }
    let dataset = Dataset::new(aligned, labels)?;
    write_file(config.out_dir.join("aligned.conll"), write_conll(&dataset, false).as_bytes())?;
    write_file(config.out_dir.join("align_report.jsonl"), report.as_bytes())?;
    let summary: BTreeMap<String, usize> = counts
        .into_iter()
        .map(|(k, v)| (serde_json::to_value(k).map(|s| s.as_str().unwrap_or("").to_string()), v))
        .map(|(k, v)| (k.unwrap_or_default(), v))
        .collect();
    emit(json!({ "sentences": dataset.len(), "status": summary }));
    Ok(())
}
