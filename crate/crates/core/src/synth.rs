//! Generator for separable toy corpora: every entity token belongs to
//! exactly one type's vocabulary, so token identity determines the type.

use std::collections::HashMap;

use rand::Rng;

use crate::corpus::{spans_to_bio, ClassId, Dataset, LabelSpace, LabeledSpan, Sentence};
use crate::error::{Error, Result};
use crate::rng::{self, SeedStreams};
use crate::span_model::FrozenVectors;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub labels: Vec<String>,
    /// Distinct words per entity type.
    pub words_per_type: usize,
    pub filler_words: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub max_entities: usize,
    pub min_entity_len: usize,
    pub max_entity_len: usize,
    /// Minimum number of O tokens between two mentions.
    pub min_gap: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            labels: ["LOC", "MISC", "ORG", "PER"].map(String::from).to_vec(),
            words_per_type: 40,
            filler_words: 200,
            min_len: 6,
            max_len: 20,
            max_entities: 3,
            min_entity_len: 1,
            max_entity_len: 3,
            min_gap: 1,
        }
    }
}

/// `count` sentences with ids `first_id..first_id + count`; gold and observed
/// columns are identical. Splits drawn with distinct `first_id` ranges share
/// vocabularies but not sentences.
pub fn generate(config: &SynthConfig, count: usize, first_id: usize, seed: u64) -> Result<Dataset> {
    if config.min_len == 0 || config.min_len > config.max_len || config.min_entity_len == 0 || config.min_entity_len > config.max_entity_len || config.min_entity_len > config.min_len {
        return Err(Error::Config("invalid synthetic sentence lengths".into()));
    }
    if config.words_per_type == 0 || config.filler_words == 0 {
        return Err(Error::Config("synthetic vocabularies must be non-empty".into()));
    }
    let labels = LabelSpace::new(config.labels.iter().cloned())?;
    let streams = SeedStreams::new(seed);
    let mut sentences = Vec::with_capacity(count);
    for id in first_id..first_id + count {
        let mut rng = streams.rng(rng::SYNTH, &[id as u64]);
        let n = rng.gen_range(config.min_len..=config.max_len);
        let mut tokens: Vec<String> = (0..n)
            .map(|_| format!("w{}", rng.gen_range(0..config.filler_words)))
            .collect();

        let mut spans = Vec::new();
        let wanted = rng.gen_range(0..=config.max_entities);
        for _ in 0..wanted * 4 {
            if spans.len() == wanted {
                break;
            }
            let len = rng.gen_range(config.min_entity_len..=config.max_entity_len.min(n));
            let start = rng.gen_range(0..=n - len);
            let end = start + len - 1;
            let gap = config.min_gap;
            let clash = spans
                .iter()
                .any(|s: &LabeledSpan| start <= s.end + gap && s.start <= end + gap);
            if clash {
                continue;
            }
            let label = ClassId(rng.gen_range(1..=labels.num_entity_labels()));
            let prefix = labels.name(label).to_lowercase();
            for tok in &mut tokens[start..=end] {
                *tok = format!("{prefix}{}", rng.gen_range(0..config.words_per_type));
            }
            spans.push(LabeledSpan::new(start, end, label));
        }
        spans.sort_by_key(|s| s.start);
        let tags = spans_to_bio(&spans, n)?;
        sentences.push(Sentence {
            id,
            tokens,
            observed: tags.clone(),
            gold: Some(tags),
        });
    }
    Dataset::new(sentences, labels)
}

/// Scales of the three components of [`contextual_vectors`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorStyle {
    /// Shared by all tokens with the same alphabetic prefix.
    pub cluster: f64,
    /// Fixed per distinct token.
    pub word: f64,
    /// Drawn afresh for every occurrence.
    pub noise: f64,
}

impl Default for VectorStyle {
    fn default() -> Self {
        Self {
            cluster: 1.0,
            word: 1.0,
            noise: 0.3,
        }
    }
}

/// Stand-in for contextual encoder output over generated corpora. Each
/// occurrence's vector sums a cluster vector keyed by the token's alphabetic
/// prefix (`per17` and `per3` share one), a fixed per-token vector and
/// per-occurrence jitter; components of each part are uniform in
/// `[-scale, scale]`.
pub fn contextual_vectors(datasets: &[&Dataset], dim: usize, style: VectorStyle, seed: u64) -> Result<FrozenVectors> {
    let streams = SeedStreams::new(seed);
    let draw = |key: &str, salt: u64, scale: f64| -> Vec<f64> {
        let mut r = streams.rng(rng::SYNTH, &[u64::MAX - salt, rng::fnv1a(key.as_bytes())]);
        (0..dim).map(|_| scale * r.gen_range(-1.0..=1.0)).collect()
    };
    let mut words: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut by_sentence = HashMap::new();
    for d in datasets {
        for s in &d.sentences {
            let mut jitter = streams.rng(rng::SYNTH, &[u64::MAX, s.id as u64]);
            let rows = s
                .tokens
                .iter()
                .map(|tok| {
                    let base = words.entry(tok).or_insert_with(|| {
                        let prefix = tok.trim_end_matches(|c: char| c.is_ascii_digit());
                        let cluster = draw(prefix, 1, style.cluster);
                        let word = draw(tok, 2, style.word);
                        cluster.iter().zip(&word).map(|(a, b)| a + b).collect()
                    });
                    base.iter()
                        .map(|v| v + style.noise * jitter.gen_range(-1.0..=1.0))
                        .collect()
                })
                .collect();
            if by_sentence.insert(s.id, rows).is_some() {
                return Err(Error::Config(format!("sentence id {} appears twice", s.id)));
            }
        }
    }
    FrozenVectors::new(dim, by_sentence)
}
