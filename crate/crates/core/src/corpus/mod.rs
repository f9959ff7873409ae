//! Tokenized NER corpora: label space, BIO tags, spans and greedy decoding.
//!
//! Spans use 0-based inclusive `(start, end)` token indices. The non-entity
//! class `O` always has class id 0; entity labels follow in label-space order.

mod conll;
mod jsonl;

pub use conll::{parse_conll, parse_conll_with_labels, write_conll, ConllOptions, ParseOutcome};
pub use jsonl::{read_span_jsonl, write_span_jsonl, SpanRecord};

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into `L ∪ {O}`. `ClassId::O` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub usize);

impl ClassId {
    pub const O: ClassId = ClassId(0);

    pub fn is_entity(self) -> bool {
        self.0 != 0
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered entity labels. `O` is implicit and never listed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    entity_labels: Vec<String>,
}

impl LabelSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entity_labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for label in &entity_labels {
            if label.is_empty() || label == "O" || label.chars().any(char::is_whitespace) {
                return Err(Error::InvalidLabelSpace(format!("bad label `{label}`")));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidLabelSpace(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self { entity_labels })
    }

    /// Label space from an unordered set of names, sorted so that different
    /// files carrying the same labels agree on class ids.
    pub fn from_names<'a, I: IntoIterator<Item = &'a str>>(names: I) -> Result<Self> {
        let set: BTreeSet<&str> = names.into_iter().collect();
        Self::new(set)
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entity_labels
    }

    pub fn num_entity_labels(&self) -> usize {
        self.entity_labels.len()
    }

    /// `|L| + 1`
    pub fn num_classes(&self) -> usize {
        self.entity_labels.len() + 1
    }

    pub fn class_of(&self, name: &str) -> Option<ClassId> {
        if name == "O" {
            return Some(ClassId::O);
        }
        self.entity_labels
            .iter()
            .position(|l| l == name)
            .map(|p| ClassId(p + 1))
    }

    pub fn name(&self, class: ClassId) -> &str {
        if class == ClassId::O {
            "O"
        } else {
            &self.entity_labels[class.0 - 1]
        }
    }

    /// All class ids, `O` first.
    pub fn classes(&self) -> impl Iterator<Item = ClassId> {
        (0..self.num_classes()).map(ClassId)
    }

    pub fn entity_classes(&self) -> impl Iterator<Item = ClassId> {
        (1..self.num_classes()).map(ClassId)
    }

    pub fn format_tag(&self, tag: Tag) -> String {
        match tag {
            Tag::O => "O".to_string(),
            Tag::B(c) => format!("B-{}", self.name(c)),
            Tag::I(c) => format!("I-{}", self.name(c)),
        }
    }

    pub fn parse_tag(&self, text: &str) -> Result<Tag> {
        match split_tag(text) {
            Some(RawTag::O) => Ok(Tag::O),
            Some(RawTag::B(name)) => self
                .class_of(name)
                .filter(|c| c.is_entity())
                .map(Tag::B)
                .ok_or_else(|| Error::UnknownLabel(name.to_string())),
            Some(RawTag::I(name)) => self
                .class_of(name)
                .filter(|c| c.is_entity())
                .map(Tag::I)
                .ok_or_else(|| Error::UnknownLabel(name.to_string())),
            None => Err(Error::UnknownLabel(text.to_string())),
        }
    }
}

/// A BIO tag over class ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(ClassId),
    I(ClassId),
}

impl Tag {
    pub fn class(self) -> ClassId {
        match self {
            Tag::O => ClassId::O,
            Tag::B(c) | Tag::I(c) => c,
        }
    }
}

pub(crate) enum RawTag<'a> {
    O,
    B(&'a str),
    I(&'a str),
}

pub(crate) fn split_tag(text: &str) -> Option<RawTag<'_>> {
    if text == "O" {
        return Some(RawTag::O);
    }
    let (prefix, name) = text.split_once('-')?;
    if name.is_empty() {
        return None;
    }
    match prefix {
        "B" => Some(RawTag::B(name)),
        "I" => Some(RawTag::I(name)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub label: ClassId,
}

impl LabeledSpan {
    pub fn new(start: usize, end: usize, label: ClassId) -> Self {
        debug_assert!(start <= end);
        Self { start, end, label }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bounds(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn overlaps(&self, other: &LabeledSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for LabeledSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.start, self.end, self.label.0)
    }
}

/// A span with a decoding score (the max-label probability).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSpan {
    pub span: LabeledSpan,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: usize,
    pub tokens: Vec<String>,
    pub observed: Vec<Tag>,
    pub gold: Option<Vec<Tag>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn observed_spans(&self) -> Vec<LabeledSpan> {
        bio_to_spans(&self.observed)
    }

    pub fn gold_spans(&self) -> Result<Vec<LabeledSpan>> {
        self.gold
            .as_deref()
            .map(bio_to_spans)
            .ok_or(Error::MissingGold(self.id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub sentences: Vec<Sentence>,
    pub labels: LabelSpace,
}

impl Dataset {
    /// Validates ids, lengths and BIO well-formedness.
    pub fn new(sentences: Vec<Sentence>, labels: LabelSpace) -> Result<Self> {
        let mut ids = HashSet::new();
        for s in &sentences {
            if !ids.insert(s.id) {
                return Err(Error::Config(format!("duplicate sentence id {}", s.id)));
            }
            check_tags(s.id, s.tokens.len(), &s.observed, &labels)?;
            if let Some(gold) = &s.gold {
                check_tags(s.id, s.tokens.len(), gold, &labels)?;
            }
        }
        Ok(Self { sentences, labels })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn has_gold(&self) -> bool {
        self.sentences.iter().all(|s| s.gold.is_some())
    }

    /// Swap the observed column for the gold column (clean evaluation view).
    pub fn gold_view(&self) -> Result<Dataset> {
        let sentences = self
            .sentences
            .iter()
            .map(|s| {
                let gold = s.gold.clone().ok_or(Error::MissingGold(s.id))?;
                Ok(Sentence {
                    id: s.id,
                    tokens: s.tokens.clone(),
                    observed: gold.clone(),
                    gold: Some(gold),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            sentences,
            labels: self.labels.clone(),
        })
    }

    pub fn subset(&self, keep: impl Fn(&Sentence) -> bool) -> Dataset {
        Dataset {
            sentences: self.sentences.iter().filter(|s| keep(s)).cloned().collect(),
            labels: self.labels.clone(),
        }
    }
}

fn check_tags(id: usize, n: usize, tags: &[Tag], labels: &LabelSpace) -> Result<()> {
    if tags.len() != n {
        return Err(Error::LengthMismatch {
            sentence: id,
            left: n,
            right: tags.len(),
        });
    }
    for (i, tag) in tags.iter().enumerate() {
        if tag.class().0 >= labels.num_classes() {
            return Err(Error::UnknownLabel(format!("class {}", tag.class().0)));
        }
        if !is_valid_continuation(if i == 0 { None } else { Some(tags[i - 1]) }, *tag) {
            return Err(Error::Parse {
                line: 0,
                message: format!("sentence {id}: invalid BIO transition at token {i}"),
            });
        }
    }
    Ok(())
}

fn is_valid_continuation(prev: Option<Tag>, tag: Tag) -> bool {
    match tag {
        Tag::I(c) => matches!(prev, Some(Tag::B(p)) | Some(Tag::I(p)) if p == c),
        _ => true,
    }
}

pub fn is_valid_bio(tags: &[Tag]) -> bool {
    tags.iter()
        .enumerate()
        .all(|(i, &t)| is_valid_continuation(if i == 0 { None } else { Some(tags[i - 1]) }, t))
}

/// Promote every orphan `I-X` to `B-X`. Returns the number of repaired tags.
pub fn repair_bio(tags: &mut [Tag]) -> usize {
    let mut repairs = 0;
    for i in 0..tags.len() {
        let prev = if i == 0 { None } else { Some(tags[i - 1]) };
        if let Tag::I(c) = tags[i] {
            if !is_valid_continuation(prev, tags[i]) {
                tags[i] = Tag::B(c);
                repairs += 1;
            }
        }
    }
    repairs
}

/// Maximal `B I*` runs of one type, ordered by start. An orphan `I-X` opens a
/// new span rather than being dropped.
pub fn bio_to_spans(tags: &[Tag]) -> Vec<LabeledSpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, ClassId)> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            Tag::O => {
                if let Some((s, c)) = open.take() {
                    spans.push(LabeledSpan::new(s, i - 1, c));
                }
            }
            Tag::B(c) => {
                if let Some((s, oc)) = open.take() {
                    spans.push(LabeledSpan::new(s, i - 1, oc));
                }
                open = Some((i, c));
            }
            Tag::I(c) => match open {
                Some((_, oc)) if oc == c => {}
                _ => {
                    if let Some((s, oc)) = open.take() {
                        spans.push(LabeledSpan::new(s, i - 1, oc));
                    }
                    open = Some((i, c));
                }
            },
        }
    }
    if let Some((s, c)) = open {
        spans.push(LabeledSpan::new(s, tags.len() - 1, c));
    }
    spans
}

/// Inverse of [`bio_to_spans`]. Spans labeled `O` are ignored.
pub fn spans_to_bio(spans: &[LabeledSpan], n: usize) -> Result<Vec<Tag>> {
    let mut sorted: Vec<&LabeledSpan> = spans.iter().filter(|s| s.label.is_entity()).collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut tags = vec![Tag::O; n];
    for (k, span) in sorted.iter().enumerate() {
        if span.start > span.end || span.end >= n {
            return Err(Error::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                len: n,
            });
        }
        if k > 0 && sorted[k - 1].end >= span.start {
            return Err(Error::OverlappingSpans {
                a_start: sorted[k - 1].start,
                a_end: sorted[k - 1].end,
                b_start: span.start,
                b_end: span.end,
            });
        }
        tags[span.start] = Tag::B(span.label);
        for tag in &mut tags[span.start + 1..=span.end] {
            *tag = Tag::I(span.label);
        }
    }
    Ok(tags)
}

/// Keep spans greedily by score descending, then start ascending, then
/// shorter first; a span is kept iff it overlaps no previously kept span.
/// Spans labeled `O` or outside `[0, n)` are discarded.
pub fn greedy_decode(predictions: &[ScoredSpan], n: usize) -> Vec<LabeledSpan> {
    let mut order: Vec<&ScoredSpan> = predictions
        .iter()
        .filter(|p| p.span.label.is_entity() && p.span.end < n && p.span.start <= p.span.end)
        .collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.span.start.cmp(&b.span.start))
            .then(a.span.end.cmp(&b.span.end))
            .then(a.span.label.cmp(&b.span.label))
    });
    let mut taken = vec![false; n];
    let mut kept = Vec::new();
    for p in order {
        let range = p.span.start..=p.span.end;
        if taken[range.clone()].iter().any(|&t| t) {
            continue;
        }
        taken[range].iter_mut().for_each(|t| *t = true);
        kept.push(p.span);
    }
    kept.sort_by_key(|s| (s.start, s.end));
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PER: ClassId = ClassId(1);
    const LOC: ClassId = ClassId(2);

    fn sp(s: usize, e: usize, c: ClassId) -> LabeledSpan {
        LabeledSpan::new(s, e, c)
    }

    #[test]
    fn bio_to_spans_examples() {
        assert_eq!(bio_to_spans(&[Tag::B(PER), Tag::I(PER), Tag::O]), vec![sp(0, 1, PER)]);
        assert!(bio_to_spans(&[Tag::O, Tag::O, Tag::O]).is_empty());
        assert_eq!(
            bio_to_spans(&[Tag::B(LOC), Tag::B(LOC), Tag::I(LOC)]),
            vec![sp(0, 0, LOC), sp(1, 2, LOC)]
        );
    }

    /// Run-length oracle: token i starts a span iff it is B, or I not
    /// continuing an equal-typed run.
    fn run_length_oracle(tags: &[Tag]) -> Vec<LabeledSpan> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tags.len() {
            if tags[i] == Tag::O {
                i += 1;
                continue;
            }
            let c = tags[i].class();
            let mut j = i + 1;
            while j < tags.len() && tags[j] == Tag::I(c) {
                j += 1;
            }
            out.push(sp(i, j - 1, c));
            i = j;
        }
        out
    }

    fn random_valid_bio(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<Tag> {
        let mut tags = Vec::with_capacity(n);
        for i in 0..n {
            let r = rng.gen_range(0..3);
            let c = ClassId(rng.gen_range(1..=classes));
            let tag = match r {
                0 => Tag::O,
                1 => Tag::B(c),
                _ => match tags.get(i.wrapping_sub(1)) {
                    Some(Tag::B(p)) | Some(Tag::I(p)) if i > 0 => Tag::I(*p),
                    _ => Tag::B(c),
                },
            };
            tags.push(tag);
        }
        tags
    }

    #[test]
    fn bio_round_trip_on_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(0..25);
            let tags = random_valid_bio(&mut rng, n, 3);
            assert!(is_valid_bio(&tags));
            let spans = bio_to_spans(&tags);
            assert_eq!(spans, run_length_oracle(&tags));
            for w in spans.windows(2) {
                assert!(!w[0].overlaps(&w[1]));
            }
            assert_eq!(spans_to_bio(&spans, n).unwrap(), tags);
        }
    }

    #[test]
    fn spans_to_bio_examples() {
        assert_eq!(
            spans_to_bio(&[sp(1, 2, ClassId(3))], 4).unwrap(),
            vec![Tag::O, Tag::B(ClassId(3)), Tag::I(ClassId(3)), Tag::O]
        );
        assert_eq!(spans_to_bio(&[], 3).unwrap(), vec![Tag::O; 3]);
        assert!(matches!(
            spans_to_bio(&[sp(0, 1, PER), sp(1, 2, LOC)], 3),
            Err(Error::OverlappingSpans { .. })
        ));
        assert!(matches!(
            spans_to_bio(&[sp(2, 3, PER)], 3),
            Err(Error::SpanOutOfBounds { .. })
        ));
    }

    /// Hand-written validator independent of `is_valid_bio`.
    fn validator(tags: &[Tag]) -> bool {
        let mut prev_class = None;
        for &t in tags {
            match t {
                Tag::O => prev_class = None,
                Tag::B(c) => prev_class = Some(c),
                Tag::I(c) => {
                    if prev_class != Some(c) {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn repair_yields_valid_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..15);
            let mut tags: Vec<Tag> = (0..n)
                .map(|_| {
                    let c = ClassId(rng.gen_range(1..=2));
                    match rng.gen_range(0..3) {
                        0 => Tag::O,
                        1 => Tag::B(c),
                        _ => Tag::I(c),
                    }
                })
                .collect();
            let before = tags.clone();
            let invalid = !validator(&tags);
            let repairs = repair_bio(&mut tags);
            assert!(validator(&tags));
            assert_eq!(invalid, repairs > 0);
            // Repair only ever rewrites I-X to B-X.
            for (a, b) in before.iter().zip(&tags) {
                assert!(a == b || matches!((a, b), (Tag::I(x), Tag::B(y)) if x == y));
            }
        }
        let mut tags = vec![Tag::I(LOC)];
        assert_eq!(repair_bio(&mut tags), 1);
        assert_eq!(tags, vec![Tag::B(LOC)]);
    }

    fn scored(s: usize, e: usize, c: ClassId, score: f64) -> ScoredSpan {
        ScoredSpan {
            span: sp(s, e, c),
            score,
        }
    }

    #[test]
    fn greedy_decode_examples() {
        let out = greedy_decode(&[scored(0, 1, PER, 0.9), scored(1, 2, LOC, 0.8)], 3);
        assert_eq!(out, vec![sp(0, 1, PER)]);
        let out = greedy_decode(&[scored(0, 0, PER, 0.3), scored(2, 3, LOC, 0.8)], 4);
        assert_eq!(out, vec![sp(0, 0, PER), sp(2, 3, LOC)]);
        // Tie on score: earlier start, then shorter.
        let out = greedy_decode(&[scored(1, 3, PER, 0.5), scored(1, 2, LOC, 0.5)], 4);
        assert_eq!(out, vec![sp(1, 2, LOC)]);
    }

    /// Direct simulation: repeatedly pick the best remaining candidate, drop
    /// everything that overlaps it.
    fn decode_oracle(preds: &[ScoredSpan]) -> Vec<LabeledSpan> {
        let mut pool: Vec<ScoredSpan> = preds.to_vec();
        let mut kept = Vec::new();
        while !pool.is_empty() {
            let mut best = 0;
            for k in 1..pool.len() {
                let (a, b) = (&pool[k], &pool[best]);
                let better = a.score > b.score
                    || (a.score == b.score
                        && (a.span.start, a.span.end, a.span.label)
                            < (b.span.start, b.span.end, b.span.label));
                if better {
                    best = k;
                }
            }
            let chosen = pool.remove(best);
            pool.retain(|p| !p.span.overlaps(&chosen.span));
            kept.push(chosen.span);
        }
        kept.sort_by_key(|s| (s.start, s.end));
        kept
    }

    #[test]
    fn greedy_decode_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = 12;
            let preds: Vec<ScoredSpan> = (0..10)
                .map(|_| {
                    let s = rng.gen_range(0..n);
                    let e = rng.gen_range(s..n.min(s + 4));
                    let score = f64::from(rng.gen_range(0..5u8)) / 5.0;
                    scored(s, e, ClassId(rng.gen_range(1..3)), score)
                })
                .collect();
            let out = greedy_decode(&preds, n);
            assert_eq!(out, decode_oracle(&preds));
            assert!(spans_to_bio(&out, n).is_ok());
        }
    }

    #[test]
    fn label_space_rules() {
        assert!(LabelSpace::new(["PER", "PER"]).is_err());
        assert!(LabelSpace::new(["O"]).is_err());
        assert!(LabelSpace::new([""]).is_err());
        let ls = LabelSpace::from_names(["PER", "LOC", "PER"]).unwrap();
        assert_eq!(ls.entity_labels(), ["LOC", "PER"]);
        assert_eq!(ls.class_of("PER"), Some(ClassId(2)));
        assert_eq!(ls.class_of("O"), Some(ClassId::O));
        assert_eq!(ls.parse_tag("I-LOC").unwrap(), Tag::I(ClassId(1)));
        assert!(ls.parse_tag("B-MISC").is_err());
        assert!(ls.parse_tag("X-LOC").is_err());
        assert_eq!(ls.format_tag(Tag::B(ClassId(2))), "B-PER");
    }
}
