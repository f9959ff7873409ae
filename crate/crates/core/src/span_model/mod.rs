//! Span classifier: token embeddings, a four-block span representation, a
//! one-hidden-layer tanh MLP and a softmax over `L ∪ {O}`.

mod checkpoint;
mod embedding;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use embedding::{context_pool, EmbeddingProvider, FrozenVectors, Vocab, UNK};
pub use optim::AdamW;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, LabelSpace, LabeledSpan, Sentence};
use crate::error::{Error, Result};
use crate::rng::{self, SeedStreams, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub context_window: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            hidden_dim: 256,
            context_window: 1,
            dropout: 0.2,
        }
    }
}

/// Every trainable tensor, flat and row-major. `embed` is empty when the
/// embeddings are file-backed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub embed: Vec<f64>,
    /// hidden × 4d
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// classes × hidden
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ClassifierParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            embed: vec![0.0; self.embed.len()],
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("embed", &self.embed),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 5] {
        [
            ("embed", &mut self.embed),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Probability distribution over `L ∪ {O}` for span `(start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    pub probs: Vec<f64>,
}

impl SpanPrediction {
    /// Most probable class; ties resolve to the lower class id.
    pub fn argmax(&self) -> ClassId {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        ClassId(best)
    }

    pub fn score(&self) -> f64 {
        self.probs[self.argmax().0]
    }

    pub fn prob(&self, class: ClassId) -> f64 {
        self.probs[class.0]
    }
}

/// The training instances contributed by one sentence; each span's label is
/// its target class.
#[derive(Debug, Clone)]
pub struct SentenceInstances<'a> {
    pub sentence: &'a Sentence,
    pub targets: Vec<LabeledSpan>,
    /// Seed of this sentence's dropout masks; unused when dropout is 0.
    pub dropout_seed: u64,
}

/// `[h_i ; h_j ; h_i - h_j ; h_i ⊙ h_j]`
pub fn span_repr(h_i: &[f64], h_j: &[f64]) -> Result<Vec<f64>> {
    if h_i.len() != h_j.len() {
        return Err(Error::Shape(format!(
            "span endpoints have lengths {} and {}",
            h_i.len(),
            h_j.len()
        )));
    }
    let mut s = Vec::with_capacity(4 * h_i.len());
    s.extend_from_slice(h_i);
    s.extend_from_slice(h_j);
    s.extend(h_i.iter().zip(h_j).map(|(a, b)| a - b));
    s.extend(h_i.iter().zip(h_j).map(|(a, b)| a * b));
    Ok(s)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanClassifier {
    labels: LabelSpace,
    embeddings: EmbeddingProvider,
    embed_dim: usize,
    hidden_dim: usize,
    context_window: usize,
    pub params: ClassifierParams,
}

struct Encoded {
    /// Pooled vectors h_1..h_n.
    hidden: Vec<Vec<f64>>,
    /// Table rows of the raw tokens, for routing gradients.
    rows: Option<Vec<usize>>,
}

impl SpanClassifier {
    /// Parameters drawn uniformly from `±1/√fan_in`; the embedding table is a
    /// one-hot linear layer, so its bound is 1.
    pub fn new(labels: LabelSpace, embeddings: EmbeddingProvider, config: &ModelConfig, seed: u64) -> Result<Self> {
        let d = match &embeddings {
            EmbeddingProvider::TrainableTable(_) => config.embed_dim,
            EmbeddingProvider::FileBacked(f) => f.dim(),
        };
        if d == 0 || config.hidden_dim == 0 {
            return Err(Error::Config("embedding and hidden dimensions must be positive".into()));
        }
        let h = config.hidden_dim;
        let c = labels.num_classes();
        let mut rng = SeedStreams::new(seed).rng(rng::INIT, &[]);
        let uniform = |len: usize, bound: f64, rng: &mut StreamRng| -> Vec<f64> {
            (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        let embed = match &embeddings {
            EmbeddingProvider::TrainableTable(v) => uniform(v.len() * d, 1.0, &mut rng),
            EmbeddingProvider::FileBacked(_) => Vec::new(),
        };
        let b1_bound = 1.0 / ((4 * d) as f64).sqrt();
        let b2_bound = 1.0 / (h as f64).sqrt();
        let params = ClassifierParams {
            embed,
            w1: uniform(h * 4 * d, b1_bound, &mut rng),
            b1: uniform(h, b1_bound, &mut rng),
            w2: uniform(c * h, b2_bound, &mut rng),
            b2: uniform(c, b2_bound, &mut rng),
        };
        Ok(Self {
            labels,
            embeddings,
            embed_dim: d,
            hidden_dim: h,
            context_window: config.context_window,
            params,
        })
    }

    /// Assemble a classifier from existing parameters (used by checkpoints).
    pub fn from_parts(
        labels: LabelSpace,
        embeddings: EmbeddingProvider,
        embed_dim: usize,
        hidden_dim: usize,
        context_window: usize,
        params: ClassifierParams,
    ) -> Result<Self> {
        let c = labels.num_classes();
        let expected_embed = match &embeddings {
            EmbeddingProvider::TrainableTable(v) => v.len() * embed_dim,
            EmbeddingProvider::FileBacked(f) => {
                if f.dim() != embed_dim {
                    return Err(Error::Shape(format!("file vectors have dim {}, expected {embed_dim}", f.dim())));
                }
                0
            }
        };
        let ok = params.embed.len() == expected_embed
            && params.w1.len() == hidden_dim * 4 * embed_dim
            && params.b1.len() == hidden_dim
            && params.w2.len() == c * hidden_dim
            && params.b2.len() == c;
        if !ok {
            return Err(Error::Shape("parameter tensors do not match dimensions".into()));
        }
        Ok(Self {
            labels,
            embeddings,
            embed_dim,
            hidden_dim,
            context_window,
            params,
        })
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn embeddings(&self) -> &EmbeddingProvider {
        &self.embeddings
    }

    /// Swap the frozen vectors (e.g. to evaluate another split). Fails for
    /// a trainable table.
    pub fn with_frozen_vectors(&self, vectors: FrozenVectors) -> Result<Self> {
        if !matches!(self.embeddings, EmbeddingProvider::FileBacked(_)) {
            return Err(Error::Config("model uses a trainable embedding table".into()));
        }
        if vectors.dim() != self.embed_dim {
            return Err(Error::Shape(format!("vectors have dim {}, model expects {}", vectors.dim(), self.embed_dim)));
        }
        let mut out = self.clone();
        out.embeddings = EmbeddingProvider::FileBacked(vectors);
        Ok(out)
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn context_window(&self) -> usize {
        self.context_window
    }

    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    fn encode_inner(&self, sentence: &Sentence) -> Result<Encoded> {
        let d = self.embed_dim;
        let (raw, rows) = match &self.embeddings {
            EmbeddingProvider::TrainableTable(vocab) => {
                let rows: Vec<usize> = sentence.tokens.iter().map(|t| vocab.row(t)).collect();
                let raw = rows
                    .iter()
                    .map(|&r| self.params.embed[r * d..(r + 1) * d].to_vec())
                    .collect();
                (raw, Some(rows))
            }
            EmbeddingProvider::FileBacked(f) => (f.sentence(sentence)?.to_vec(), None),
        };
        Ok(Encoded {
            hidden: context_pool(&raw, self.context_window),
            rows,
        })
    }

    /// Token vectors `h_1..h_n` after context pooling.
    pub fn encode(&self, sentence: &Sentence) -> Result<Vec<Vec<f64>>> {
        Ok(self.encode_inner(sentence)?.hidden)
    }

    /// Returns (hidden activations, logits).
    fn mlp(&self, s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let in_dim = 4 * self.embed_dim;
        let p = &self.params;
        let act: Vec<f64> = (0..self.hidden_dim)
            .map(|r| {
                let row = &p.w1[r * in_dim..(r + 1) * in_dim];
                (p.b1[r] + dot(row, s)).tanh()
            })
            .collect();
        let logits = self.output_layer(&act);
        (act, logits)
    }

    fn output_layer(&self, act: &[f64]) -> Vec<f64> {
        let h = self.hidden_dim;
        let p = &self.params;
        (0..self.num_classes())
            .map(|k| p.b2[k] + dot(&p.w2[k * h..(k + 1) * h], act))
            .collect()
    }

    fn check_span(&self, sentence: &Sentence, start: usize, end: usize) -> Result<()> {
        if start > end || end >= sentence.len() {
            return Err(Error::SpanOutOfBounds {
                start,
                end,
                len: sentence.len(),
            });
        }
        Ok(())
    }

    /// Softmax distributions for the given spans (no dropout).
    pub fn forward(&self, sentence: &Sentence, spans: &[(usize, usize)]) -> Result<Vec<SpanPrediction>> {
        let enc = self.encode_inner(sentence)?;
        spans
            .iter()
            .map(|&(i, j)| {
                self.check_span(sentence, i, j)?;
                let s = span_repr(&enc.hidden[i], &enc.hidden[j])?;
                let (_, mut z) = self.mlp(&s);
                softmax_in_place(&mut z);
                Ok(SpanPrediction {
                    start: i,
                    end: j,
                    probs: z,
                })
            })
            .collect()
    }

    /// Distributions for every span of length ≤ `max_len`, ordered by
    /// `(start, end)`. Splits the first layer into per-token halves so that
    /// only the product block costs `O(hidden · d)` per span.
    pub fn predict_all(&self, sentence: &Sentence, max_len: usize) -> Result<Vec<SpanPrediction>> {
        let n = sentence.len();
        if n == 0 || max_len == 0 {
            return Ok(Vec::new());
        }
        let enc = self.encode_inner(sentence)?;
        let d = self.embed_dim;
        let in_dim = 4 * d;
        let hd = self.hidden_dim;
        let p = &self.params;
        // left[i] = (W_a + W_c) h_i + b1, right[j] = (W_b - W_c) h_j
        let mut left = vec![vec![0.0; hd]; n];
        let mut right = vec![vec![0.0; hd]; n];
        for (t, h) in enc.hidden.iter().enumerate() {
            for r in 0..hd {
                let row = &p.w1[r * in_dim..(r + 1) * in_dim];
                let (wa, rest) = row.split_at(d);
                let (wb, rest) = rest.split_at(d);
                let wc = &rest[..d];
                let mut l = p.b1[r];
                let mut rr = 0.0;
                for k in 0..d {
                    l += (wa[k] + wc[k]) * h[k];
                    rr += (wb[k] - wc[k]) * h[k];
                }
                left[t][r] = l;
                right[t][r] = rr;
            }
        }
        let mut out = Vec::with_capacity(n * max_len.min(n));
        let mut prod = vec![0.0; d];
        let mut act = vec![0.0; hd];
        for i in 0..n {
            for j in i..n.min(i + max_len) {
                for k in 0..d {
                    prod[k] = enc.hidden[i][k] * enc.hidden[j][k];
                }
                for r in 0..hd {
                    let wd = &p.w1[r * in_dim + 3 * d..(r + 1) * in_dim];
                    act[r] = (left[i][r] + right[j][r] + dot(wd, &prod)).tanh();
                }
                let mut z = self.output_layer(&act);
                softmax_in_place(&mut z);
                out.push(SpanPrediction {
                    start: i,
                    end: j,
                    probs: z,
                });
            }
        }
        Ok(out)
    }

    /// Summed cross-entropy over all instances and its gradient with respect
    /// to every trainable tensor. Dropout (inverted, rate `dropout`) is
    /// applied to span representations when `dropout > 0`.
    pub fn loss_and_grad(&self, batch: &[SentenceInstances<'_>], dropout: f64) -> Result<(f64, ClassifierParams)> {
        if batch.iter().all(|b| b.targets.is_empty()) {
            return Err(Error::Config("empty training batch".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidProbability {
                name: "dropout",
                value: dropout,
            });
        }
        let c = self.num_classes();
        let d = self.embed_dim;
        let hd = self.hidden_dim;
        let in_dim = 4 * d;
        let mut grad = self.params.zeros_like();
        let mut loss = 0.0;
        let keep_scale = 1.0 / (1.0 - dropout);

        for item in batch {
            let sentence = item.sentence;
            let enc = self.encode_inner(sentence)?;
            let mut dh = vec![vec![0.0; d]; sentence.len()];
            let mut mask_rng = (dropout > 0.0).then(|| SeedStreams::new(item.dropout_seed).rng(rng::DROPOUT, &[]));

            for span in &item.targets {
                self.check_span(sentence, span.start, span.end)?;
                let target = span.label.0;
                if target >= c {
                    return Err(Error::UnknownLabel(format!("class {target}")));
                }
                let (hi, hj) = (&enc.hidden[span.start], &enc.hidden[span.end]);
                let mut s = span_repr(hi, hj)?;
                let mask: Option<Vec<f64>> = mask_rng.as_mut().map(|rng| {
                    (0..in_dim)
                        .map(|_| if rng.gen_bool(dropout) { 0.0 } else { keep_scale })
                        .collect()
                });
                if let Some(m) = &mask {
                    s.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
                }
                let (act, z) = self.mlp(&s);
                loss += log_sum_exp(&z) - z[target];

                let mut dz = z;
                softmax_in_place(&mut dz);
                dz[target] -= 1.0;

                let mut da = vec![0.0; hd];
                for k in 0..c {
                    grad.b2[k] += dz[k];
                    let w_row = &self.params.w2[k * hd..(k + 1) * hd];
                    let g_row = &mut grad.w2[k * hd..(k + 1) * hd];
                    for r in 0..hd {
                        g_row[r] += dz[k] * act[r];
                        da[r] += dz[k] * w_row[r];
                    }
                }
                let mut ds = vec![0.0; in_dim];
                for r in 0..hd {
                    let dz1 = da[r] * (1.0 - act[r] * act[r]);
                    if dz1 == 0.0 {
                        continue;
                    }
                    grad.b1[r] += dz1;
                    let w_row = &self.params.w1[r * in_dim..(r + 1) * in_dim];
                    let g_row = &mut grad.w1[r * in_dim..(r + 1) * in_dim];
                    for q in 0..in_dim {
                        g_row[q] += dz1 * s[q];
                        ds[q] += dz1 * w_row[q];
                    }
                }
                if let Some(m) = &mask {
                    ds.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
                }
                for k in 0..d {
                    let (a, b, diff, prod) = (ds[k], ds[d + k], ds[2 * d + k], ds[3 * d + k]);
                    dh[span.start][k] += a + diff + prod * hj[k];
                    dh[span.end][k] += b - diff + prod * hi[k];
                }
            }

            if let Some(rows) = &enc.rows {
                let n = sentence.len();
                let w = self.context_window;
                for (i, g) in dh.iter().enumerate() {
                    let lo = i.saturating_sub(w);
                    let hi = (i + w).min(n - 1);
                    let inv = 1.0 / (hi - lo + 1) as f64;
                    for &row in &rows[lo..=hi] {
                        let dst = &mut grad.embed[row * d..(row + 1) * d];
                        for k in 0..d {
                            dst[k] += g[k] * inv;
                        }
                    }
                }
            }
        }
        Ok((loss, grad))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sentence(id: usize, tokens: &[&str]) -> Sentence {
        Sentence {
            id,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            observed: vec![Tag::O; tokens.len()],
            gold: None,
        }
    }

    fn small_model(labels: &[&str], seed: u64) -> SpanClassifier {
        let ls = LabelSpace::new(labels.iter().copied()).unwrap();
        let vocab = Vocab::from_tokens(["a", "b", "c", "d"]);
        let cfg = ModelConfig {
            embed_dim: 3,
            hidden_dim: 5,
            context_window: 1,
            dropout: 0.0,
        };
        SpanClassifier::new(ls, EmbeddingProvider::TrainableTable(vocab), &cfg, seed).unwrap()
    }

    #[test]
    fn span_repr_examples() {
        let e = [0.5, -2.0];
        assert_eq!(span_repr(&e, &e).unwrap(), vec![0.5, -2.0, 0.5, -2.0, 0.0, 0.0, 0.25, 4.0]);
        assert_eq!(
            span_repr(&[1.0, 0.0], &[0.0, 2.0]).unwrap(),
            vec![1.0, 0.0, 0.0, 2.0, 1.0, -2.0, 0.0, 0.0]
        );
        assert!(span_repr(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn span_repr_blocks_recover_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let d = rng.gen_range(1..10);
            let hi: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let hj: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let s = span_repr(&hi, &hj).unwrap();
            assert_eq!(s.len(), 4 * d);
            assert_eq!(&s[..d], &hi[..]);
            assert_eq!(&s[d..2 * d], &hj[..]);
            for k in 0..d {
                assert!((s[2 * d + k] + hj[k] - hi[k]).abs() <= 1e-15 * hi[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut m = small_model(&["PER", "LOC", "ORG", "MISC"], 3);
        m.params.w2.iter_mut().for_each(|w| *w = 0.0);
        m.params.b2.iter_mut().for_each(|w| *w = 0.0);
        let s = sentence(0, &["a", "b", "zzz"]);
        for p in m.forward(&s, &[(0, 0), (0, 2), (1, 2)]).unwrap() {
            for &x in &p.probs {
                assert!((x - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forward_matches_hand_calculation() {
        // d = 1 embeddings, hidden 2, classes 2, window 0.
        let ls = LabelSpace::new(["PER"]).unwrap();
        let vocab = Vocab::from_tokens(["x", "y"]);
        let params = ClassifierParams {
            embed: vec![0.0, 1.0, 2.0],
            w1: vec![0.1, 0.2, 0.3, 0.4, -0.5, 0.0, 0.5, 1.0],
            b1: vec![0.0, 0.1],
            w2: vec![1.0, -1.0, 0.5, 2.0],
            b2: vec![0.0, -0.5],
        };
        let m = SpanClassifier::from_parts(ls, EmbeddingProvider::TrainableTable(vocab), 1, 2, 0, params).unwrap();
        let s = sentence(0, &["x", "y"]);
        let p = m.forward(&s, &[(0, 1)]).unwrap();
        // h = [1, 2]; s = [1, 2, -1, 2]
        let a0 = (0.1 * 1.0 + 0.2 * 2.0 + 0.3 * -1.0 + 0.4 * 2.0_f64).tanh();
        let a1 = (0.1 + -0.5 * 1.0 + 0.0 * 2.0 + 0.5 * -1.0 + 1.0 * 2.0_f64).tanh();
        let z0 = a0 - a1;
        let z1 = -0.5 + 0.5 * a0 + 2.0 * a1;
        let p1 = 1.0 / (1.0 + (z0 - z1).exp());
        assert!((p[0].probs[1] - p1).abs() < 1e-14);
        assert!((p[0].probs[0] - (1.0 - p1)).abs() < 1e-14);
        assert!(m.forward(&s, &[(1, 2)]).is_err());
    }

    #[test]
    fn fast_path_matches_forward() {
        let m = small_model(&["PER", "LOC"], 9);
        let s = sentence(0, &["a", "b", "c", "d", "a", "q"]);
        let all = m.predict_all(&s, 4).unwrap();
        let spans: Vec<(usize, usize)> = all.iter().map(|p| (p.start, p.end)).collect();
        assert_eq!(spans.len(), 6 + 5 + 4 + 3);
        let slow = m.forward(&s, &spans).unwrap();
        for (a, b) in all.iter().zip(&slow) {
            for (x, y) in a.probs.iter().zip(&b.probs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn loss_values() {
        let mut m = small_model(&["A", "B", "C", "D"], 2);
        m.params.w2.iter_mut().for_each(|w| *w = 0.0);
        m.params.b2.iter_mut().for_each(|w| *w = 0.0);
        let s = sentence(0, &["a", "b"]);
        let batch = [SentenceInstances {
            sentence: &s,
            targets: vec![LabeledSpan::new(0, 1, ClassId(3))],
            dropout_seed: 0,
        }];
        let (loss, _) = m.loss_and_grad(&batch, 0.0).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);

        m.params.b2 = vec![0.0, 0.0, 0.0, 800.0, 0.0];
        let (loss, _) = m.loss_and_grad(&batch, 0.0).unwrap();
        assert_eq!(loss, 0.0);

        let bad = [SentenceInstances {
            sentence: &s,
            targets: vec![LabeledSpan::new(0, 1, ClassId(5))],
            dropout_seed: 0,
        }];
        assert!(matches!(m.loss_and_grad(&bad, 0.0), Err(Error::UnknownLabel(_))));
        let empty: [SentenceInstances<'_>; 0] = [];
        assert!(m.loss_and_grad(&empty, 0.0).is_err());
    }

    #[test]
    fn dropout_is_seeded() {
        let m = small_model(&["A"], 4);
        let s = sentence(0, &["a", "b", "c"]);
        let mk = |seed| {
            [SentenceInstances {
                sentence: &s,
                targets: vec![LabeledSpan::new(0, 2, ClassId(1)), LabeledSpan::new(1, 1, ClassId::O)],
                dropout_seed: seed,
            }]
        };
        let a = m.loss_and_grad(&mk(1), 0.2).unwrap();
        let b = m.loss_and_grad(&mk(1), 0.2).unwrap();
        let c = m.loss_and_grad(&mk(2), 0.2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }
}
