//! Versioned flat binary checkpoint.
//!
//! ```text
//! magic "DSNRCKPT" | version u32 | embed_dim u64 | hidden_dim u64
//! | num_entity_labels u64 | vocab_size u64 | context_window u64
//! | labels (u32 len + utf8)* | vocab tokens (u32 len + utf8)*
//! | tensors embed, w1, b1, w2, b2 (u64 len + f64*)
//! ```
//!
//! All integers and floats are little-endian. `vocab_size` is 0 for
//! file-backed embeddings, whose vectors are supplied again at load time.

use std::io::{Read, Write};

use super::{ClassifierParams, EmbeddingProvider, FrozenVectors, SpanClassifier, Vocab, UNK};
use crate::corpus::LabelSpace;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DSNRCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint<W: Write>(model: &SpanClassifier, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let vocab = match model.embeddings() {
        EmbeddingProvider::TrainableTable(v) => Some(v),
        EmbeddingProvider::FileBacked(_) => None,
    };
    for v in [
        model.embed_dim(),
        model.hidden_dim(),
        model.labels().num_entity_labels(),
        vocab.map_or(0, Vocab::len),
        model.context_window(),
    ] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for label in model.labels().entity_labels() {
        write_str(&mut out, label)?;
    }
    if let Some(v) = vocab {
        for t in v.tokens() {
            write_str(&mut out, t)?;
        }
    }
    for (_, tensor) in model.params.tensors() {
        out.write_all(&(tensor.len() as u64).to_le_bytes())?;
        for x in tensor {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// `frozen` must be given exactly when the checkpoint was written from a
/// file-backed model.
pub fn load_checkpoint<R: Read>(mut input: R, frozen: Option<FrozenVectors>) -> Result<SpanClassifier> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let embed_dim = read_len(&mut input)?;
    let hidden_dim = read_len(&mut input)?;
    let num_labels = read_len(&mut input)?;
    let vocab_size = read_len(&mut input)?;
    let context_window = read_len(&mut input)?;
    let labels = LabelSpace::new((0..num_labels).map(|_| read_str(&mut input)).collect::<Result<Vec<_>>>()?)?;
    let embeddings = if vocab_size > 0 {
        if frozen.is_some() {
            return Err(Error::Checkpoint("checkpoint has a trainable table; frozen vectors not expected".into()));
        }
        let tokens = (0..vocab_size).map(|_| read_str(&mut input)).collect::<Result<Vec<_>>>()?;
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(Error::Checkpoint("vocabulary does not start with the unknown row".into()));
        }
        let vocab = Vocab::from_tokens(&tokens[1..]);
        if vocab.len() != vocab_size {
            return Err(Error::Checkpoint("duplicate vocabulary entries".into()));
        }
        EmbeddingProvider::TrainableTable(vocab)
    } else {
        EmbeddingProvider::FileBacked(
            frozen.ok_or_else(|| Error::Checkpoint("file-backed checkpoint needs its vectors".into()))?,
        )
    };
    let mut tensors = Vec::with_capacity(5);
    for _ in 0..5 {
        let len = read_len(&mut input)?;
        let mut bytes = vec![0u8; len * 8];
        input.read_exact(&mut bytes)?;
        tensors.push(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect::<Vec<f64>>(),
        );
    }
    let mut it = tensors.into_iter();
    let params = ClassifierParams {
        embed: it.next().unwrap_or_default(),
        w1: it.next().unwrap_or_default(),
        b1: it.next().unwrap_or_default(),
        w2: it.next().unwrap_or_default(),
        b2: it.next().unwrap_or_default(),
    };
    SpanClassifier::from_parts(labels, embeddings, embed_dim, hidden_dim, context_window, params)
}

fn write_str<W: Write>(out: &mut W, s: &str) -> Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_len<R: Read>(input: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Checkpoint("length overflow".into()))
}

fn read_str<R: Read>(input: &mut R) -> Result<String> {
    let len = read_u32(input)? as usize;
    let mut b = vec![0u8; len];
    input.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Checkpoint("invalid utf-8".into()))
}
