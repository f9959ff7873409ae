use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of span JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub sentence_id: usize,
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub fn write_span_jsonl<W: Write>(mut out: W, records: &[SpanRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_span_jsonl<R: BufRead>(input: R) -> Result<Vec<SpanRecord>> {
    let mut records = Vec::new();
    for (ix, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SpanRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: ix + 1,
            message: e.to_string(),
        })?;
        if record.start > record.end {
            return Err(Error::Parse {
                line: ix + 1,
                message: format!("start {} after end {}", record.start, record.end),
            });
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names_are_exact() {
        let r = SpanRecord {
            sentence_id: 3,
            start: 1,
            end: 2,
            label: "PER".into(),
            score: Some(0.5),
            reason: None,
        };
        let mut buf = Vec::new();
        write_span_jsonl(&mut buf, std::slice::from_ref(&r)).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "{\"sentence_id\":3,\"start\":1,\"end\":2,\"label\":\"PER\",\"score\":0.5}\n"
        );
        assert_eq!(read_span_jsonl(&buf[..]).unwrap(), vec![r]);
    }

    #[test]
    fn rejects_inverted_span() {
        let text = "{\"sentence_id\":0,\"start\":3,\"end\":2,\"label\":\"PER\"}\n";
        assert!(read_span_jsonl(text.as_bytes()).is_err());
    }
}
