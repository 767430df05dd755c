//! Versioned plain-text checkpoints.
//!
//! ```text
//! SSLSTM-CKPT 1
//! meta key=value
//! ...
//! vocab N            (optional; N lines follow, one entry each)
//! tensor NAME ROWS COLS
//! <ROWS lines of COLS space-separated floats>
//! ...
//! end
//! ```
//!
//! Embedding tables are not stored; the checkpoint records their content
//! hashes and [`load_checkpoint`] verifies the tables it is given.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::neural::{Channel, Channels, Dense, LstmParams, Matrix, ModelConfig, SsLstm};
use crate::text_norm::EmoticonLexicon;

pub const CHECKPOINT_MAGIC: &str = "SSLSTM-CKPT 1";
const WHAT: &str = "checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// The model-agnostic layer of the format.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointContainer {
    pub meta: Vec<(String, String)>,
    pub vocab: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl CheckpointContainer {
    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, rows: usize, cols: usize, data: &[f64]) {
        self.tensors.push(Tensor {
            name: name.into(),
            rows,
            cols,
            data: data.to_vec(),
        });
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.meta(key)
            .ok_or_else(|| Error::format(WHAT, 0, format!("missing meta key {key:?}")))
    }

    pub fn parse_meta<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::format(WHAT, 0, format!("bad value {v:?} for meta key {key:?}")))
    }

    /// Removes and returns the named tensor, checking its shape.
    pub fn take_tensor(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let i = self
            .tensors
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::ShapeMismatch(format!("tensor {name} missing")))?;
        let t = self.tensors.remove(i);
        if (t.rows, t.cols) != (rows, cols) {
            return Err(Error::ShapeMismatch(format!(
                "tensor {name} is {}x{}, expected {rows}x{cols}",
                t.rows, t.cols
            )));
        }
        Ok(t.data)
    }

    /// Errors if tensors remain that no reader claimed.
    pub fn finish(&self) -> Result<()> {
        match self.tensors.first() {
            Some(t) => Err(Error::ShapeMismatch(format!("unexpected tensor {}", t.name))),
            None => Ok(()),
        }
    }

    pub fn write(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "{CHECKPOINT_MAGIC}")?;
        for (k, v) in &self.meta {
            if k.contains(['=', '\n', ' ']) || v.contains('\n') {
                return Err(Error::Config(format!("meta entry {k:?} cannot be written")));
            }
            writeln!(sink, "meta {k}={v}")?;
        }
        writeln!(sink, "meta tensors={}", self.tensors.len())?;
        if !self.vocab.is_empty() {
            writeln!(sink, "vocab {}", self.vocab.len())?;
            for v in &self.vocab {
                if v.is_empty() || v.contains('\n') {
                    return Err(Error::Config(format!("vocabulary entry {v:?} cannot be written")));
                }
                writeln!(sink, "{v}")?;
            }
        }
        for t in &self.tensors {
            debug_assert_eq!(t.data.len(), t.rows * t.cols);
            writeln!(sink, "tensor {} {} {}", t.name, t.rows, t.cols)?;
            for r in 0..t.rows {
                let row: Vec<String> = t.data[r * t.cols..(r + 1) * t.cols].iter().map(|x| format!("{x:.8e}")).collect();
                writeln!(sink, "{}", row.join(" "))?;
            }
        }
        writeln!(sink, "end")?;
        sink.flush()?;
        Ok(())
    }

    pub fn read(source: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(source).lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, l)) => Ok((n, l?.trim_end_matches('\r').to_string())),
                None => Err(Error::Truncated(format!("file ended while reading {expect}"))),
            }
        };
        let (_, header) = next("the header")?;
        if header != CHECKPOINT_MAGIC {
            return Err(Error::UnknownVersion(header));
        }
        let mut c = CheckpointContainer::default();
        let mut declared: Option<usize> = None;
        loop {
            let (n, line) = next("the next block")?;
            if let Some(kv) = line.strip_prefix("meta ") {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::format(WHAT, n, "meta line without '='"))?;
                if k == "tensors" {
                    declared = Some(v.parse().map_err(|_| Error::format(WHAT, n, "bad tensor count"))?);
                } else {
                    c.meta.push((k.to_string(), v.to_string()));
                }
            } else if let Some(count) = line.strip_prefix("vocab ") {
                let count: usize = count.parse().map_err(|_| Error::format(WHAT, n, "bad vocabulary size"))?;
                for _ in 0..count {
                    c.vocab.push(next("the vocabulary")?.1);
                }
            } else if let Some(spec) = line.strip_prefix("tensor ") {
                let parts: Vec<&str> = spec.split(' ').collect();
                let [name, rows, cols] = parts[..] else {
                    return Err(Error::format(WHAT, n, "tensor line needs NAME ROWS COLS"));
                };
                let (rows, cols): (usize, usize) = match (rows.parse(), cols.parse()) {
                    (Ok(r), Ok(c)) => (r, c),
                    _ => return Err(Error::format(WHAT, n, "bad tensor dimensions")),
                };
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (n, row) = next(&format!("tensor {name}"))?;
                    let before = data.len();
                    for field in row.split_whitespace() {
                        let x: f64 = field
                            .parse()
                            .map_err(|_| Error::format(WHAT, n, format!("bad number {field:?}")))?;
                        data.push(x);
                    }
                    if data.len() - before != cols {
                        return Err(Error::format(
                            WHAT,
                            n,
                            format!("row of tensor {name} has {} values, expected {cols}", data.len() - before),
                        ));
                    }
                }
                c.tensors.push(Tensor {
                    name: name.to_string(),
                    rows,
                    cols,
                    data,
                });
            } else if line == "end" {
                break;
            } else {
                return Err(Error::format(WHAT, n, format!("unexpected line {line:?}")));
            }
        }
        match declared {
            Some(d) if d != c.tensors.len() => Err(Error::Truncated(format!(
                "header declares {d} tensors, file holds {}",
                c.tensors.len()
            ))),
            None => Err(Error::format(WHAT, 0, "missing tensor count")),
            _ => Ok(c),
        }
    }
}

pub fn read_container(source: impl Read) -> Result<CheckpointContainer> {
    CheckpointContainer::read(source)
}

/// Writes `model` with its configuration and the hashes of its embedding
/// tables and of `lexicon`.
pub fn save_checkpoint(model: &SsLstm, lexicon: &EmoticonLexicon, sink: impl Write) -> Result<()> {
    model.check()?;
    let cfg = &model.config;
    let mut c = CheckpointContainer::default();
    c.push_meta("model", "sslstm");
    c.push_meta("channels", cfg.channels);
    c.push_meta("semantic_hidden", cfg.semantic_hidden);
    c.push_meta("sentiment_hidden", cfg.sentiment_hidden);
    c.push_meta("fc_hidden", cfg.fc_hidden);
    c.push_meta("activation", cfg.activation);
    c.push_meta("max_seq_len", cfg.max_seq_len);
    c.push_meta("fine_tune_embeddings", cfg.fine_tune_embeddings);
    for (name, ch, on) in [
        ("semantic", &model.semantic, cfg.channels.semantic()),
        ("sentiment", &model.sentiment, cfg.channels.sentiment()),
    ] {
        if let Some(ch) = ch.as_ref().filter(|_| on) {
            c.push_meta(&format!("{name}_dim"), ch.table.dim());
            c.push_meta(&format!("{name}_embeddings"), ch.table.content_hash());
        }
    }
    c.push_meta("lexicon", lexicon.content_hash());
    for (name, rows, cols, data) in model.tensors() {
        c.push_tensor(name, rows, cols, data);
    }
    c.write(sink)
}

#[derive(Debug, Clone)]
pub struct LoadedCheckpoint {
    pub model: SsLstm,
    /// Hash of the emoticon lexicon the model was trained with.
    pub lexicon_hash: String,
}

/// Rebuilds a model saved by [`save_checkpoint`]. Tables for the active
/// channels must be supplied and must hash to the recorded values.
pub fn load_checkpoint(
    source: impl Read,
    semantic: Option<Arc<EmbeddingTable>>,
    sentiment: Option<Arc<EmbeddingTable>>,
) -> Result<LoadedCheckpoint> {
    let mut c = CheckpointContainer::read(source)?;
    let kind = c.require("model")?;
    if kind != "sslstm" {
        return Err(Error::format(WHAT, 0, format!("checkpoint holds a {kind} model, not sslstm")));
    }
    let config = ModelConfig {
        channels: c.parse_meta::<Channels>("channels")?,
        semantic_hidden: c.parse_meta("semantic_hidden")?,
        sentiment_hidden: c.parse_meta("sentiment_hidden")?,
        fc_hidden: c.parse_meta("fc_hidden")?,
        activation: c.parse_meta("activation")?,
        max_seq_len: c.parse_meta("max_seq_len")?,
        fine_tune_embeddings: c.parse_meta("fine_tune_embeddings")?,
    };
    let lexicon_hash = c.require("lexicon")?.to_string();

    let mut channel = |name: &str, on: bool, hidden: usize, table: Option<Arc<EmbeddingTable>>| -> Result<Option<Channel>> {
        if !on {
            return Ok(None);
        }
        let table = table.ok_or_else(|| Error::Config(format!("checkpoint needs {name} embeddings")))?;
        let dim: usize = c.parse_meta(&format!("{name}_dim"))?;
        if dim != table.dim() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: table.dim(),
            });
        }
        let want = c.require(&format!("{name}_embeddings"))?;
        if want != table.content_hash() {
            return Err(Error::format(
                WHAT,
                0,
                format!("{name} embeddings {:?} differ from the table the model was trained with", table.name()),
            ));
        }
        let mut lstm = LstmParams::zeros(dim, hidden);
        let shapes: Vec<(String, usize, usize)> = lstm.tensors().iter().map(|t| (t.0.to_string(), t.1, t.2)).collect();
        for ((n, r, cols), dst) in shapes.into_iter().zip(lstm.tensors_mut()) {
            dst.copy_from_slice(&c.take_tensor(&format!("{name}.{n}"), r, cols)?);
        }
        Ok(Some(Channel { table, lstm }))
    };
    let semantic = channel("semantic", config.channels.semantic(), config.semantic_hidden, semantic)?;
    let sentiment = channel("sentiment", config.channels.sentiment(), config.sentiment_hidden, sentiment)?;

    let width = config.feature_width();
    let dense = |c: &mut CheckpointContainer, name: &str, out: usize, inp: usize| -> Result<Dense> {
        Ok(Dense {
            w: Matrix::from_vec(out, inp, c.take_tensor(&format!("{name}.w"), out, inp)?),
            b: c.take_tensor(&format!("{name}.b"), 1, out)?,
        })
    };
    let fc = dense(&mut c, "fc", config.fc_hidden, width)?;
    let out = dense(&mut c, "out", 4, config.fc_hidden)?;
    c.finish()?;
    let model = SsLstm {
        config,
        semantic,
        sentiment,
        fc,
        out,
    };
    model.check()?;
    Ok(LoadedCheckpoint { model, lexicon_hash })
}
