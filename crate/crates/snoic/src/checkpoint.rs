//! Checkpoint files: one JSON header line followed by every tensor as
//! little-endian f32, row-major, in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use snoic_core::corpus::Vocab;
use snoic_core::encoder::{tensor_layout, EncoderConfig, EncoderParams};
use snoic_core::trainer::{Model, Stage};
use snoic_core::Matrix;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::io;

/// Provenance of a checkpoint written by the experiment runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub stage: Stage,
    pub variant: String,
    pub split_digest: String,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub names: Vec<String>,
    pub shapes: Vec<[usize; 2]>,
    pub dtype: String,
    #[serde(rename = "M")]
    pub num_known: usize,
    pub config: EncoderConfig,
    pub vocab: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub run: Option<RunInfo>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.model.params;
        let tensors = p.tensors();
        let header = Header {
            names: tensors.iter().map(|(n, _)| n.clone()).collect(),
            shapes: tensors.iter().map(|(_, t)| [t.rows(), t.cols()]).collect(),
            dtype: "f32".into(),
            num_known: p.num_known,
            config: p.config.clone(),
            vocab: self.model.vocab.tokens().to_vec(),
            run: self.run.clone(),
        };
        let mut out = serde_json::to_vec(&header).expect("serializable header");
        out.push(b'\n');
        for (_, t) in &tensors {
            for v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(path, m);
        let newline =
            bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("checkpoint header is not terminated".into()))?;
        let header: Header =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| bad(format!("bad checkpoint header: {e}")))?;
        if header.dtype != "f32" {
            return Err(bad(format!("unsupported dtype {}", header.dtype)));
        }
        let layout = tensor_layout(&header.config, header.num_known);
        if header.names.len() != layout.len() || header.shapes.len() != layout.len() {
            return Err(bad(format!(
                "header lists {} tensors but the config with M={} needs {}",
                header.names.len(),
                header.num_known,
                layout.len()
            )));
        }
        for ((name, shape), (want_name, (r, c), _)) in header.names.iter().zip(&header.shapes).zip(&layout) {
            if name != want_name || *shape != [*r, *c] {
                return Err(bad(format!(
                    "tensor {name} {shape:?} does not match {want_name} [{r}, {c}] for M={} (head width {})",
                    header.num_known,
                    header.num_known + 1
                )));
            }
        }
        let payload = &bytes[newline + 1..];
        let expected: usize = layout.iter().map(|(_, (r, c), _)| r * c * 4).sum();
        if payload.len() != expected {
            return Err(bad(format!("payload has {} bytes, expected {expected}", payload.len())));
        }
        let mut offset = 0;
        let mut tensors = Vec::with_capacity(layout.len());
        for (_, (r, c), _) in &layout {
            let n = r * c;
            let data = payload[offset..offset + 4 * n]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            offset += 4 * n;
            tensors.push(Matrix::from_vec(*r, *c, data));
        }
        let params = EncoderParams::from_tensors(header.config, header.num_known, tensors)?;
        let vocab = Vocab::from_tokens(header.vocab)?;
        Ok(Self { model: Model::new(vocab, params)?, run: header.run })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    io::write_bytes(path, &ckpt.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&io::read_bytes(path)?, path)
}
