//! Dataset, split and train-log files.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use snoic_core::corpus::{Dataset, LabeledExample, SplitSpec};
use snoic_core::trainer::{Stage, TrainLog};

use crate::error::{Error, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &to_json_bytes(value))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// Reads a JSON-Lines dataset of `{"text": ..., "label": ...}` objects.
/// Blank lines are skipped; errors cite the 1-based line number.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut examples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |message: String| Error::Line { path: path.to_path_buf(), line: i + 1, message };
        let ex: LabeledExample = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        ex.validate().map_err(|e| at(e.to_string()))?;
        examples.push(ex);
    }
    Ok(Dataset::new(examples)?)
}

pub fn dataset_to_jsonl(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    for ex in ds.examples() {
        serde_json::to_writer(&mut out, ex).expect("serializable example");
        out.push(b'\n');
    }
    out
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_bytes(path, &dataset_to_jsonl(ds))
}

pub fn load_split(path: &Path) -> Result<SplitSpec> {
    let spec: SplitSpec = read_json(path)?;
    spec.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(spec)
}

pub fn save_split(path: &Path, spec: &SplitSpec) -> Result<()> {
    write_json(path, spec)
}

/// Hex SHA-256 of the compact JSON form of a split.
pub fn split_digest(spec: &SplitSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("serializable split");
    hex::encode(Sha256::digest(&bytes))
}

/// One line of a train log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub variant: String,
    pub stage: Stage,
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_metric: f64,
    pub best: bool,
    pub train_examples: usize,
    pub val_examples: usize,
    /// Training examples per known class, ids 1..M in order.
    pub train_class_counts: Vec<usize>,
}

/// Dataset sizes repeated on every log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogContext {
    pub variant: String,
    pub train_examples: usize,
    pub val_examples: usize,
    pub train_class_counts: Vec<usize>,
}

pub fn log_lines(log: &TrainLog, ctx: &LogContext) -> Vec<LogLine> {
    log.records
        .iter()
        .map(|r| LogLine {
            variant: ctx.variant.clone(),
            stage: r.stage,
            epoch: r.epoch,
            mean_loss: r.mean_loss,
            val_metric: r.val_metric,
            best: r.best,
            train_examples: ctx.train_examples,
            val_examples: ctx.val_examples,
            train_class_counts: ctx.train_class_counts.clone(),
        })
        .collect()
}

pub fn save_log(path: &Path, lines: &[LogLine]) -> Result<()> {
    let mut out = Vec::new();
    for line in lines {
        serde_json::to_writer(&mut out, line).expect("serializable log line");
        out.write_all(b"\n").expect("in-memory write");
    }
    write_bytes(path, &out)
}

pub fn load_log(path: &Path) -> Result<Vec<LogLine>> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Line { path: path.to_path_buf(), line: i + 1, message: e.to_string() })
        })
        .collect()
}
