//! Prompt pool loading, validation and task partitioning.
//!
//! A pool file holds one JSON object per line:
//!
//! ```text
//! {"id": "flan-0001", "task": "trivia_qa", "confidence": 0.42}
//! {"id": "flan-0002", "task": "trivia_qa", "token_probs": [[0.9, 0.05], [0.7, 0.2]]}
//! {"id": "flan-0003", "task": "translate/fr-en", "embedding": [0.1, -0.3, 0.7]}
//! ```
//!
//! Embeddings may instead come from a binary sidecar: a 16-byte header of two
//! little-endian `u64` values `(N, d)` followed by `N * d` little-endian `f32`
//! values in row-major order. Inline and sidecar embeddings cannot be mixed.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

/// Slack allowed on the sum of a (possibly truncated) position distribution.
pub const PROB_SUM_SLACK: f64 = 1e-6;

const SIDECAR_HEADER: usize = 16;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first})")]
    DuplicateId { id: String, line: usize, first: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("pool is empty")]
    Empty,
}

/// One element of the prompt pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Per generated position, candidate-token probabilities in descending order.
    /// The first entry is the realized token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probs: Option<Vec<Vec<f64>>>,
}

impl PromptRecord {
    pub fn new(id: impl Into<String>, task: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            task: task.into(),
            embedding: None,
            confidence: None,
            token_probs: None,
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f32>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn with_token_probs(mut self, token_probs: Vec<Vec<f64>>) -> Self {
        self.token_probs = Some(token_probs);
        self
    }
}

/// Pool indices grouped by task label, tasks in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPartition {
    tasks: Vec<String>,
    members: Vec<Vec<usize>>,
    counts: Vec<usize>,
    task_of: Vec<usize>,
}

impl TaskPartition {
    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    pub fn members(&self, task: usize) -> &[usize] {
        &self.members[task]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Task position of pool index `i`.
    pub fn task_of(&self, i: usize) -> usize {
        self.task_of[i]
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.tasks.binary_search_by(|t| t.as_str().cmp(label)).ok()
    }

    /// Realized per-task counts for a list of pool indices.
    pub fn tally(&self, indices: &[usize]) -> Vec<usize> {
        let mut out = vec![0; self.tasks.len()];
        for &i in indices {
            out[self.task_of[i]] += 1;
        }
        out
    }
}

/// Group pool indices by task. Deterministic for a fixed pool: tasks come out
/// in lexicographic order and members in ascending pool index.
pub fn partition_by_task(pool: &Pool) -> TaskPartition {
    build_partition(&pool.records)
}

fn build_partition(records: &[PromptRecord]) -> TaskPartition {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.task.as_str()).or_default().push(i);
    }
    let mut task_of = vec![0; records.len()];
    let mut tasks = Vec::with_capacity(groups.len());
    let mut members = Vec::with_capacity(groups.len());
    for (t, (label, idx)) in groups.into_iter().enumerate() {
        for &i in &idx {
            task_of[i] = t;
        }
        tasks.push(label.to_string());
        members.push(idx);
    }
    let counts = members.iter().map(Vec::len).collect();
    TaskPartition {
        tasks,
        members,
        counts,
        task_of,
    }
}

/// Immutable, validated prompt pool.
#[derive(Debug, Clone)]
pub struct Pool {
    records: Vec<PromptRecord>,
    partition: TaskPartition,
    dim: Option<usize>,
}

impl Pool {
    /// Validate records and build the task partition. Record `i` is reported
    /// as line `i + 1` in errors.
    pub fn from_records(records: Vec<PromptRecord>) -> Result<Self, PoolError> {
        if records.is_empty() {
            return Err(PoolError::Empty);
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        let mut dim: Option<usize> = None;
        for (i, r) in records.iter().enumerate() {
            let line = i + 1;
            if let Some(&first) = seen.get(r.id.as_str()) {
                return Err(PoolError::DuplicateId {
                    id: r.id.clone(),
                    line,
                    first,
                });
            }
            seen.insert(r.id.as_str(), line);
            validate_record(r, line, &mut dim)?;
        }
        let partition = build_partition(&records);
        Ok(Self {
            records,
            partition,
            dim,
        })
    }

    pub fn records(&self) -> &[PromptRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &PromptRecord {
        &self.records[i]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn partition(&self) -> &TaskPartition {
        &self.partition
    }

    /// Embedding dimension, if any record carries one.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn id(&self, i: usize) -> &str {
        &self.records[i].id
    }

    /// Serialize as line-delimited JSON with inline embeddings.
    pub fn write_jsonl<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

fn validate_record(r: &PromptRecord, line: usize, dim: &mut Option<usize>) -> Result<(), PoolError> {
    let invalid = |message: String| PoolError::Validation { line, message };

    if let Some(c) = r.confidence {
        if !(c.is_finite() && c > 0.0 && c <= 1.0) {
            return Err(invalid(format!("confidence {c} outside (0, 1]")));
        }
    }
    if let Some(e) = &r.embedding {
        if e.is_empty() {
            return Err(PoolError::Shape(format!("line {line}: empty embedding")));
        }
        match *dim {
            None => *dim = Some(e.len()),
            Some(d) if d != e.len() => {
                return Err(PoolError::Shape(format!(
                    "line {line}: embedding has dimension {}, expected {d}",
                    e.len()
                )))
            }
            Some(_) => {}
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite embedding value".into()));
        }
    }
    if let Some(tp) = &r.token_probs {
        for (j, pos) in tp.iter().enumerate() {
            if pos.is_empty() {
                return Err(invalid(format!("token_probs position {j} is empty")));
            }
            if let Some(p) = pos.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(invalid(format!(
                    "token_probs position {j}: probability {p} outside [0, 1]"
                )));
            }
            if pos.windows(2).any(|w| w[1] > w[0]) {
                return Err(invalid(format!(
                    "token_probs position {j}: entries are not in descending order"
                )));
            }
            let sum: f64 = pos.iter().sum();
            if sum > 1.0 + PROB_SUM_SLACK {
                return Err(invalid(format!(
                    "token_probs position {j}: probabilities sum to {sum}"
                )));
            }
        }
    }
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PoolError + '_ {
    move |source| PoolError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parse line-delimited records. Blank lines are rejected so that pool index
/// and line number stay aligned.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<PromptRecord>, PoolError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| PoolError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if text.trim().is_empty() {
            return Err(PoolError::Parse {
                line: line_no,
                message: "blank line".into(),
            });
        }
        let record: PromptRecord = serde_json::from_str(&text).map_err(|e| PoolError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Load a pool file and, optionally, an embedding sidecar.
pub fn load_pool(pool_path: &Path, embeddings_path: Option<&Path>) -> Result<Pool, PoolError> {
    let file = fs::File::open(pool_path).map_err(io_err(pool_path))?;
    let mut records = read_records(BufReader::new(file))?;

    if let Some(side) = embeddings_path {
        if let Some(i) = records.iter().position(|r| r.embedding.is_some()) {
            return Err(PoolError::Validation {
                line: i + 1,
                message: "inline embedding present while an embedding sidecar was given".into(),
            });
        }
        let matrix = read_embeddings(side)?;
        if matrix.rows != records.len() {
            return Err(PoolError::Shape(format!(
                "sidecar has {} rows, pool has {} records",
                matrix.rows,
                records.len()
            )));
        }
        for (r, row) in records.iter_mut().zip(matrix.data.chunks_exact(matrix.dim)) {
            r.embedding = Some(row.to_vec());
        }
    }
    Pool::from_records(records)
}

/// Row-major `f32` matrix as stored in the sidecar format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix, PoolError> {
    if bytes.len() < SIDECAR_HEADER {
        return Err(PoolError::Shape(format!(
            "sidecar is {} bytes, shorter than its header",
            bytes.len()
        )));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if dim == 0 {
        return Err(PoolError::Shape("sidecar dimension is zero".into()));
    }
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| usize::try_from(n).ok())
        .and_then(|n| n.checked_add(SIDECAR_HEADER));
    if expected != Some(bytes.len()) {
        return Err(PoolError::Shape(format!(
            "sidecar header says {rows}x{dim} but payload is {} bytes",
            bytes.len() - SIDECAR_HEADER
        )));
    }
    let data: Vec<f32> = bytes[SIDECAR_HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|x| !x.is_finite()) {
        return Err(PoolError::Shape("sidecar contains non-finite values".into()));
    }
    Ok(EmbeddingMatrix {
        rows: rows as usize,
        dim: dim as usize,
        data,
    })
}

pub fn encode_embeddings(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(SIDECAR_HEADER + 4 * matrix.data.len());
    out.extend_from_slice(&(matrix.rows as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.dim as u64).to_le_bytes());
    for x in &matrix.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix, PoolError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_embeddings(&bytes)
}

pub fn write_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), PoolError> {
    fs::write(path, encode_embeddings(matrix)).map_err(io_err(path))
}
