//! Per-example confidence and uncertainty scores, and per-task mean confidence.
//!
//! Confidence is the probability of the generated sequence, taken as the
//! product over positions of the first (realized) entry. It is accumulated as
//! a sum of logarithms and only exponentiated when a raw value is requested.

use crate::pool_io::{Pool, PromptRecord, TaskPartition, PROB_SUM_SLACK};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Lower bound applied to task confidences before they are inverted.
pub const CONF_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("empty token sequence")]
    EmptySequence,
    #[error("realized-token probability is zero at position {0}")]
    DegenerateProbability(usize),
    #[error("position {0} has fewer than two candidate tokens")]
    InsufficientCandidates(usize),
    #[error("position {position} is not a valid distribution (sum {sum})")]
    InvalidDistribution { position: usize, sum: f64 },
    #[error("record {id:?} has neither a confidence nor token probabilities")]
    MissingConfidence { id: String },
    #[error("record {id:?}: {source}")]
    Record {
        id: String,
        #[source]
        source: Box<ScoreError>,
    },
    #[error("scores cache: {0}")]
    Cache(String),
}

/// Log of the sequence probability.
pub fn log_confidence(token_probs: &[Vec<f64>]) -> Result<f64, ScoreError> {
    if token_probs.is_empty() {
        return Err(ScoreError::EmptySequence);
    }
    let mut acc = 0.0;
    for (j, pos) in token_probs.iter().enumerate() {
        match pos.first() {
            Some(&p) if p > 0.0 => acc += p.ln(),
            _ => return Err(ScoreError::DegenerateProbability(j)),
        }
    }
    Ok(acc)
}

/// Sequence probability in (0, 1].
pub fn confidence(token_probs: &[Vec<f64>]) -> Result<f64, ScoreError> {
    log_confidence(token_probs).map(f64::exp)
}

/// Average Shannon entropy (natural log) over positions, `0 log 0 = 0`.
/// Truncated distributions are scored over the entries provided.
pub fn mean_entropy(token_probs: &[Vec<f64>]) -> Result<f64, ScoreError> {
    if token_probs.is_empty() {
        return Err(ScoreError::EmptySequence);
    }
    let mut total = 0.0;
    for (j, pos) in token_probs.iter().enumerate() {
        let sum: f64 = pos.iter().sum();
        if sum > 1.0 + PROB_SUM_SLACK {
            return Err(ScoreError::InvalidDistribution { position: j, sum });
        }
        total += pos
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum::<f64>();
    }
    Ok((total / token_probs.len() as f64).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    pub mean: f64,
    pub min: f64,
}

/// Mean and minimum over positions of the top-two probability gap.
pub fn margins(token_probs: &[Vec<f64>]) -> Result<Margins, ScoreError> {
    if token_probs.is_empty() {
        return Err(ScoreError::EmptySequence);
    }
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for (j, pos) in token_probs.iter().enumerate() {
        if pos.len() < 2 {
            return Err(ScoreError::InsufficientCandidates(j));
        }
        let gap = pos[0] - pos[1];
        sum += gap;
        min = min.min(gap);
    }
    let mean = sum / token_probs.len() as f64;
    // keep min <= mean despite summation rounding
    Ok(Margins {
        mean: mean.max(min),
        min,
    })
}

/// Scores for one example; each is `None` when its inputs are absent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExampleScores {
    log_confidence: Option<f64>,
    confidence: Option<f64>,
    mean_entropy: Option<f64>,
    margins: Option<Margins>,
}

impl ExampleScores {
    /// Score a record. A precomputed `confidence` field takes precedence over
    /// the token trace. Margins are left empty when some position has a single
    /// candidate.
    pub fn from_record(record: &PromptRecord) -> Result<Self, ScoreError> {
        let wrap = |e: ScoreError| ScoreError::Record {
            id: record.id.clone(),
            source: Box::new(e),
        };
        let mut out = Self::default();
        if let Some(c) = record.confidence {
            out.confidence = Some(c);
            out.log_confidence = Some(c.ln());
        }
        if let Some(tp) = &record.token_probs {
            if out.confidence.is_none() {
                let lc = log_confidence(tp).map_err(wrap)?;
                out.log_confidence = Some(lc);
                out.confidence = Some(lc.exp());
            }
            out.mean_entropy = Some(mean_entropy(tp).map_err(wrap)?);
            out.margins = match margins(tp) {
                Ok(m) => Some(m),
                Err(ScoreError::InsufficientCandidates(_)) => None,
                Err(e) => return Err(wrap(e)),
            };
        }
        Ok(out)
    }

    /// Raw confidence in (0, 1]. May underflow to zero for very long
    /// sequences; rank by [`Self::log_confidence`] instead.
    pub fn confidence(&self) -> Option<f64> {
        self.confidence
    }

    pub fn log_confidence(&self) -> Option<f64> {
        self.log_confidence
    }

    pub fn mean_entropy(&self) -> Option<f64> {
        self.mean_entropy
    }

    pub fn mean_margin(&self) -> Option<f64> {
        self.margins.map(|m| m.mean)
    }

    pub fn min_margin(&self) -> Option<f64> {
        self.margins.map(|m| m.min)
    }
}

/// Score every record of the pool, in pool order.
pub fn score_pool(pool: &Pool) -> Result<Vec<ExampleScores>, ScoreError> {
    pool.records()
        .par_iter()
        .map(ExampleScores::from_record)
        .collect()
}

/// Mean raw confidence per task, aligned with the partition's task order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfidence {
    values: Vec<f64>,
}

impl TaskConfidence {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values floored at [`CONF_FLOOR`], ready for inversion.
    pub fn floored(&self) -> Vec<f64> {
        self.values.iter().map(|&c| c.max(CONF_FLOOR)).collect()
    }
}

/// Task confidence computed straight from pool records.
pub fn task_mean_confidence(pool: &Pool, partition: &TaskPartition) -> Result<TaskConfidence, ScoreError> {
    let mut values = Vec::with_capacity(partition.num_tasks());
    for t in 0..partition.num_tasks() {
        let mut sum = 0.0;
        for &i in partition.members(t) {
            let r = pool.record(i);
            let c = match (r.confidence, &r.token_probs) {
                (Some(c), _) => c,
                (None, Some(tp)) => confidence(tp).map_err(|e| ScoreError::Record {
                    id: r.id.clone(),
                    source: Box::new(e),
                })?,
                (None, None) => return Err(ScoreError::MissingConfidence { id: r.id.clone() }),
            };
            sum += c;
        }
        values.push(sum / partition.counts()[t] as f64);
    }
    Ok(TaskConfidence { values })
}

/// Task confidence from already computed per-example scores.
pub fn task_mean_confidence_from_scores(
    pool: &Pool,
    scores: &[ExampleScores],
    partition: &TaskPartition,
) -> Result<TaskConfidence, ScoreError> {
    let mut values = Vec::with_capacity(partition.num_tasks());
    for t in 0..partition.num_tasks() {
        let mut sum = 0.0;
        for &i in partition.members(t) {
            sum += scores[i].confidence().ok_or_else(|| ScoreError::MissingConfidence {
                id: pool.id(i).to_string(),
            })?;
        }
        values.push(sum / partition.counts()[t] as f64);
    }
    Ok(TaskConfidence { values })
}

/// One line of the scores cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Kept alongside `confidence`, which can underflow to 0 for long sequences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_margin: Option<f64>,
}

pub fn write_scores<W: Write>(pool: &Pool, scores: &[ExampleScores], mut out: W) -> std::io::Result<()> {
    for (i, s) in scores.iter().enumerate() {
        let rec = ScoreRecord {
            id: pool.id(i).to_string(),
            confidence: s.confidence(),
            log_confidence: s.log_confidence(),
            mean_entropy: s.mean_entropy(),
            mean_margin: s.mean_margin(),
            min_margin: s.min_margin(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Read a scores cache and align it with the pool; ids must match line for line.
pub fn read_scores<R: BufRead>(pool: &Pool, reader: R) -> Result<Vec<ExampleScores>, ScoreError> {
    let mut out = Vec::with_capacity(pool.len());
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ScoreError::Cache(e.to_string()))?;
        let rec: ScoreRecord = serde_json::from_str(&line)
            .map_err(|e| ScoreError::Cache(format!("line {}: {e}", i + 1)))?;
        if i >= pool.len() || rec.id != pool.id(i) {
            return Err(ScoreError::Cache(format!(
                "line {}: id {:?} does not match the pool",
                i + 1,
                rec.id
            )));
        }
        let margins = match (rec.mean_margin, rec.min_margin) {
            (Some(mean), Some(min)) => Some(Margins { mean, min }),
            _ => None,
        };
        out.push(ExampleScores {
            log_confidence: rec.log_confidence.or(rec.confidence.map(f64::ln)),
            confidence: rec.confidence,
            mean_entropy: rec.mean_entropy,
            margins,
        });
    }
    if out.len() != pool.len() {
        return Err(ScoreError::Cache(format!(
            "cache has {} records, pool has {}",
            out.len(),
            pool.len()
        )));
    }
    Ok(out)
}
