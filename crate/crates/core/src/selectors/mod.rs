//! Subset materialization: round-robin over an allocation, random, top-k
//! uncertainty, and the embedding-based greedy selectors.

mod dpp;
mod facility;
mod k_center;
mod kernel;
mod random;
mod rng;
mod round_robin;
mod strategy;
mod uncertainty;

pub use dpp::{select_dpp, DEFAULT_JITTER};
pub use facility::select_facility_location;
pub use k_center::select_k_center;
pub use kernel::{KernelKind, KernelSpec};
pub use random::select_random;
pub use rng::{stream_rng, TaskSampler};
pub use round_robin::round_robin;
pub use strategy::{run_strategy, run_strategy_with_scores, Strategy, StrategyConfig};
pub use uncertainty::{select_uncertainty, UncertaintyCriterion};

use crate::allocation::{AllocError, AllocationRow};
use crate::pool_io::Pool;
use crate::scoring::ScoreError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Relative tolerance under which two greedy gains count as tied; ties go to
/// the lowest pool index.
pub const TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("budget must be at least 1")]
    InvalidBudget,
    #[error("record {0:?} has no embedding")]
    MissingEmbedding(String),
    #[error("record {id:?} has no {score} score")]
    MissingScore { id: String, score: &'static str },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("kernel matrix lost positive definiteness after {} picks", partial.selected.len())]
    RankExhausted { partial: Box<SelectionResult> },
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Allocation(#[from] AllocError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Strategy name plus the parameters that shaped the selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDescriptor {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl StrategyDescriptor {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Pool indices in selection order.
    pub selected: Vec<usize>,
    /// Realized count per task, aligned with the pool's partition.
    pub per_task: Vec<usize>,
    pub strategy: StrategyDescriptor,
    pub seed: u64,
    /// Objective value after each pick, for the embedding-based selectors.
    pub objective_trace: Option<Vec<f64>>,
    /// Per-task allocation, for the allocation-driven strategies.
    pub allocation: Option<Vec<AllocationRow>>,
    pub warnings: Vec<String>,
}

impl SelectionResult {
    pub(crate) fn new(pool: &Pool, selected: Vec<usize>, strategy: StrategyDescriptor, seed: u64) -> Self {
        let per_task = pool.partition().tally(&selected);
        Self {
            selected,
            per_task,
            strategy,
            seed,
            objective_trace: None,
            allocation: None,
            warnings: Vec::new(),
        }
    }
}

/// Validate the budget and cap it at `n`, recording a warning when capped.
pub(crate) fn capped_budget(budget: usize, n: usize, warnings: &mut Vec<String>) -> Result<usize, SelectError> {
    if budget == 0 {
        return Err(SelectError::InvalidBudget);
    }
    if budget > n {
        warnings.push(format!("budget {budget} exceeds pool size {n}; selecting all {n}"));
    }
    Ok(budget.min(n))
}

/// Tie window around `best` for an objective whose value after the pick is `objective`.
pub(crate) fn tie_window(objective: f64) -> f64 {
    TIE_RTOL * objective.abs().max(1.0)
}

/// Dense row-major `f64` copy of the pool's embeddings.
#[derive(Debug, Clone)]
pub(crate) struct Embeddings {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl Embeddings {
    pub fn from_pool(pool: &Pool) -> Result<Self, SelectError> {
        let d = pool.dim().unwrap_or(0);
        let mut data = Vec::with_capacity(pool.len() * d);
        for r in pool.records() {
            let e = r
                .embedding
                .as_ref()
                .ok_or_else(|| SelectError::MissingEmbedding(r.id.clone()))?;
            data.extend(e.iter().map(|&x| x as f64));
        }
        Ok(Self { n: pool.len(), d, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize without reassociation flags
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
