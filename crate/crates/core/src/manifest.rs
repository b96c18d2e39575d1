//! The selection manifest: a JSON document recording what was selected and
//! every input that shaped the selection.

use crate::allocation::AllocationRow;
use crate::pool_io::Pool;
use crate::selectors::SelectionResult;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed manifest: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("inconsistent manifest: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Files the run read from, echoed so a manifest can be traced to its inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInputs {
    pub pool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores_cache: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCount {
    pub task: String,
    pub selected: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub strategy: String,
    pub params: BTreeMap<String, String>,
    pub inputs: RunInputs,
    pub seed: u64,
    pub budget: usize,
    pub selected_ids: Vec<String>,
    pub per_task: Vec<TaskCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<AllocationRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(pool: &Pool, result: &SelectionResult, budget: usize, inputs: RunInputs) -> Self {
        let partition = pool.partition();
        let per_task = partition
            .tasks()
            .iter()
            .zip(&result.per_task)
            .zip(partition.counts())
            .map(|((task, &selected), &available)| TaskCount {
                task: task.clone(),
                selected,
                available,
            })
            .collect();
        Self {
            strategy: result.strategy.name.clone(),
            params: result.strategy.params.clone(),
            inputs,
            seed: result.seed,
            budget,
            selected_ids: result.selected.iter().map(|&i| pool.id(i).to_string()).collect(),
            per_task,
            allocation: result.allocation.clone(),
            objective_trace: result.objective_trace.clone(),
            warnings: result.warnings.clone(),
        }
    }

    /// Pretty-printed JSON with a trailing newline. Field order is fixed and
    /// maps are sorted, so equal manifests serialize to identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        let m: Manifest = serde_json::from_str(text)?;
        m.check()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        write_atomic(path, self.to_json().as_bytes()).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    fn check(&self) -> Result<(), ManifestError> {
        let total: usize = self.per_task.iter().map(|t| t.selected).sum();
        if total != self.selected_ids.len() {
            return Err(ManifestError::Inconsistent(format!(
                "per_task sums to {total} but {} ids are listed",
                self.selected_ids.len()
            )));
        }
        if let Some(t) = self.per_task.iter().find(|t| t.selected > t.available) {
            return Err(ManifestError::Inconsistent(format!(
                "task {:?} selects {} of {} available",
                t.task, t.selected, t.available
            )));
        }
        Ok(())
    }
}

/// Write to a sibling temp file and rename it over `path`, so readers never
/// see a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
