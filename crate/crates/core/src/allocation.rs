//! Per-task budget allocation.
//!
//! Three solvers share one output type. Inputs are per-task vectors aligned
//! with a [`TaskPartition`](crate::pool_io::TaskPartition), whose tasks are in
//! lexicographic order, so "ties broken by position" means "ties broken by
//! label". Allocations stay real-valued here; rounding happens in round-robin.

use crate::pool_io::TaskPartition;
use crate::scoring::CONF_FLOOR;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Default per-task floor for weighted allocation.
pub const DEFAULT_BASE: usize = 5;

/// Residual on the allocated total beyond which the breakpoint solution is
/// discarded in favour of bisection.
const RESIDUAL_TOL: f64 = 1e-9;

/// Allocations within this distance below an integer round up to it, not past it.
pub const ALPHA_SNAP: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("no tasks to allocate over")]
    NoTasks,
    #[error("budget must be at least 1")]
    InvalidBudget,
    #[error("{what} has {got} entries, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("task {task}: confidence {value} is not a finite non-negative number")]
    InvalidConfidence { task: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationStrategy {
    TaskDiversity,
    WeightedTaskDiversity,
    ActiveIt,
}

impl fmt::Display for AllocationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TaskDiversity => "task_diversity",
            Self::WeightedTaskDiversity => "weighted_task_diversity",
            Self::ActiveIt => "active_it",
        })
    }
}

/// Real-valued per-task allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationVector {
    pub alpha: Vec<f64>,
    /// Budget as requested.
    pub budget: usize,
    /// False when the budget had to be capped or the base floor was infeasible.
    pub feasible: bool,
    /// Strategy that produced `alpha`; differs from the one asked for after a fallback.
    pub strategy: AllocationStrategy,
    /// Scale constant of the weighted solution, when one was solved for.
    pub scale: Option<f64>,
    pub warnings: Vec<String>,
}

impl AllocationVector {
    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Elementwise rounded-up allocation used by round-robin.
    pub fn ceil(&self) -> Vec<usize> {
        self.alpha.iter().map(|&a| ceil_alpha(a)).collect()
    }
}

pub fn ceil_alpha(a: f64) -> usize {
    (a - ALPHA_SNAP).ceil().max(0.0) as usize
}

fn check_budget(counts: &[usize], budget: usize) -> Result<(usize, Vec<String>), AllocError> {
    if counts.is_empty() {
        return Err(AllocError::NoTasks);
    }
    if budget == 0 {
        return Err(AllocError::InvalidBudget);
    }
    let total: usize = counts.iter().sum();
    let mut warnings = Vec::new();
    if budget > total {
        warnings.push(format!(
            "budget {budget} exceeds pool size {total}; capped to {total}"
        ));
    }
    Ok((budget.min(total), warnings))
}

fn check_conf(counts: &[usize], conf: &[f64]) -> Result<Vec<f64>, AllocError> {
    if conf.len() != counts.len() {
        return Err(AllocError::ShapeMismatch {
            what: "task confidence",
            got: conf.len(),
            expected: counts.len(),
        });
    }
    conf.iter()
        .enumerate()
        .map(|(t, &c)| {
            if c.is_finite() && c >= 0.0 {
                Ok(c.max(CONF_FLOOR))
            } else {
                Err(AllocError::InvalidConfidence { task: t, value: c })
            }
        })
        .collect()
}

/// Min-max allocation by water-filling: every task gets `min(count, level)`
/// for the level at which the total equals the budget.
pub fn allocate_task_diversity(counts: &[usize], budget: usize) -> Result<AllocationVector, AllocError> {
    let (target, warnings) = check_budget(counts, budget)?;
    Ok(AllocationVector {
        alpha: water_fill(counts, target),
        budget,
        feasible: warnings.is_empty(),
        strategy: AllocationStrategy::TaskDiversity,
        scale: None,
        warnings,
    })
}

fn water_fill(counts: &[usize], target: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&t| (counts[t], t));
    let mut alpha = vec![0.0; counts.len()];
    // integer bookkeeping keeps the level exact until the final division
    let mut remaining = target;
    let mut open = counts.len();
    for (k, &t) in order.iter().enumerate() {
        if counts[t] * open <= remaining {
            alpha[t] = counts[t] as f64;
            remaining -= counts[t];
            open -= 1;
        } else {
            let level = remaining as f64 / open as f64;
            for &s in &order[k..] {
                alpha[s] = level;
            }
            break;
        }
    }
    alpha
}

/// Inverse-confidence allocation:
/// `alpha_t = clamp(C / conf_t, min(base, counts_t), counts_t)` with the
/// unique `C` that makes the allocations sum to the (capped) budget.
///
/// When the floors alone exceed the budget this falls back to
/// [`allocate_task_diversity`] and records a warning.
pub fn allocate_weighted(
    counts: &[usize],
    conf: &[f64],
    budget: usize,
    base: usize,
) -> Result<AllocationVector, AllocError> {
    let (target, mut warnings) = check_budget(counts, budget)?;
    let conf = check_conf(counts, conf)?;

    let floor: usize = counts.iter().map(|&n| n.min(base)).sum();
    if floor > target {
        warnings.push(format!(
            "base allocation {base} needs {floor} examples but budget is {target}; \
             falling back to task_diversity"
        ));
        return Ok(AllocationVector {
            alpha: water_fill(counts, target),
            budget,
            feasible: false,
            strategy: AllocationStrategy::TaskDiversity,
            scale: None,
            warnings,
        });
    }

    let tasks: Vec<Clamp> = counts
        .iter()
        .zip(&conf)
        .map(|(&n, &c)| Clamp {
            lo: n.min(base) as f64,
            hi: n as f64,
            weight: 1.0 / c,
        })
        .collect();

    let mut scale = breakpoint_scale(&tasks, target as f64);
    let mut alpha = evaluate(&tasks, scale);
    if (alpha.iter().sum::<f64>() - target as f64).abs() > RESIDUAL_TOL {
        scale = bisect_scale(&tasks, target as f64);
        alpha = evaluate(&tasks, scale);
    }

    Ok(AllocationVector {
        alpha,
        budget,
        feasible: warnings.is_empty(),
        strategy: AllocationStrategy::WeightedTaskDiversity,
        scale: Some(scale),
        warnings,
    })
}

#[derive(Debug, Clone, Copy)]
struct Clamp {
    lo: f64,
    hi: f64,
    weight: f64,
}

impl Clamp {
    fn at(&self, scale: f64) -> f64 {
        (scale * self.weight).max(self.lo).min(self.hi)
    }

    /// Scale at which the task leaves its lower bound.
    fn enter(&self) -> f64 {
        self.lo / self.weight
    }

    /// Scale at which the task reaches its upper bound.
    fn exit(&self) -> f64 {
        self.hi / self.weight
    }
}

fn evaluate(tasks: &[Clamp], scale: f64) -> Vec<f64> {
    tasks.iter().map(|t| t.at(scale)).collect()
}

/// Solve `sum_t clamp(C w_t, lo_t, hi_t) = target` exactly on the linear piece
/// containing the root. The map is continuous, piecewise linear and
/// non-decreasing in `C`, with kinks at the `2T` activation points.
fn breakpoint_scale(tasks: &[Clamp], target: f64) -> f64 {
    let mut points: Vec<f64> = tasks.iter().flat_map(|t| [t.enter(), t.exit()]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let total_at = |c: f64| -> f64 { tasks.iter().map(|t| t.at(c)).sum() };

    let mut prev = 0.0;
    for &p in &points {
        if total_at(p) >= target {
            // root lies in [prev, p]; classify tasks by the piece's interior
            let mut fixed = 0.0;
            let mut slope = 0.0;
            for t in tasks {
                if t.enter() >= p {
                    fixed += t.lo;
                } else if t.exit() <= prev {
                    fixed += t.hi;
                } else {
                    slope += t.weight;
                }
            }
            if slope == 0.0 {
                return prev;
            }
            return ((target - fixed) / slope).clamp(prev, p);
        }
        prev = p;
    }
    prev
}

fn bisect_scale(tasks: &[Clamp], target: f64) -> f64 {
    let total_at = |c: f64| -> f64 { tasks.iter().map(|t| t.at(c)).sum() };
    let mut lo = 0.0;
    let mut hi = tasks.iter().map(Clamp::exit).fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = total_at(mid);
        if (v - target).abs() <= RESIDUAL_TOL {
            return mid;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Whole-task allocation: tasks in ascending confidence (ties by position)
/// are taken entirely until the next one no longer fits; that task receives
/// the remaining budget.
pub fn allocate_active_it(counts: &[usize], conf: &[f64], budget: usize) -> Result<AllocationVector, AllocError> {
    let (target, warnings) = check_budget(counts, budget)?;
    let conf = check_conf(counts, conf)?;
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| conf[a].total_cmp(&conf[b]).then(a.cmp(&b)));

    let mut alpha = vec![0.0; counts.len()];
    let mut remaining = target;
    for t in order {
        if remaining == 0 {
            break;
        }
        let take = counts[t].min(remaining);
        alpha[t] = take as f64;
        remaining -= take;
    }
    Ok(AllocationVector {
        alpha,
        budget,
        feasible: warnings.is_empty(),
        strategy: AllocationStrategy::ActiveIt,
        scale: None,
        warnings,
    })
}

/// One row of the allocation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub label: String,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conf_t: Option<f64>,
    pub alpha_real: f64,
    pub alpha_ceil: usize,
}

pub fn allocation_report(
    alloc: &AllocationVector,
    partition: &TaskPartition,
    conf: Option<&[f64]>,
) -> Vec<AllocationRow> {
    partition
        .tasks()
        .iter()
        .enumerate()
        .map(|(t, label)| AllocationRow {
            label: label.clone(),
            count: partition.counts()[t],
            conf_t: conf.map(|c| c[t]),
            alpha_real: alloc.alpha[t],
            alpha_ceil: ceil_alpha(alloc.alpha[t]),
        })
        .collect()
}
