//! Brute-force reference solvers.
//!
//! Everything here is exhaustive and deliberately naive. Nothing in this crate
//! depends on `tasksel-core`, so the two can be checked against each other.
//! Inputs are bounded by [`OracleBudgetLimits`]; larger instances are refused
//! with [`OracleError::LimitExceeded`].

pub mod objectives;

use thiserror::Error;

/// Relative tolerance used to decide that two objective values tie.
pub const TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance exceeds oracle limits: {0}")]
    LimitExceeded(String),
    #[error("no feasible allocation: budget {budget} exceeds pool size {available}")]
    Infeasible { budget: usize, available: usize },
}

/// Size caps that keep exhaustive enumeration in the seconds range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudgetLimits {
    pub max_tasks: usize,
    pub max_count: usize,
    pub max_budget: usize,
    pub max_points: usize,
}

impl Default for OracleBudgetLimits {
    fn default() -> Self {
        Self {
            max_tasks: 6,
            max_count: 10,
            max_budget: 30,
            max_points: 12,
        }
    }
}

/// All integer allocations attaining the optimal min-max value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinMaxSolution {
    pub value: usize,
    pub allocations: Vec<Vec<usize>>,
}

/// Enumerate every integer allocation with `sum == budget` and
/// `alloc[t] <= counts[t]`, returning those with the smallest maximum entry.
pub fn oracle_minmax_allocation(
    counts: &[usize],
    budget: usize,
    limits: &OracleBudgetLimits,
) -> Result<MinMaxSolution, OracleError> {
    if counts.is_empty() || counts.len() > limits.max_tasks {
        return Err(OracleError::LimitExceeded(format!("{} tasks", counts.len())));
    }
    if let Some(&c) = counts.iter().find(|&&c| c > limits.max_count) {
        return Err(OracleError::LimitExceeded(format!("task count {c}")));
    }
    if budget > limits.max_budget {
        return Err(OracleError::LimitExceeded(format!("budget {budget}")));
    }
    let available: usize = counts.iter().sum();
    if budget > available {
        return Err(OracleError::Infeasible { budget, available });
    }

    // suffix capacity lets the recursion prune branches that cannot reach the budget
    let mut suffix = vec![0usize; counts.len() + 1];
    for t in (0..counts.len()).rev() {
        suffix[t] = suffix[t + 1] + counts[t];
    }

    let mut best = usize::MAX;
    let mut winners = Vec::new();
    let mut current = Vec::with_capacity(counts.len());
    enumerate(counts, &suffix, budget, &mut current, &mut best, &mut winners);
    Ok(MinMaxSolution {
        value: best,
        allocations: winners,
    })
}

fn enumerate(
    counts: &[usize],
    suffix: &[usize],
    remaining: usize,
    current: &mut Vec<usize>,
    best: &mut usize,
    winners: &mut Vec<Vec<usize>>,
) {
    let t = current.len();
    if t == counts.len() {
        if remaining == 0 {
            let peak = current.iter().copied().max().unwrap_or(0);
            if peak < *best {
                *best = peak;
                winners.clear();
            }
            if peak == *best {
                winners.push(current.clone());
            }
        }
        return;
    }
    for a in 0..=counts[t].min(remaining) {
        if remaining - a > suffix[t + 1] {
            continue;
        }
        current.push(a);
        enumerate(counts, suffix, remaining - a, current, best, winners);
        current.pop();
    }
}

/// Evaluate `objective(current ∪ {c})` for every candidate and return all
/// candidates whose value lies within the tie tolerance of the maximum,
/// in ascending index order.
pub fn oracle_greedy_step<F>(
    objective: F,
    current: &[usize],
    candidates: &[usize],
    limits: &OracleBudgetLimits,
) -> Result<Vec<usize>, OracleError>
where
    F: Fn(&[usize]) -> f64,
{
    if candidates.len() > limits.max_points {
        return Err(OracleError::LimitExceeded(format!(
            "{} candidates",
            candidates.len()
        )));
    }
    let values: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&c| {
            let mut set = current.to_vec();
            set.push(c);
            (c, objective(&set))
        })
        .collect();
    let max = values
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let mut all: Vec<usize> = candidates.to_vec();
        all.sort_unstable();
        return Ok(all);
    }
    let tol = TIE_RTOL * max.abs().max(1.0);
    let mut winners: Vec<usize> = values
        .into_iter()
        .filter(|&(_, v)| v >= max - tol)
        .map(|(c, _)| c)
        .collect();
    winners.sort_unstable();
    Ok(winners)
}

/// Optimal k-center covering radius by enumerating all `budget`-subsets.
pub fn oracle_kcenter_radius(
    points: &[Vec<f64>],
    budget: usize,
    limits: &OracleBudgetLimits,
) -> Result<f64, OracleError> {
    if points.len() > limits.max_points {
        return Err(OracleError::LimitExceeded(format!("{} points", points.len())));
    }
    if budget == 0 || points.is_empty() {
        return Err(OracleError::LimitExceeded("empty instance".into()));
    }
    let k = budget.min(points.len());
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let radius = points
            .iter()
            .map(|p| {
                subset
                    .iter()
                    .map(|&c| objectives::euclidean_distance(p, &points[c]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        best = best.min(radius);
        if !next_combination(&mut subset, points.len()) {
            break;
        }
    }
    Ok(best)
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Weighted allocation by plain bisection on the scale constant.
///
/// `alpha_t = clamp(C / conf_t, min(base, counts_t), counts_t)` with `C`
/// chosen so the allocations sum to `min(budget, sum(counts))`. Returns
/// `None` when the base floor alone exceeds the budget.
pub fn oracle_weighted_bisection(
    counts: &[usize],
    conf: &[f64],
    budget: usize,
    base: usize,
) -> Option<Vec<f64>> {
    let total: usize = counts.iter().sum();
    let target = budget.min(total) as f64;
    let floor: usize = counts.iter().map(|&c| c.min(base)).sum();
    if floor as f64 > target {
        return None;
    }
    let eval = |c: f64| -> Vec<f64> {
        counts
            .iter()
            .zip(conf)
            .map(|(&n, &q)| {
                let raw = c / q.max(1e-12);
                raw.max(n.min(base) as f64).min(n as f64)
            })
            .collect()
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while eval(hi).iter().sum::<f64>() < target {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if eval(mid).iter().sum::<f64>() < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Some(eval(hi))
}
