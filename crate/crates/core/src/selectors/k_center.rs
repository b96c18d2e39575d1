use super::{capped_budget, dot, tie_window, Embeddings, SelectError, SelectionResult, StrategyDescriptor};
use crate::pool_io::Pool;

/// Farthest-first traversal.
///
/// The first center is the point with the smallest total squared distance to
/// the pool; each next center is the point farthest from its nearest chosen
/// center. The objective trace holds the covering radius after each pick.
pub fn select_k_center(pool: &Pool, budget: usize) -> Result<SelectionResult, SelectError> {
    let emb = Embeddings::from_pool(pool)?;
    let mut warnings = Vec::new();
    let k = capped_budget(budget, pool.len(), &mut warnings)?;
    let (selected, trace) = farthest_first(&emb, k);
    let mut out = SelectionResult::new(
        pool,
        selected,
        StrategyDescriptor::new("k_center")
            .param("budget", budget)
            .param("kernel", "euclidean"),
        0,
    );
    out.objective_trace = Some(trace);
    out.warnings = warnings;
    Ok(out)
}

fn farthest_first(emb: &Embeddings, k: usize) -> (Vec<usize>, Vec<f64>) {
    let n = emb.n;
    let sq_norms: Vec<f64> = (0..n).map(|i| dot(emb.row(i), emb.row(i))).collect();
    // direct differences: the expanded form leaves ~1e-8 radii between duplicates
    let sq_dist = |i: usize, j: usize| -> f64 {
        emb.row(i)
            .iter()
            .zip(emb.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };

    // sum_j ||x_i - x_j||^2 = n ||x_i||^2 - 2 <x_i, sum_j x_j> + sum_j ||x_j||^2
    let mut total = vec![0.0; emb.d];
    for i in 0..n {
        for (t, x) in total.iter_mut().zip(emb.row(i)) {
            *t += x;
        }
    }
    let norm_sum: f64 = sq_norms.iter().sum();
    let spread: Vec<f64> = (0..n)
        .map(|i| n as f64 * sq_norms[i] - 2.0 * dot(emb.row(i), &total) + norm_sum)
        .collect();
    let min_spread = spread.iter().copied().fold(f64::INFINITY, f64::min);
    let first = (0..n)
        .find(|&i| spread[i] <= min_spread + tie_window(min_spread))
        .unwrap();

    let mut chosen = vec![false; n];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(i, first)).collect();
    chosen[first] = true;
    let mut selected = vec![first];
    let mut trace = vec![max_radius(&nearest)];

    while selected.len() < k {
        let far = (0..n)
            .filter(|&i| !chosen[i])
            .map(|i| nearest[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let window = tie_window(far.sqrt());
        let next = (0..n)
            .find(|&i| !chosen[i] && nearest[i].sqrt() >= far.sqrt() - window)
            .unwrap();
        chosen[next] = true;
        selected.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            if !chosen[i] {
                *d = d.min(sq_dist(i, next));
            } else {
                *d = 0.0;
            }
        }
        trace.push(max_radius(&nearest));
    }
    (selected, trace)
}

fn max_radius(nearest: &[f64]) -> f64 {
    nearest.iter().copied().fold(0.0, f64::max).sqrt()
}
