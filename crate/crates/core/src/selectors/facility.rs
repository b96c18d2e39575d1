//! Greedy facility location, `F(S) = sum_i max_{j in S} K(z_i, z_j)`.
//!
//! The first pick maximizes the kernel column sum. Later picks use lazy
//! evaluation: stale marginal gains are upper bounds (F is submodular once S
//! is non-empty), so only candidates whose bound can still compete are
//! re-evaluated. Every candidate whose gain is within the tie window of the
//! best is refreshed before choosing, so the pick is the lowest index among
//! the exact per-step maximizers.

use super::kernel::{Gram, TILE};
use super::{capped_budget, tie_window, Embeddings, KernelSpec, SelectError, SelectionResult, StrategyDescriptor};
use crate::pool_io::Pool;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const REFRESH_BATCH: usize = 16;
const GAIN_GROUP: usize = 4;

pub fn select_facility_location(
    pool: &Pool,
    budget: usize,
    kernel: &KernelSpec,
) -> Result<SelectionResult, SelectError> {
    let sim = kernel.facility_similarity()?;
    let emb = Embeddings::from_pool(pool)?;
    let mut warnings = Vec::new();
    let k = capped_budget(budget, pool.len(), &mut warnings)?;
    let gram = Gram::new(emb, sim);
    let (selected, trace) = lazy_greedy(&gram, k);
    let mut descriptor = StrategyDescriptor::new("facility_location")
        .param("budget", budget)
        .param("kernel", kernel.kind);
    if let Some(g) = kernel.gamma {
        descriptor = descriptor.param("gamma", g);
    }
    let mut out = SelectionResult::new(pool, selected, descriptor, 0);
    out.objective_trace = Some(trace);
    out.warnings = warnings;
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    bound: f64,
    idx: usize,
    /// Step at which `bound` was computed exactly.
    stamp: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on bound, lower index first among equal bounds
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

struct State<'a> {
    gram: &'a Gram,
    best: Vec<f64>,
    /// `gram.cutoff(best[i])`: pairs past it add nothing to a gain.
    cut: Vec<f64>,
}

impl State<'_> {
    /// Exact marginal gains, computed tile by tile so a block of the pool
    /// stays in cache for every candidate. Each gain is summed in pool order,
    /// so batching never changes it.
    fn refresh(&self, entries: &mut [Entry], step: usize) {
        let n = self.best.len();
        let groups: Vec<[usize; GAIN_GROUP]> = entries
            .chunks(GAIN_GROUP)
            .map(|g| std::array::from_fn(|c| g[c.min(g.len() - 1)].idx))
            .collect();
        let mut gains = vec![[0.0; GAIN_GROUP]; groups.len()];
        for tile in (0..n).step_by(TILE) {
            gains.par_iter_mut().zip(&groups).for_each(|(gains, ids)| {
                self.gram.scan_within(*ids, tile..(tile + TILE).min(n), Some(&self.cut), |i, dots| {
                    let (b, cut) = (self.best[i], self.cut[i]);
                    for ((g, &j), &dot) in gains.iter_mut().zip(ids).zip(dots) {
                        if let Some(k) = self.gram.above(i, j, dot, cut) {
                            if k - b > 0.0 {
                                *g += k - b;
                            }
                        }
                    }
                });
            });
        }
        for (e, g) in entries.iter_mut().zip(gains.iter().flatten()) {
            e.bound = *g;
            e.stamp = step;
        }
    }

    fn add(&mut self, j: usize) -> f64 {
        let State { gram, best, cut } = self;
        gram.scan([j], 0..best.len(), |i, dots| {
            if let Some(v) = gram.above(i, j, dots[0], cut[i]) {
                if v > best[i] {
                    best[i] = v;
                    cut[i] = gram.cutoff(v);
                }
            }
        });
        best.iter().sum()
    }
}

fn lazy_greedy(gram: &Gram, k: usize) -> (Vec<usize>, Vec<f64>) {
    let n = gram.len();
    let mut state = State {
        gram,
        best: vec![f64::NEG_INFINITY; n],
        cut: vec![f64::INFINITY; n],
    };

    let column = gram.column_sums();
    let top = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = (0..n)
        .find(|&j| column[j] >= top - tie_window(top))
        .unwrap();
    let mut objective = state.add(first);
    let mut selected = vec![first];
    let mut trace = vec![objective];
    if k == 1 {
        return (selected, trace);
    }

    let mut entries: Vec<Entry> = (0..n)
        .filter(|&j| j != first)
        .map(|j| Entry { bound: column[j], idx: j, stamp: 1 })
        .collect();
    if !gram.nonnegative() {
        // column sums only bound the gains when kernel values are non-negative
        state.refresh(&mut entries, 2);
    }
    let mut heap: BinaryHeap<Entry> = entries.into_iter().collect();

    for step in 2..=k {
        let pick = loop {
            let mut stale = Vec::new();
            while let Some(top) = heap.peek() {
                if top.stamp == step || stale.len() == REFRESH_BATCH {
                    break;
                }
                stale.push(heap.pop().unwrap());
            }
            if !stale.is_empty() {
                state.refresh(&mut stale, step);
                heap.extend(stale);
                continue;
            }

            let best_gain = heap.peek().unwrap().bound;
            let threshold = best_gain - tie_window(objective + best_gain);
            let mut window = Vec::new();
            while heap.peek().is_some_and(|e| e.bound >= threshold) {
                window.push(heap.pop().unwrap());
            }
            if window.iter().any(|e| e.stamp != step) {
                let mut stale: Vec<Entry> = window.iter().copied().filter(|e| e.stamp != step).collect();
                state.refresh(&mut stale, step);
                heap.extend(window.into_iter().filter(|e| e.stamp == step));
                heap.extend(stale);
                continue;
            }
            let chosen = window.iter().map(|e| e.idx).min().unwrap();
            heap.extend(window.into_iter().filter(|e| e.idx != chosen));
            break chosen;
        };
        objective = state.add(pick);
        selected.push(pick);
        trace.push(objective);
    }
    (selected, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool_io::PromptRecord;

    fn pool(points: &[Vec<f32>]) -> Pool {
        Pool::from_records(
            points
                .iter()
                .enumerate()
                .map(|(i, p)| PromptRecord::new(i.to_string(), "t").with_embedding(p.clone()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_pick_per_cluster() {
        let p = pool(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![5.0, 5.0],
            vec![5.0, 5.0],
            vec![5.0, 5.0],
        ]);
        let r = select_facility_location(&p, 2, &KernelSpec::rbf(1.0)).unwrap();
        assert_eq!(r.selected, [0, 3]);
        let trace = r.objective_trace.unwrap();
        assert!((trace[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn first_pick_is_max_column_sum() {
        let p = pool(&[vec![0.0], vec![1.0], vec![1.5], vec![9.0]]);
        let r = select_facility_location(&p, 1, &KernelSpec::rbf(0.5)).unwrap();
        assert_eq!(r.selected, [1]);
        let r = select_facility_location(&p, 1, &KernelSpec::euclidean()).unwrap();
        // squared-distance sums: 0: 0+1+2.25+81, 1: 1+0.25+64, 2: 2.25+0.25+56.25, 3: 81+64+56.25
        assert_eq!(r.selected, [2]);
    }

    #[test]
    fn trace_is_non_decreasing_for_cosine() {
        let p = pool(&[vec![1.0, 0.0], vec![-1.0, 0.1], vec![0.2, 1.0], vec![0.0, -1.0], vec![0.7, 0.7]]);
        let r = select_facility_location(&p, 5, &KernelSpec::cosine()).unwrap();
        let t = r.objective_trace.unwrap();
        assert!(t.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{t:?}");
        let mut s = r.selected.clone();
        s.sort_unstable();
        assert_eq!(s, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn bad_gamma() {
        let p = pool(&[vec![0.0]]);
        assert!(matches!(
            select_facility_location(&p, 1, &KernelSpec::rbf(0.0)),
            Err(SelectError::InvalidKernel(_))
        ));
    }
}
