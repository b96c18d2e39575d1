//! Greedy MAP for a determinantal point process: grow `S` by the point that
//! most increases `log det(K(S) + jitter I)`.
//!
//! A partial Cholesky factor is kept per candidate. After picking `j`, each
//! remaining candidate `i` gets one more factor entry
//! `e_i = (K(j, i) - <c_j, c_i>) / d_j` and its residual shrinks by `e_i^2`.
//! The residual `d_i^2` is exactly the Schur complement, so the marginal gain
//! of `i` is `ln d_i^2`.

use super::kernel::Gram;
use super::{capped_budget, dot, tie_window, Embeddings, KernelSpec, SelectError, SelectionResult, StrategyDescriptor};
use crate::pool_io::Pool;
use rayon::prelude::*;

pub const DEFAULT_JITTER: f64 = 1e-6;

pub fn select_dpp(
    pool: &Pool,
    budget: usize,
    kernel: &KernelSpec,
    jitter: f64,
) -> Result<SelectionResult, SelectError> {
    if !(jitter.is_finite() && jitter > 0.0) {
        return Err(SelectError::InvalidKernel(format!("jitter must be positive, got {jitter}")));
    }
    let sim = kernel.dpp_similarity()?;
    let emb = Embeddings::from_pool(pool)?;
    let mut warnings = Vec::new();
    let k = capped_budget(budget, pool.len(), &mut warnings)?;
    let gram = Gram::new(emb, sim);
    let (selected, trace, exhausted) = greedy_log_det(&gram, k, jitter);

    let mut descriptor = StrategyDescriptor::new("dpp")
        .param("budget", budget)
        .param("kernel", kernel.kind)
        .param("jitter", jitter);
    if let Some(g) = kernel.gamma {
        descriptor = descriptor.param("gamma", g);
    }
    let mut out = SelectionResult::new(pool, selected, descriptor, 0);
    out.objective_trace = Some(trace);
    out.warnings = warnings;
    if exhausted {
        out.warnings.push(format!(
            "rank exhausted after {} of {k} picks",
            out.selected.len()
        ));
        return Err(SelectError::RankExhausted { partial: Box::new(out) });
    }
    Ok(out)
}

fn greedy_log_det(gram: &Gram, k: usize, jitter: f64) -> (Vec<usize>, Vec<f64>, bool) {
    let n = gram.len();
    let mut residual: Vec<f64> = (0..n).map(|i| gram.eval(i, i) + jitter).collect();
    let mut factors: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut chosen = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    let mut log_det = 0.0;

    while selected.len() < k {
        let gains: Vec<f64> = (0..n)
            .map(|i| {
                if chosen[i] || residual[i].is_nan() || residual[i] <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    residual[i].ln()
                }
            })
            .collect();
        let top = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return (selected, trace, true);
        }
        let window = tie_window(log_det + top);
        let j = (0..n).find(|&i| gains[i] >= top - window).unwrap();

        let pivot = residual[j].sqrt();
        chosen[j] = true;
        selected.push(j);
        log_det += gains[j];
        trace.push(log_det);
        if selected.len() == k {
            break;
        }

        let cj = factors[j].clone();
        let mut column = vec![0.0; n];
        gram.scan([j], 0..n, |i, dots| column[i] = gram.value(i, j, dots[0]));
        factors
            .par_iter_mut()
            .zip(residual.par_iter_mut())
            .enumerate()
            .filter(|(i, _)| !chosen[*i])
            .for_each(|(i, (ci, ri))| {
                let e = (column[i] - dot(&cj, ci)) / pivot;
                ci.push(e);
                *ri -= e * e;
            });
    }
    (selected, trace, false)
}
