use super::{capped_budget, stream_rng, SelectError, SelectionResult, StrategyDescriptor};
use crate::pool_io::Pool;

/// Uniform sample of `min(budget, N)` indices without replacement.
pub fn select_random(pool: &Pool, budget: usize, seed: u64) -> Result<SelectionResult, SelectError> {
    let mut warnings = Vec::new();
    let k = capped_budget(budget, pool.len(), &mut warnings)?;
    let mut rng = stream_rng(seed, "random");
    let selected = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
    let mut out = SelectionResult::new(
        pool,
        selected,
        StrategyDescriptor::new("random").param("budget", budget),
        seed,
    );
    out.warnings = warnings;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool_io::PromptRecord;

    fn pool(n: usize) -> Pool {
        Pool::from_records((0..n).map(|i| PromptRecord::new(i.to_string(), "t")).collect()).unwrap()
    }

    #[test]
    fn full_budget_takes_everything() {
        let p = pool(9);
        let mut s = select_random(&p, 9, 3).unwrap().selected;
        s.sort_unstable();
        assert_eq!(s, (0..9).collect::<Vec<_>>());
        let r = select_random(&p, 20, 3).unwrap();
        assert_eq!(r.selected.len(), 9);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(matches!(select_random(&pool(3), 0, 0), Err(SelectError::InvalidBudget)));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = pool(100);
        assert_eq!(select_random(&p, 10, 5).unwrap(), select_random(&p, 10, 5).unwrap());
        assert_ne!(
            select_random(&p, 10, 5).unwrap().selected,
            select_random(&p, 10, 6).unwrap().selected
        );
    }
}
