use super::{SelectError, SelectionResult, StrategyDescriptor, TaskSampler};
use crate::allocation::AllocationVector;
use crate::pool_io::TaskPartition;

/// Materialize an allocation by cycling over tasks.
///
/// Tasks are ordered by ascending `ceil(alpha_t)` (ties by label) and stay in
/// that order for the whole run. Each pass gives one uniformly drawn, not yet
/// selected member to every task whose count is below both `ceil(alpha_t)` and
/// its size. Stops as soon as `budget` examples are selected or no task is
/// eligible.
pub fn round_robin(
    allocation: &AllocationVector,
    partition: &TaskPartition,
    budget: usize,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    if budget == 0 {
        return Err(SelectError::InvalidBudget);
    }
    let t_count = partition.num_tasks();
    if allocation.alpha.len() != t_count {
        return Err(SelectError::ShapeMismatch(format!(
            "allocation has {} tasks, partition has {t_count}",
            allocation.alpha.len()
        )));
    }
    let ceil = allocation.ceil();
    let caps: Vec<usize> = ceil
        .iter()
        .zip(partition.counts())
        .map(|(&c, &n)| c.min(n))
        .collect();
    let mut order: Vec<usize> = (0..t_count).collect();
    order.sort_by_key(|&t| (ceil[t], t));

    let mut samplers: Vec<TaskSampler> = (0..t_count)
        .map(|t| TaskSampler::new(seed, &partition.tasks()[t], partition.members(t)))
        .collect();
    let mut realized = vec![0usize; t_count];
    let mut selected = Vec::with_capacity(budget.min(caps.iter().sum()));

    'passes: loop {
        let mut progressed = false;
        for &t in &order {
            if realized[t] < caps[t] {
                let x = samplers[t]
                    .draw()
                    .expect("cap never exceeds task size");
                selected.push(x);
                realized[t] += 1;
                progressed = true;
                if selected.len() == budget {
                    break 'passes;
                }
            }
        }
        if !progressed {
            break;
        }
    }

    let mut warnings = allocation.warnings.clone();
    if selected.len() < budget {
        warnings.push(format!(
            "selection stopped at {} of {budget}: allocation or task pools exhausted",
            selected.len()
        ));
    }
    Ok(SelectionResult {
        selected,
        per_task: realized,
        strategy: StrategyDescriptor::new(allocation.strategy.to_string()).param("budget", budget),
        seed,
        objective_trace: None,
        allocation: None,
        warnings,
    })
}
