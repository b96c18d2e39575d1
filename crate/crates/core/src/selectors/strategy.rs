use super::{
    round_robin, select_dpp, select_facility_location, select_k_center, select_random, select_uncertainty,
    KernelKind, KernelSpec, SelectError, SelectionResult, StrategyDescriptor, UncertaintyCriterion,
    DEFAULT_JITTER,
};
use crate::allocation::{
    allocate_active_it, allocate_task_diversity, allocate_weighted, allocation_report, AllocationVector,
    DEFAULT_BASE,
};
use crate::pool_io::Pool;
use crate::scoring::{score_pool, task_mean_confidence_from_scores, ExampleScores};
use std::fmt;
use std::str::FromStr;

/// Default RBF bandwidth for facility location when none is given.
pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Random,
    Uncertainty(UncertaintyCriterion),
    KCenter,
    FacilityLocation,
    Dpp,
    ActiveIt,
    TaskDiversity,
    WeightedTaskDiversity,
}

impl Strategy {
    pub const CATALOG: [&'static str; 11] = [
        "random",
        "least_confidence",
        "mean_entropy",
        "mean_margin",
        "min_margin",
        "k_center",
        "facility_location",
        "dpp",
        "active_it",
        "task_diversity",
        "weighted_task_diversity",
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Uncertainty(c) => c.name(),
            Self::KCenter => "k_center",
            Self::FacilityLocation => "facility_location",
            Self::Dpp => "dpp",
            Self::ActiveIt => "active_it",
            Self::TaskDiversity => "task_diversity",
            Self::WeightedTaskDiversity => "weighted_task_diversity",
        }
    }

    pub fn needs_scores(self) -> bool {
        matches!(self, Self::Uncertainty(_) | Self::ActiveIt | Self::WeightedTaskDiversity)
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Self::KCenter | Self::FacilityLocation | Self::Dpp)
    }

    /// Kernel used when the config leaves it unset.
    pub fn default_kernel(self) -> Option<KernelSpec> {
        match self {
            Self::FacilityLocation => Some(KernelSpec::rbf(DEFAULT_GAMMA)),
            Self::KCenter | Self::Dpp => Some(KernelSpec::euclidean()),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SelectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "random" => Self::Random,
            "k_center" | "kcenter" => Self::KCenter,
            "facility_location" | "fl" => Self::FacilityLocation,
            "dpp" => Self::Dpp,
            "active_it" | "activeit" => Self::ActiveIt,
            "task_diversity" => Self::TaskDiversity,
            "weighted_task_diversity" => Self::WeightedTaskDiversity,
            other => Self::Uncertainty(other.parse().map_err(|_| {
                SelectError::Config(format!(
                    "unknown strategy {other:?}; expected one of {}",
                    Self::CATALOG.join(", ")
                ))
            })?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub budget: usize,
    pub seed: u64,
    /// Per-task floor for weighted task diversity.
    pub base: usize,
    /// `None` picks the strategy's default kernel.
    pub kernel: Option<KernelSpec>,
    pub jitter: f64,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, budget: usize) -> Self {
        Self {
            strategy,
            budget,
            seed: 0,
            base: DEFAULT_BASE,
            kernel: None,
            jitter: DEFAULT_JITTER,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_base(mut self, base: usize) -> Self {
        self.base = base;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    /// Kernel the run will actually use, after defaults and compatibility checks.
    pub fn resolved_kernel(&self) -> Result<Option<KernelSpec>, SelectError> {
        let kernel = self.kernel.or(self.strategy.default_kernel());
        if !self.strategy.needs_embeddings() {
            return Ok(None);
        }
        let kernel = kernel.expect("embedding strategies have a default kernel");
        if self.strategy == Strategy::KCenter && kernel.kind != KernelKind::Euclidean {
            return Err(SelectError::Config(format!(
                "k_center only supports the euclidean kernel, got {}",
                kernel.kind
            )));
        }
        kernel.validate()?;
        Ok(Some(kernel))
    }
}

/// Run a strategy, scoring the pool first if the strategy needs scores.
pub fn run_strategy(pool: &Pool, config: &StrategyConfig) -> Result<SelectionResult, SelectError> {
    run_strategy_with_scores(pool, None, config)
}

/// Run a strategy with optional precomputed scores (e.g. from a cache).
///
/// Task Diversity is partition, then water-filling allocation, then
/// round-robin. Weighted Task Diversity is partition, then per-task mean
/// confidence, then clamped inverse-confidence allocation, then round-robin.
pub fn run_strategy_with_scores(
    pool: &Pool,
    scores: Option<&[ExampleScores]>,
    config: &StrategyConfig,
) -> Result<SelectionResult, SelectError> {
    if config.budget == 0 {
        return Err(SelectError::InvalidBudget);
    }
    let kernel = config.resolved_kernel()?;
    let computed;
    let scores = match scores {
        Some(s) => Some(s),
        None if config.strategy.needs_scores() => {
            computed = score_pool(pool)?;
            Some(computed.as_slice())
        }
        None => None,
    };

    let partition = pool.partition();
    let mut result = match config.strategy {
        Strategy::Random => select_random(pool, config.budget, config.seed)?,
        Strategy::Uncertainty(c) => select_uncertainty(pool, scores.unwrap(), c, config.budget)?,
        Strategy::KCenter => select_k_center(pool, config.budget)?,
        Strategy::FacilityLocation => select_facility_location(pool, config.budget, &kernel.unwrap())?,
        Strategy::Dpp => select_dpp(pool, config.budget, &kernel.unwrap(), config.jitter)?,
        Strategy::TaskDiversity => {
            let alloc = allocate_task_diversity(partition.counts(), config.budget)?;
            materialize(pool, &alloc, None, config)?
        }
        Strategy::WeightedTaskDiversity => {
            let conf = task_mean_confidence_from_scores(pool, scores.unwrap(), partition)?;
            let alloc = allocate_weighted(partition.counts(), conf.values(), config.budget, config.base)?;
            materialize(pool, &alloc, Some(conf.values()), config)?
        }
        Strategy::ActiveIt => {
            let conf = task_mean_confidence_from_scores(pool, scores.unwrap(), partition)?;
            let alloc = allocate_active_it(partition.counts(), conf.values(), config.budget)?;
            materialize(pool, &alloc, Some(conf.values()), config)?
        }
    };
    result.seed = config.seed;
    result.strategy = descriptor(config, kernel);
    Ok(result)
}

fn materialize(
    pool: &Pool,
    alloc: &AllocationVector,
    conf: Option<&[f64]>,
    config: &StrategyConfig,
) -> Result<SelectionResult, SelectError> {
    let mut result = round_robin(alloc, pool.partition(), config.budget, config.seed)?;
    result.allocation = Some(allocation_report(alloc, pool.partition(), conf));
    Ok(result)
}

fn descriptor(config: &StrategyConfig, kernel: Option<KernelSpec>) -> StrategyDescriptor {
    let mut d = StrategyDescriptor::new(config.strategy.name()).param("budget", config.budget);
    match config.strategy {
        Strategy::WeightedTaskDiversity => d = d.param("base", config.base),
        Strategy::Dpp => d = d.param("jitter", config.jitter),
        _ => {}
    }
    if let Some(k) = kernel {
        d = d.param("kernel", k.kind);
        if let Some(g) = k.gamma.filter(|_| k.kind == KernelKind::Rbf) {
            d = d.param("gamma", g);
        }
    }
    d
}
