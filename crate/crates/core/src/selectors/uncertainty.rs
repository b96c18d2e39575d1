use super::{capped_budget, SelectError, SelectionResult, StrategyDescriptor};
use crate::pool_io::Pool;
use crate::scoring::ExampleScores;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyCriterion {
    /// Lowest sequence probability first.
    LeastConfidence,
    /// Highest mean entropy first.
    MeanEntropy,
    /// Smallest mean top-two margin first.
    MeanMargin,
    /// Smallest minimum top-two margin first.
    MinMargin,
}

impl UncertaintyCriterion {
    pub fn name(self) -> &'static str {
        match self {
            Self::LeastConfidence => "least_confidence",
            Self::MeanEntropy => "mean_entropy",
            Self::MeanMargin => "mean_margin",
            Self::MinMargin => "min_margin",
        }
    }

    /// Sort key where smaller means more uncertain.
    fn key(self, s: &ExampleScores) -> Option<f64> {
        match self {
            Self::LeastConfidence => s.log_confidence(),
            Self::MeanEntropy => s.mean_entropy().map(|e| -e),
            Self::MeanMargin => s.mean_margin(),
            Self::MinMargin => s.min_margin(),
        }
    }

    fn score_name(self) -> &'static str {
        match self {
            Self::LeastConfidence => "confidence",
            Self::MeanEntropy => "mean_entropy",
            Self::MeanMargin => "mean_margin",
            Self::MinMargin => "min_margin",
        }
    }
}

impl fmt::Display for UncertaintyCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UncertaintyCriterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "least_confidence" | "confidence" => Ok(Self::LeastConfidence),
            "mean_entropy" | "entropy" => Ok(Self::MeanEntropy),
            "mean_margin" => Ok(Self::MeanMargin),
            "min_margin" => Ok(Self::MinMargin),
            other => Err(format!("unknown uncertainty criterion {other:?}")),
        }
    }
}

/// Top-`budget` most uncertain examples; ties by ascending pool index.
pub fn select_uncertainty(
    pool: &Pool,
    scores: &[ExampleScores],
    criterion: UncertaintyCriterion,
    budget: usize,
) -> Result<SelectionResult, SelectError> {
    if scores.len() != pool.len() {
        return Err(SelectError::ShapeMismatch(format!(
            "{} score records for a pool of {}",
            scores.len(),
            pool.len()
        )));
    }
    let mut warnings = Vec::new();
    let k = capped_budget(budget, pool.len(), &mut warnings)?;
    let mut keyed = Vec::with_capacity(pool.len());
    for (i, s) in scores.iter().enumerate() {
        let key = criterion.key(s).ok_or_else(|| SelectError::MissingScore {
            id: pool.id(i).to_string(),
            score: criterion.score_name(),
        })?;
        keyed.push((key, i));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let selected = keyed.into_iter().take(k).map(|(_, i)| i).collect();
    let mut out = SelectionResult::new(
        pool,
        selected,
        StrategyDescriptor::new(criterion.name()).param("budget", budget),
        0,
    );
    out.warnings = warnings;
    Ok(out)
}
