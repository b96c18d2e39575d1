//! Task-aware annotation budget allocation.
//!
//! Given a pool of unlabeled prompts grouped into tasks, pick which prompts
//! to send for annotation under a fixed budget. The crate provides
//!
//! * [`pool_io`]: loading and validating pools and embedding sidecars,
//! * [`scoring`]: sequence confidence, entropy and margin scores,
//! * [`allocation`]: per-task budgets (min-max water-filling, clamped
//!   inverse-confidence weighting, whole-task ActiveIT),
//! * [`selectors`]: round-robin materialization plus the random, uncertainty,
//!   k-center, facility-location and DPP baselines,
//! * [`manifest`]: the selection manifest written by the CLI.
//!
//! ```
//! use tasksel_core::pool_io::{Pool, PromptRecord};
//! use tasksel_core::selectors::{run_strategy, Strategy, StrategyConfig};
//!
//! let mut records = Vec::new();
//! for (task, conf) in [("qa", 0.2), ("qa", 0.2), ("qa", 0.2), ("cls", 0.8), ("cls", 0.8)] {
//!     let id = format!("{task}-{}", records.len());
//!     records.push(PromptRecord::new(id, task).with_confidence(conf));
//! }
//! let pool = Pool::from_records(records).unwrap();
//! let config = StrategyConfig::new(Strategy::WeightedTaskDiversity, 4).with_base(1);
//! let result = run_strategy(&pool, &config).unwrap();
//! // tasks are ordered by label: ["cls", "qa"]
//! assert_eq!(result.per_task, vec![1, 3]);
//! ```

pub mod allocation;
pub mod manifest;
pub mod pool_io;
pub mod scoring;
pub mod selectors;

pub use pool_io::{load_pool, Pool, PromptRecord, TaskPartition};
pub use selectors::{run_strategy, SelectionResult, Strategy, StrategyConfig};
