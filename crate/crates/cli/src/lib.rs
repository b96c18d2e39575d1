//! Subcommand implementations behind the `tasksel` binary.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use tasksel_core::allocation::DEFAULT_BASE;
use tasksel_core::manifest::{write_atomic, Manifest, RunInputs};
use tasksel_core::pool_io::{load_pool, Pool};
use tasksel_core::scoring::{read_scores, score_pool, write_scores};
use tasksel_core::selectors::{
    run_strategy_with_scores, KernelKind, KernelSpec, SelectError, Strategy, StrategyConfig, DEFAULT_JITTER,
};

pub const DEFAULT_GAMMA: f64 = 0.1;

/// Everything `select` needs; each field maps to one command-line flag.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pool: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub strategy: String,
    pub budget: usize,
    pub seed: u64,
    pub base_allocation: usize,
    /// `None` uses the strategy default.
    pub kernel: Option<KernelKind>,
    pub gamma: f64,
    pub jitter: f64,
    pub output: PathBuf,
    pub scores_cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(pool: impl Into<PathBuf>, strategy: &str, budget: usize, output: impl Into<PathBuf>) -> Self {
        Self {
            pool: pool.into(),
            embeddings: None,
            strategy: strategy.to_string(),
            budget,
            seed: 0,
            base_allocation: DEFAULT_BASE,
            kernel: None,
            gamma: DEFAULT_GAMMA,
            jitter: DEFAULT_JITTER,
            output: output.into(),
            scores_cache: None,
        }
    }

    pub fn strategy_config(&self) -> Result<StrategyConfig> {
        if self.budget == 0 {
            bail!("config error: --budget must be at least 1");
        }
        let strategy: Strategy = self.strategy.parse()?;
        let mut cfg = StrategyConfig::new(strategy, self.budget)
            .with_seed(self.seed)
            .with_base(self.base_allocation)
            .with_jitter(self.jitter);
        let kind = self.kernel.or(strategy.default_kernel().map(|k| k.kind));
        if let Some(kind) = kind {
            cfg = cfg.with_kernel(match kind {
                KernelKind::Euclidean => KernelSpec::euclidean(),
                KernelKind::Rbf => KernelSpec::rbf(self.gamma),
                KernelKind::Cosine => KernelSpec::cosine(),
            });
        }
        cfg.resolved_kernel()?;
        Ok(cfg)
    }
}

fn load(pool: &Path, embeddings: Option<&Path>) -> Result<Pool> {
    load_pool(pool, embeddings).with_context(|| format!("loading pool {}", pool.display()))
}

/// Score every record and write the cache to `output`. Returns the record count.
pub fn cmd_score(pool_path: &Path, output: &Path) -> Result<usize> {
    let pool = load(pool_path, None)?;
    let scores = score_pool(&pool)?;
    let mut buf = Vec::new();
    write_scores(&pool, &scores, &mut buf)?;
    write_atomic(output, &buf).with_context(|| format!("writing {}", output.display()))?;
    Ok(pool.len())
}

/// Run one selection and write its manifest. No manifest is written on error.
pub fn cmd_select(config: &RunConfig) -> Result<Manifest> {
    let strategy_config = config.strategy_config()?;
    let pool = load(&config.pool, config.embeddings.as_deref())?;
    let cached = match &config.scores_cache {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Some(read_scores(&pool, BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?)
        }
        None => None,
    };
    let result = match run_strategy_with_scores(&pool, cached.as_deref(), &strategy_config) {
        Ok(r) => r,
        Err(SelectError::RankExhausted { partial }) => bail!(
            "dpp kernel became singular after {} of {} picks; raise --jitter or lower --budget",
            partial.selected.len(),
            config.budget
        ),
        Err(e) => return Err(e.into()),
    };
    let inputs = RunInputs {
        pool: config.pool.display().to_string(),
        embeddings: config.embeddings.as_ref().map(|p| p.display().to_string()),
        scores_cache: config.scores_cache.as_ref().map(|p| p.display().to_string()),
    };
    let manifest = Manifest::new(&pool, &result, config.budget, inputs);
    manifest
        .write(&config.output)
        .with_context(|| format!("writing {}", config.output.display()))?;
    Ok(manifest)
}

/// Human-readable summary of a manifest, tasks sorted by selected count.
pub fn cmd_report(manifest_path: &Path) -> Result<String> {
    let m = Manifest::read(manifest_path)?;
    Ok(render_report(&m))
}

pub fn render_report(m: &Manifest) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "strategy: {}", m.strategy);
    let params: Vec<String> = m.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(out, "params:   {}", params.join(" "));
    let _ = writeln!(out, "pool:     {}", m.inputs.pool);
    let _ = writeln!(
        out,
        "seed: {}  budget: {}  selected: {}",
        m.seed,
        m.budget,
        m.selected_ids.len()
    );

    let conf = |task: &str| {
        m.allocation
            .as_ref()
            .and_then(|rows| rows.iter().find(|r| r.label == task))
            .and_then(|r| r.conf_t)
    };
    let mut rows: Vec<_> = m.per_task.iter().collect();
    rows.sort_by(|a, b| b.selected.cmp(&a.selected).then_with(|| a.task.cmp(&b.task)));
    let width = rows.iter().map(|r| r.task.len()).max().unwrap_or(0).max(4);
    let _ = writeln!(out);
    let _ = write!(out, "{:<width$}  {:>8}  {:>9}", "task", "selected", "available");
    let with_conf = rows.iter().any(|r| conf(&r.task).is_some());
    if with_conf {
        let _ = write!(out, "  {:>10}", "conf_t");
    }
    let _ = writeln!(out);
    for r in rows {
        let _ = write!(out, "{:<width$}  {:>8}  {:>9}", r.task, r.selected, r.available);
        if with_conf {
            match conf(&r.task) {
                Some(c) => {
                    let _ = write!(out, "  {c:>10.6}");
                }
                None => {
                    let _ = write!(out, "  {:>10}", "-");
                }
            }
        }
        let _ = writeln!(out);
    }

    if let Some(trace) = m.objective_trace.as_ref().filter(|t| !t.is_empty()) {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "objective: first={} last={} steps={}",
            trace[0],
            trace[trace.len() - 1],
            trace.len()
        );
    }
    for w in &m.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
