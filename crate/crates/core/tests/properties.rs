use proptest::prelude::*;
use std::io::Cursor;
use tasksel_core::allocation::{
    allocate_active_it, allocate_task_diversity, allocate_weighted, AllocationStrategy, AllocationVector,
};
use tasksel_core::pool_io::{decode_embeddings, encode_embeddings, read_records, EmbeddingMatrix, Pool, PromptRecord};
use tasksel_core::scoring::{confidence, log_confidence, mean_entropy, score_pool};
use tasksel_core::selectors::{
    round_robin, run_strategy, select_dpp, select_facility_location, select_k_center, select_uncertainty,
    KernelSpec, Strategy as SelectStrategy, StrategyConfig, UncertaintyCriterion,
};
use tasksel_oracles::objectives::{direct_product, log_det, OracleKernel};
use tasksel_oracles::{oracle_kcenter_radius, OracleBudgetLimits};

fn pool_from_counts(counts: &[usize]) -> Pool {
    let mut recs = Vec::new();
    for (t, &n) in counts.iter().enumerate() {
        for i in 0..n {
            recs.push(PromptRecord::new(format!("t{t:02}-{i}"), format!("task{t:02}")));
        }
    }
    Pool::from_records(recs).unwrap()
}

fn point_pool(points: &[Vec<f32>]) -> Pool {
    Pool::from_records(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| PromptRecord::new(format!("p{i}"), "t").with_embedding(p.clone()))
            .collect(),
    )
    .unwrap()
}

fn as_f64(points: &[Vec<f32>]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.iter().map(|&x| x as f64).collect()).collect()
}

/// Smallest integer level `m` with `sum(min(n_t, m)) >= target`.
fn minmax_level(counts: &[usize], target: usize) -> usize {
    (0..).find(|&m| counts.iter().map(|&n| n.min(m)).sum::<usize>() >= target).unwrap()
}

fn counts_and_conf(max_tasks: usize) -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop::collection::vec((1usize..60, 0.01f64..1.0), 1..max_tasks)
        .prop_map(|v| v.into_iter().unzip())
}

fn token_probs() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.001f64..1.0, 1..5), 1..20).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                // normalize, then sort so the first entry is the top candidate
                let s: f64 = r.iter().sum();
                let mut p: Vec<f64> = r.iter().map(|x| x / s).collect();
                p.sort_by(|a, b| b.total_cmp(a));
                p
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn water_fill_is_exact_and_minmax(counts in prop::collection::vec(1usize..40, 1..10), budget in 1usize..300) {
        let a = allocate_task_diversity(&counts, budget).unwrap();
        let target = budget.min(counts.iter().sum());
        prop_assert!((a.total() - target as f64).abs() < 1e-9);
        for (&x, &n) in a.alpha.iter().zip(&counts) {
            prop_assert!(x >= 0.0 && x <= n as f64);
        }
        let peak = a.ceil().into_iter().max().unwrap();
        prop_assert_eq!(peak, minmax_level(&counts, target));
        // unsaturated tasks share one level
        let level = a.alpha.iter().copied().fold(0.0, f64::max);
        for (&x, &n) in a.alpha.iter().zip(&counts) {
            prop_assert!(x == n as f64 || (x - level).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_respects_clamps_and_shares_scale((counts, conf) in counts_and_conf(20), budget in 1usize..600, base in 0usize..8) {
        let a = allocate_weighted(&counts, &conf, budget, base).unwrap();
        let target = budget.min(counts.iter().sum());
        prop_assert!((a.total() - target as f64).abs() <= 1e-6);
        if a.strategy == AllocationStrategy::TaskDiversity {
            prop_assert!(!a.feasible);
            prop_assert!(counts.iter().map(|&n| n.min(base)).sum::<usize>() > target);
            return Ok(());
        }
        let c = a.scale.unwrap();
        for t in 0..counts.len() {
            let lo = counts[t].min(base) as f64;
            let hi = counts[t] as f64;
            prop_assert!(a.alpha[t] >= lo && a.alpha[t] <= hi);
            if a.alpha[t] > lo && a.alpha[t] < hi {
                prop_assert!((a.alpha[t] * conf[t] - c).abs() <= 1e-9 * c.max(1.0));
            }
        }
    }

    #[test]
    fn weighted_lower_confidence_gets_at_least_as_much(n in 5usize..50, conf in prop::collection::vec(0.01f64..1.0, 2..8), budget in 10usize..200) {
        let counts = vec![n; conf.len()];
        let a = allocate_weighted(&counts, &conf, budget, 5).unwrap();
        for s in 0..conf.len() {
            for t in 0..conf.len() {
                if conf[s] < conf[t] {
                    prop_assert!(a.alpha[s] >= a.alpha[t] - 1e-9);
                }
            }
        }
    }

    #[test]
    fn weighted_is_scale_invariant((counts, conf) in counts_and_conf(12), budget in 1usize..300, factor in 0.05f64..50.0) {
        let a = allocate_weighted(&counts, &conf, budget, 5).unwrap();
        let scaled: Vec<f64> = conf.iter().map(|c| c * factor).collect();
        let b = allocate_weighted(&counts, &scaled, budget, 5).unwrap();
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn active_it_takes_a_confidence_prefix((counts, conf) in counts_and_conf(10), budget in 1usize..300) {
        let a = allocate_active_it(&counts, &conf, budget).unwrap();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&x, &y| conf[x].total_cmp(&conf[y]).then(x.cmp(&y)));
        let mut stage = 0; // 0: full tasks, 1: after the partial one
        for t in order {
            let x = a.alpha[t];
            prop_assert_eq!(x.fract(), 0.0);
            match stage {
                0 if x == counts[t] as f64 => {}
                0 => stage = 1,
                _ => prop_assert_eq!(x, 0.0),
            }
        }
        prop_assert_eq!(a.total(), budget.min(counts.iter().sum()) as f64);
    }

    #[test]
    fn round_robin_contract(
        spec in prop::collection::vec((1usize..15, 0.0f64..20.0), 1..8),
        budget in 1usize..80,
        seed in any::<u64>(),
    ) {
        let counts: Vec<usize> = spec.iter().map(|s| s.0).collect();
        let alloc = AllocationVector {
            alpha: spec.iter().map(|s| s.1).collect(),
            budget,
            feasible: true,
            strategy: AllocationStrategy::TaskDiversity,
            scale: None,
            warnings: Vec::new(),
        };
        let pool = pool_from_counts(&counts);
        let r = round_robin(&alloc, pool.partition(), budget, seed).unwrap();
        let caps: Vec<usize> = alloc.ceil().iter().zip(&counts).map(|(&c, &n)| c.min(n)).collect();
        prop_assert_eq!(r.selected.len(), budget.min(caps.iter().sum()));
        let mut seen = r.selected.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), r.selected.len());
        prop_assert_eq!(pool.partition().tally(&r.selected), r.per_task.clone());
        for t in 0..counts.len() {
            prop_assert!(r.per_task[t] <= caps[t]);
        }
        for a in 0..counts.len() {
            for b in 0..counts.len() {
                if r.per_task[a] < caps[a] && r.per_task[b] < caps[b] {
                    prop_assert!(r.per_task[a].abs_diff(r.per_task[b]) <= 1);
                }
            }
        }
        let again = round_robin(&alloc, pool.partition(), budget, seed).unwrap();
        prop_assert_eq!(again.selected, r.selected);
    }

    #[test]
    fn log_space_matches_direct_product(tp in token_probs()) {
        let direct = direct_product(&tp);
        let ours = confidence(&tp).unwrap();
        prop_assert!((ours - direct).abs() <= 1e-9 * direct);
        prop_assert!((log_confidence(&tp).unwrap() - direct.ln()).abs() <= 1e-9 * direct.ln().abs().max(1.0));
    }

    #[test]
    fn sequence_scores_ignore_position_order(tp in token_probs(), rot in 0usize..20) {
        let mut shuffled = tp.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        let (a, b) = (confidence(&tp).unwrap(), confidence(&shuffled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        let (a, b) = (mean_entropy(&tp).unwrap(), mean_entropy(&shuffled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn confidence_grows_with_top_probability(tp in token_probs(), pos in 0usize..20, bump in 0.0f64..1.0) {
        let pos = pos % tp.len();
        let mut higher = tp.clone();
        higher[pos][0] += (1.0 - higher[pos][0]) * bump;
        prop_assert!(confidence(&higher).unwrap() >= confidence(&tp).unwrap());
    }

    #[test]
    fn pool_jsonl_roundtrip(
        rows in prop::collection::vec((0usize..4, prop::option::of(0.001f64..=1.0), prop::option::of(prop::collection::vec(-100.0f32..100.0, 3))), 1..30)
    ) {
        let recs: Vec<PromptRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (t, c, e))| {
                let mut r = PromptRecord::new(format!("id{i}"), format!("task {t}"));
                r.confidence = c;
                r.embedding = e;
                r
            })
            .collect();
        let pool = Pool::from_records(recs.clone()).unwrap();
        let mut buf = Vec::new();
        pool.write_jsonl(&mut buf).unwrap();
        prop_assert_eq!(read_records(Cursor::new(buf)).unwrap(), recs);
    }

    #[test]
    fn sidecar_roundtrip(rows in 0usize..20, dim in 1usize..9, seed in any::<u32>()) {
        let data: Vec<f32> = (0..rows * dim).map(|k| ((k as u32).wrapping_mul(2654435761) ^ seed) as f32 * 1e-6).collect();
        let m = EmbeddingMatrix { rows, dim, data };
        let bytes = encode_embeddings(&m);
        prop_assert_eq!(bytes.len(), 16 + 4 * rows * dim);
        prop_assert_eq!(decode_embeddings(&bytes).unwrap(), m);
    }

    #[test]
    fn uncertainty_is_argsort(conf in prop::collection::vec(0.0f64..1.0, 1..40), budget in 1usize..50) {
        let pool = Pool::from_records(
            conf.iter().enumerate().map(|(i, &c)| PromptRecord::new(format!("r{i}"), "t").with_confidence(c)).collect(),
        ).unwrap();
        let scores = score_pool(&pool).unwrap();
        let r = select_uncertainty(&pool, &scores, UncertaintyCriterion::LeastConfidence, budget).unwrap();
        let mut idx: Vec<usize> = (0..conf.len()).collect();
        idx.sort_by(|&a, &b| conf[a].total_cmp(&conf[b]).then(a.cmp(&b)));
        idx.truncate(budget);
        prop_assert_eq!(r.selected, idx);
    }
}

fn points(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    (1..=max_d).prop_flat_map(move |d| prop::collection::vec(prop::collection::vec(-3.0f32..3.0, d), 2..=max_n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn facility_trace_is_monotone(pts in points(30, 5), k in 1usize..10, which in 0usize..3) {
        let kernel = [KernelSpec::rbf(0.1), KernelSpec::cosine(), KernelSpec::euclidean()][which];
        let r = select_facility_location(&point_pool(&pts), k, &kernel).unwrap();
        let t = r.objective_trace.unwrap();
        prop_assert_eq!(t.len(), k.min(pts.len()));
        prop_assert!(t.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0)), "{:?}", t);
    }

    #[test]
    fn k_center_within_twice_optimum(pts in points(9, 3), k in 1usize..4) {
        let r = select_k_center(&point_pool(&pts), k).unwrap();
        let radius = *r.objective_trace.unwrap().last().unwrap();
        let opt = oracle_kcenter_radius(&as_f64(&pts), k.min(pts.len()), &OracleBudgetLimits::default()).unwrap();
        prop_assert!(radius <= 2.0 * opt + 1e-9, "{radius} > 2 * {opt}");
    }

    #[test]
    fn dpp_trace_is_log_det_of_prefix(pts in points(10, 4), k in 1usize..5) {
        let pool = point_pool(&pts);
        let f = as_f64(&pts);
        if let Ok(r) = select_dpp(&pool, k, &KernelSpec::euclidean(), 1e-3) {
            for (step, &v) in r.objective_trace.as_ref().unwrap().iter().enumerate() {
                let direct = log_det(&f, OracleKernel::InnerProduct, 1e-3, &r.selected[..=step]);
                prop_assert!((v - direct).abs() <= 1e-6 * direct.abs().max(1.0), "{v} vs {direct}");
            }
        }
    }
}

#[test]
fn eight_task_shape() {
    // two tasks with systematically lower confidence
    let mut recs = Vec::new();
    for t in 0..8 {
        let conf = if t == 3 || t == 6 { 0.15 } else { 0.7 };
        for i in 0..60 {
            recs.push(PromptRecord::new(format!("{t}-{i}"), format!("cat{t}")).with_confidence(conf + 0.002 * i as f64));
        }
    }
    let pool = Pool::from_records(recs).unwrap();
    let td = run_strategy(&pool, &StrategyConfig::new(SelectStrategy::TaskDiversity, 120)).unwrap();
    let wtd = run_strategy(&pool, &StrategyConfig::new(SelectStrategy::WeightedTaskDiversity, 120)).unwrap();
    assert_eq!(wtd.per_task.iter().sum::<usize>(), 120);
    for t in [3, 6] {
        assert!(wtd.per_task[t] > td.per_task[t], "{:?} vs {:?}", wtd.per_task, td.per_task);
    }
    assert!(wtd.per_task.iter().all(|&c| c >= 5));
}
