//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gradate_core::fgw::{fgw_distance, fgw_distance_from, fgw_objective, FgwConfig};
use gradate_core::gdd::{gdd, gdd_from_cost, GddConfig, LabelInformedCost};
use gradate_core::graph::{AttributedGraph, LabeledGraphDataset};
use gradate_core::great::{great_select, gdd_gradient, sparsity_schedule, GreatConfig, WeightVector};
use gradate_core::io::{covariate_split, save_json_dataset, ShiftProperty};
use gradate_core::linear::LinearFgw;
use gradate_core::oracles::{spearman, transport_lp_oracle};
use gradate_core::ot::{solve_exact_ot, CostMatrix, OtSolver};
use gradate_core::pipeline::{gradate, random_select, selection_cost, SelectionConfig};
use gradate_core::synthetic::{erdos_renyi, erdos_renyi_featured, two_family_corpus};
use ndarray::{array, Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure!(took <= limit, "{what} took {took:.1?}, limit {limit:?}");
    Ok(())
}

fn ot_oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_value: f64 = 0.0;
    let mut worst_dual: f64 = 0.0;
    for _ in 0..50 {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let p_counts: Vec<u64> = (0..n).map(|_| rng.random_range(0..=4)).collect();
        let mut total: u64 = p_counts.iter().sum();
        let mut p_counts = p_counts;
        if total == 0 {
            p_counts[0] = 1;
            total = 1;
        }
        // random composition of the same total over m columns
        let mut q_counts = vec![0u64; m];
        for _ in 0..total {
            q_counts[rng.random_range(0..m)] += 1;
        }
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0..20) as f64 / 4.0).collect()).collect();
        let p = Array1::from_iter(p_counts.iter().map(|&c| c as f64 / total as f64));
        let q = Array1::from_iter(q_counts.iter().map(|&c| c as f64 / total as f64));
        let cm = Array2::from_shape_fn((n, m), |(i, j)| cost[i][j]);
        let sol = solve_exact_ot(&CostMatrix::new(cm.clone()).unwrap(), p.view(), q.view()).map_err(|e| e.to_string())?;
        let oracle = transport_lp_oracle(&cost, &p_counts, &q_counts);
        worst_value = worst_value.max((sol.value - oracle).abs());
        for i in 0..n {
            for j in 0..m {
                worst_dual = worst_dual.max(sol.dual_source[i] + sol.dual_target[j] - cm[[i, j]]);
            }
        }
        let dual_value = p.dot(&sol.dual_source) + q.dot(&sol.dual_target);
        worst_dual = worst_dual.max((dual_value - sol.value).abs());
    }
    ensure!(worst_value <= 1e-8, "value differs from LP oracle by {worst_value:e}");
    ensure!(worst_dual <= 1e-6, "dual infeasibility or duality gap {worst_dual:e}");
    within(Duration::from_secs(10), start, "50 instances")?;
    Ok(format!(
        "50 instances, max |value - oracle| {worst_value:.1e}, max dual violation {worst_dual:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn fgw_correctness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = FgwConfig::default();
    let mut self_worst: f64 = 0.0;
    let mut perm_worst: f64 = 0.0;
    let mut alpha0_worst: f64 = 0.0;
    for k in 0..20 {
        let n = rng.random_range(1..=10);
        let g: AttributedGraph<f64> = if k % 2 == 0 {
            erdos_renyi(n, rng.random_range(0.2..0.8), &mut rng).unwrap()
        } else {
            erdos_renyi_featured(n, rng.random_range(0.2..0.8), 2, &mut rng).unwrap()
        };
        let init = Array2::from_diag(g.node_weights());
        let d = fgw_distance_from(&g, &g, &cfg, &init).map_err(|e| e.to_string())?.distance;
        self_worst = self_worst.max(d.abs()).max(fgw_distance(&g, &g, &cfg).unwrap().distance);

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let h = g.permuted(&perm).unwrap();
        perm_worst = perm_worst.max(fgw_distance(&g, &h, &cfg).unwrap().distance);

        // same structure, fresh features: alpha = 0 is plain transport of the feature clouds
        let x2 = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        let g1 = if g.feature_dim() == 0 {
            g.with_features(Array2::from_shape_fn((n, 2), |_| rng.random::<f64>())).unwrap()
        } else {
            g.clone()
        };
        let g2 = h.with_features(x2).unwrap();
        let m = Array2::from_shape_fn((n, n), |(i, j)| {
            let diff = &g1.features().row(i) - &g2.features().row(j);
            diff.dot(&diff)
        });
        let w = solve_exact_ot(&CostMatrix::new(m).unwrap(), g1.node_weights().view(), g2.node_weights().view()).unwrap();
        let f = fgw_distance(&g1, &g2, &FgwConfig::with_alpha(0.0)).unwrap();
        alpha0_worst = alpha0_worst.max((f.distance - w.value.sqrt()).abs());
    }
    ensure!(self_worst <= 1e-8, "self-distance {self_worst:e}");
    ensure!(perm_worst <= 1e-6, "permuted-copy distance {perm_worst:e}");
    ensure!(alpha0_worst <= 1e-6, "alpha=0 differs from feature transport by {alpha0_worst:e}");

    let g1 = AttributedGraph::<f64>::from_edges_featureless(2, &[(0, 1)]).unwrap();
    let g2 = AttributedGraph::<f64>::from_edges_featureless(2, &[]).unwrap();
    let s1 = FgwConfig::with_alpha(1.0);
    // the one-parameter family [[t, 1/2 - t], [1/2 - t, t]] covers every coupling
    let grid_min = (0..=1000)
        .map(|k| {
            let t = 0.5 * k as f64 / 1000.0;
            fgw_objective(&g1, &g2, &s1, &array![[t, 0.5 - t], [0.5 - t, t]]).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    let two_node = fgw_distance(&g1, &g2, &s1).unwrap().distance;
    ensure!((two_node - 0.5f64.sqrt()).abs() <= 1e-6, "two-node distance {two_node}");
    ensure!((grid_min.sqrt() - 0.5f64.sqrt()).abs() <= 1e-6, "grid minimum {}", grid_min.sqrt());
    Ok(format!(
        "self {self_worst:.1e}, permuted {perm_worst:.1e}, alpha=0 {alpha0_worst:.1e}, two-node {two_node:.9} (grid {:.9})",
        grid_min.sqrt()
    ))
}

fn twelve_graph_suite() -> Vec<AttributedGraph<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..12)
        .map(|k| erdos_renyi(rng.random_range(5..=10), 0.15 + 0.06 * k as f64, &mut rng).unwrap())
        .collect()
}

fn linear_fgw_metric() -> Result<String, String> {
    let graphs = twelve_graph_suite();
    let cfg = FgwConfig::default();
    let lin = LinearFgw::fit(&graphs, None, &cfg).map_err(|e| e.to_string())?;
    let d = lin.pairwise();
    let n = graphs.len();
    ensure!(d.diag().iter().all(|&v| v == 0.0), "nonzero diagonal");
    ensure!(d == d.t().to_owned(), "matrix is not exactly symmetric");
    let root = d.mapv(f64::sqrt);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max(root[[i, k]] - root[[i, j]] - root[[j, k]]);
            }
        }
    }
    // slack only for floating-point rounding of the square roots
    ensure!(worst <= 1e-12, "triangle inequality violated by {worst:e}");
    let (mut approx, mut exact) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            approx.push(d[[i, j]]);
            exact.push(fgw_distance(&graphs[i], &graphs[j], &cfg).unwrap().objective);
        }
    }
    let rho = spearman(&approx, &exact);
    ensure!(rho > 0.7, "Spearman correlation {rho:.3}");
    Ok(format!("12 graphs, 220 triples, max triangle excess {worst:.1e}, Spearman {rho:.3}"))
}

fn random_labeled(rng: &mut ChaCha8Rng, len: usize) -> LabeledGraphDataset<f64> {
    let graphs: Vec<AttributedGraph<f64>> = (0..len)
        .map(|_| {
            let p = rng.random_range(0.1..0.9);
            erdos_renyi(rng.random_range(4..=9), p, rng).unwrap()
        })
        .collect();
    let labels = (0..len).map(|_| rng.random_range(0..2)).collect();
    LabeledGraphDataset::new(graphs, labels, vec![0, 1]).unwrap()
}

fn gradient_contract() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for instance in 0..10 {
        let len = rng.random_range(5..=8);
        let train = random_labeled(&mut rng, len);
        let len = rng.random_range(3..=6);
        let val = random_labeled(&mut rng, len);
        let cfg = SelectionConfig {
            c: if instance % 2 == 0 { 0.0 } else { 5.0 },
            ..SelectionConfig::default()
        };
        let cost = selection_cost(&train, &val, &cfg).map_err(|e| e.to_string())?;
        let n = train.len();
        let value = |w: &Array1<f64>| gdd_from_cost(&cost, Some(&WeightVector::new(w.clone()).unwrap()), &OtSolver::Exact).unwrap().value;
        for _ in 0..10 {
            let w = WeightVector::normalized(Array1::from_shape_fn(n, |_| 0.2 + rng.random::<f64>())).unwrap();
            let g = gdd_gradient(&cost, &w, &OtSolver::Exact).map_err(|e| e.to_string())?;
            worst_sum = worst_sum.max(g.sum().abs());
            for i in 0..n {
                let mut dir = Array1::from_elem(n, -1.0 / n as f64);
                dir[i] += 1.0;
                let plus = w.weights() + &(&dir * h);
                let minus = w.weights() - &(&dir * h);
                let plus = &plus / plus.sum();
                let minus = &minus / minus.sum();
                let fd = (value(&plus) - value(&minus)) / (2.0 * h);
                worst_rel = worst_rel.max((fd - g[i]).abs() / g[i].abs().max(1e-6));
            }
        }
    }
    ensure!(worst_rel <= 1e-3, "finite differences disagree, relative error {worst_rel:e}");
    ensure!(worst_sum <= 1e-9, "gradient sums to {worst_sum:e}");
    within(Duration::from_secs(30), start, "gradient checks")?;
    Ok(format!(
        "100 weight points, max relative error {worst_rel:.1e}, max |sum| {worst_sum:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn great_behaviour() -> Result<String, String> {
    let k = sparsity_schedule(100, 0.2, 10, 9);
    ensure!(k == 42, "schedule(100, 0.2, 10, 9) = {k}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut runs = 0;
    for (n, m, tau, eta) in [(50, 12, 0.2, 1e-4), (37, 9, 0.3, 1e-2), (64, 20, 0.1, 1e-3), (20, 5, 0.5, 0.5)] {
        let cost = LabelInformedCost::plain(Array2::from_shape_fn((n, m), |_| rng.random::<f64>() * 3.0));
        let cfg = GreatConfig {
            tau,
            eta,
            ..GreatConfig::default()
        };
        let trace = great_select(&cost, &cfg).map_err(|e| e.to_string())?;
        let mut last = n;
        for r in &trace.records {
            ensure!(r.weights.iter().all(|&v| v >= 0.0), "negative weight at t={}", r.t);
            let s: f64 = r.weights.iter().sum();
            ensure!((s - 1.0).abs() <= 1e-9, "weights sum to {s} at t={}", r.t);
            ensure!(r.support <= last, "support grew at t={}", r.t);
            last = r.support;
        }
        let target = (n as f64 * tau + 1e-9).floor() as usize;
        ensure!(trace.selected.len() == target, "selected {} of {n}, expected {target}", trace.selected.len());
        runs += 1;
    }
    Ok(format!("schedule(100, 0.2, 10, 9) = 42, invariants held on {runs} runs"))
}

fn two_domain() -> (LabeledGraphDataset<f64>, LabeledGraphDataset<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let train = two_family_corpus(60, 60, 8..=14, 0.6, 0.15, &mut rng).unwrap();
    let val = two_family_corpus(20, 0, 8..=14, 0.6, 0.15, &mut rng).unwrap();
    (train, val)
}

fn selection_quality() -> Result<String, String> {
    let start = Instant::now();
    let (train, val) = two_domain();
    let cfg = SelectionConfig {
        tau: 0.2,
        iterations: 10,
        eta: 1e-4,
        ..SelectionConfig::default()
    };
    let res = gradate(&train, &val, &cfg).map_err(|e| e.to_string())?;
    let dense = res.indices.iter().filter(|&&i| i < 60).count();
    let share = dense as f64 / res.indices.len() as f64;
    let trace = res.trace.as_ref().expect("gradate records a trace");
    let uniform_gdd = trace.records[0].gdd;

    let cost = selection_cost(&train, &val, &cfg).map_err(|e| e.to_string())?;
    let over = |idx: &[usize]| {
        let mut w = Array1::zeros(train.len());
        for &i in idx {
            w[i] = 1.0 / idx.len() as f64;
        }
        gdd_from_cost(&cost, Some(&WeightVector::new(w).unwrap()), &OtSolver::Exact).unwrap().value
    };
    let mine = over(&res.indices);
    let mut random: Vec<f64> = (0..10)
        .map(|seed| over(&random_select(&train, &SelectionConfig { seed, ..cfg }).unwrap().indices))
        .collect();
    random.sort_by(f64::total_cmp);
    let median = 0.5 * (random[4] + random[5]);
    ensure!(share >= 0.9, "only {dense}/{} selected graphs are dense", res.indices.len());
    ensure!(trace.final_gdd <= uniform_gdd, "final GDD {} above uniform {uniform_gdd}", trace.final_gdd);
    ensure!(mine <= median, "selection GDD {mine} above random median {median}");
    within(Duration::from_secs(120), start, "selection")?;
    Ok(format!(
        "{dense}/{} dense, GDD final {:.4} <= uniform {uniform_gdd:.4}, selection {mine:.4} <= random median {median:.4}, {:.1?}",
        res.indices.len(),
        trace.final_gdd,
        start.elapsed()
    ))
}

fn label_collapse() -> Result<String, String> {
    let (train, val) = two_domain();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut suites = vec![(train, val)];
    for _ in 0..4 {
        suites.push((random_labeled(&mut rng, 10), random_labeled(&mut rng, 5)));
    }
    let suite = LabeledGraphDataset::new(twelve_graph_suite(), (0..12).map(|i| i % 2).collect(), vec![0, 1]).unwrap();
    suites.push((suite.subset(&(0..8).collect::<Vec<_>>()).unwrap(), suite.subset(&[8, 9, 10, 11]).unwrap()));
    let cfg = GddConfig::default();
    for (k, (train, val)) in suites.iter().enumerate() {
        let (a, sa) = gdd(train, val, None, &cfg).map_err(|e| e.to_string())?;
        let (b, sb) = gdd(&train.collapse_labels(), &val.collapse_labels(), None, &cfg).map_err(|e| e.to_string())?;
        ensure!(a.to_bits() == b.to_bits(), "suite {k}: {a} vs {b}");
        ensure!(sa == sb, "suite {k}: transport solutions differ");
    }
    Ok(format!("{} datasets bit-identical", suites.len()))
}

fn run_cli(args: &[&str], cache: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gradate"))
        .args(args)
        .env("GRADATE_CACHE_DIR", cache)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "gradate {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn reproducibility() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ds: LabeledGraphDataset<f64> = two_family_corpus(20, 20, 5..=10, 0.6, 0.15, &mut rng).unwrap();
    let data = dir.join("ds.json");
    save_json_dataset(&ds, &data).map_err(|e| e.to_string())?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let data = p("ds.json");
    run_cli(&["split", &data, "--by", "density", "--out", &p("split.json")], &dir.join("cache"))?;
    for (i, cache) in ["cache-a", "cache-b"].iter().enumerate() {
        run_cli(
            &[
                "select", &data, "--split", &p("split.json"), "--method", "gradate", "--tau", "0.5", "--c", "5", "--seed", "11",
                "--out", &p(&format!("sel{i}.json")), "--trace", &p(&format!("trace{i}.csv")),
            ],
            &dir.join(cache),
        )?;
    }
    let read = |name: &str| std::fs::read(dir.join(name)).map_err(|e| e.to_string());
    ensure!(read("sel0.json")? == read("sel1.json")?, "selection files differ");
    ensure!(read("trace0.csv")? == read("trace1.csv")?, "trace files differ");

    let graphs = vec![AttributedGraph::<f64>::from_edges_featureless(3, &[(0, 1)]).unwrap(); 563];
    let split = covariate_split(&LabeledGraphDataset::unlabeled(graphs).unwrap(), ShiftProperty::Density).map_err(|e| e.to_string())?;
    let sizes = (split.train_idx.len(), split.val_idx.len(), split.test_idx.len());
    ensure!(sizes == (337, 112, 114), "563 graphs split as {sizes:?}");
    Ok(format!("two CLI runs byte-identical, 563 -> {}/{}/{}", sizes.0, sizes.1, sizes.2))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("OT oracle equivalence", ot_oracle_equivalence),
        ("FGW correctness", fgw_correctness),
        ("LinearFGW metric properties", linear_fgw_metric),
        ("gradient contract", gradient_contract),
        ("GREAT behavior", great_behaviour),
        ("selection quality at desk scale", selection_quality),
        ("label collapse without label weight", label_collapse),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
