use approx::assert_abs_diff_eq;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::oracles::{assignment_brute_force, transport_lp_oracle};

fn cost(values: Array2<f64>) -> CostMatrix<f64> {
    CostMatrix::new(values).unwrap()
}

fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Random instance with rational marginals: counts and their normalizations.
fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Array2<f64>, Vec<u64>, Vec<u64>) {
    let c = Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..10.0));
    let a: Vec<u64> = (0..n).map(|_| rng.random_range(1..8)).collect();
    let b: Vec<u64> = (0..m).map(|_| rng.random_range(1..8)).collect();
    let sa: u64 = a.iter().sum();
    let sb: u64 = b.iter().sum();
    let p = a.iter().map(|x| x * sb).collect();
    let q = b.iter().map(|x| x * sa).collect();
    (c, p, q)
}

fn normalize(counts: &[u64]) -> Array1<f64> {
    let t: u64 = counts.iter().sum();
    Array1::from_iter(counts.iter().map(|&c| c as f64 / t as f64))
}

fn assert_valid(sol: &TransportSolution<f64>, c: &Array2<f64>, p: &Array1<f64>, q: &Array1<f64>) {
    for (row, &pv) in sol.coupling.rows().into_iter().zip(p) {
        assert_abs_diff_eq!(row.sum(), pv, epsilon = 1e-6);
    }
    for (col, &qv) in sol.coupling.columns().into_iter().zip(q) {
        assert_abs_diff_eq!(col.sum(), qv, epsilon = 1e-6);
    }
    assert!(sol.coupling.iter().all(|&x| x >= 0.0));
    assert_abs_diff_eq!(sol.value, (&sol.coupling * c).sum(), epsilon = 1e-6);
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            assert!(sol.dual_source[i] + sol.dual_target[j] <= c[[i, j]] + 1e-6);
        }
    }
    let dual = p.dot(&sol.dual_source) + q.dot(&sol.dual_target);
    assert_abs_diff_eq!(dual, sol.value, epsilon = 1e-6);
}

#[test]
fn single_point() {
    let sol = solve_exact_ot(&cost(array![[0.0]]), array![1.0].view(), array![1.0].view()).unwrap();
    assert_eq!(sol.value, 0.0);
    assert_eq!(sol.coupling, array![[1.0]]);
}

#[test]
fn zero_cost_matching() {
    let c = array![[0.0, 1.0], [1.0, 0.0]];
    let u = uniform(2);
    let sol = solve_exact_ot(&cost(c.clone()), u.view(), u.view()).unwrap();
    assert_eq!(sol.value, 0.0);
    assert_eq!(sol.coupling, array![[0.5, 0.0], [0.0, 0.5]]);
    assert_valid(&sol, &c, &u, &u);
}

#[test]
fn random_4x3_matches_vertex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (c, pc, qc) = random_instance(&mut rng, 4, 3);
        let (p, q) = (normalize(&pc), normalize(&qc));
        let sol = solve_exact_ot(&cost(c.clone()), p.view(), q.view()).unwrap();
        let oracle = transport_lp_oracle(&rows(&c), &pc, &qc);
        assert_abs_diff_eq!(sol.value, oracle, epsilon = 1e-8);
        assert_valid(&sol, &c, &p, &q);
    }
}

#[test]
fn transpose_symmetry_and_constant_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(1..7);
        let m = rng.random_range(1..7);
        let (c, pc, qc) = random_instance(&mut rng, n, m);
        let (p, q) = (normalize(&pc), normalize(&qc));
        let a = solve_exact_ot(&cost(c.clone()), p.view(), q.view()).unwrap();
        let b = solve_exact_ot(&cost(c.t().to_owned()), q.view(), p.view()).unwrap();
        assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-9);
        let kappa = 2.75;
        let shifted = solve_exact_ot(&cost(&c + kappa), p.view(), q.view()).unwrap();
        assert_abs_diff_eq!(shifted.value, a.value + kappa, epsilon = 1e-9);
    }
}

#[test]
fn uniform_square_equals_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=6 {
        let c = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..5.0));
        let u = uniform(n);
        let sol = solve_exact_ot(&cost(c.clone()), u.view(), u.view()).unwrap();
        assert_abs_diff_eq!(sol.value * n as f64, assignment_brute_force(&rows(&c)), epsilon = 1e-9);
        assert_valid(&sol, &c, &u, &u);
    }
}

#[test]
fn zero_mass_atoms_are_reinserted() {
    let c = array![[1.0, 4.0, 2.0], [3.0, 0.5, 6.0], [2.0, 2.0, 2.0]];
    let p = array![0.5, 0.0, 0.5];
    let q = array![0.25, 0.75, 0.0];
    let sol = solve_exact_ot(&cost(c.clone()), p.view(), q.view()).unwrap();
    assert_eq!(sol.coupling.row(1).sum(), 0.0);
    assert_eq!(sol.coupling.column(2).sum(), 0.0);
    assert!(sol.dual_source.iter().all(|v| v.is_finite()));
    assert_valid(&sol, &c, &p, &q);
    // the reinstated source dual is tight against some target
    let tight = (0..3).any(|j| (sol.dual_source[1] + sol.dual_target[j] - c[[1, j]]).abs() < 1e-12);
    assert!(tight);
}

#[test]
fn degenerate_assignment_terminates() {
    // many ties: every permutation is optimal
    let n = 12;
    let c = Array2::from_elem((n, n), 1.0);
    let u = uniform(n);
    let sol = solve_exact_ot(&cost(c.clone()), u.view(), u.view()).unwrap();
    assert_abs_diff_eq!(sol.value, 1.0, epsilon = 1e-12);
    assert_valid(&sol, &c, &u, &u);
}

#[test]
fn larger_instance_is_feasible_and_dual_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (n, m) = (60, 25);
    let c = Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..1.0));
    let (p, q) = (uniform(n), uniform(m));
    let sol = solve_exact_ot(&cost(c.clone()), p.view(), q.view()).unwrap();
    assert_valid(&sol, &c, &p, &q);
}

#[test]
fn negative_costs_allowed_internally() {
    let c = array![[-1.0, 2.0], [0.5, -3.0]];
    let u = uniform(2);
    let sol = solve_exact_unchecked(c.view(), u.view(), u.view()).unwrap();
    assert_abs_diff_eq!(sol.value, -2.0, epsilon = 1e-12);
    assert!(CostMatrix::new(c).is_err());
}

#[test]
fn rejects_bad_marginals() {
    let c = cost(array![[1.0, 2.0]]);
    let err = solve_exact_ot(&c, array![0.9].view(), array![0.5, 0.5].view()).unwrap_err();
    assert!(matches!(err, Error::InfeasibleMarginals { which: "p", .. }));
    let err = solve_exact_ot(&c, array![1.0].view(), array![1.5, -0.5].view()).unwrap_err();
    assert!(matches!(err, Error::InfeasibleMarginals { which: "q", .. }));
    let err = solve_exact_ot(&c, array![1.0].view(), array![1.0].view()).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch { .. }));
}

#[test]
fn f32_solver_agrees_with_f64() {
    let c = array![[0.3f32, 1.2, 0.7], [0.9, 0.1, 0.4]];
    let p = array![0.4f32, 0.6];
    let q = array![0.2f32, 0.5, 0.3];
    let s32 = solve_exact_ot(&CostMatrix::new(c.clone()).unwrap(), p.view(), q.view()).unwrap();
    let s64 = solve_exact_ot(
        &cost(c.mapv(|v| v as f64)),
        (p.mapv(|v| v as f64) / p.mapv(|v| v as f64).sum()).view(),
        (q.mapv(|v| v as f64) / q.mapv(|v| v as f64).sum()).view(),
    )
    .unwrap();
    assert!((s32.value as f64 - s64.value).abs() < 1e-5);
}

#[test]
fn sinkhorn_constant_cost() {
    let c = Array2::from_elem((3, 5), 2.5);
    for eps in [0.01, 0.1, 1.0, 10.0] {
        let sol = solve_sinkhorn(&cost(c.clone()), uniform(3).view(), uniform(5).view(), eps, 1000, 1e-9).unwrap();
        assert_abs_diff_eq!(sol.value, 2.5, epsilon = 1e-9);
    }
}

#[test]
fn sinkhorn_swap_cost_close_to_exact() {
    let c = array![[0.0, 1.0], [1.0, 0.0]];
    let sol = solve_sinkhorn(&cost(c), uniform(2).view(), uniform(2).view(), 0.01, 5000, 1e-9).unwrap();
    assert!(sol.value.abs() < 0.05);
}

#[test]
fn sinkhorn_epsilon_ladder_approaches_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let c = Array2::from_shape_fn((5, 5), |_| rng.random_range(0.0..1.0));
    let u = uniform(5);
    let exact = solve_exact_ot(&cost(c.clone()), u.view(), u.view()).unwrap().value;
    let mut prev = f64::INFINITY;
    for eps in [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01] {
        let v = solve_sinkhorn(&cost(c.clone()), u.view(), u.view(), eps, 50_000, 1e-10).unwrap().value;
        assert!(v >= exact - 1e-9, "entropic cost below the LP optimum");
        assert!(v <= prev + 1e-9, "eps={eps}: {v} > {prev}");
        prev = v;
    }
    assert!(prev - exact < 0.02);
}

#[test]
fn sinkhorn_within_bound_on_random_8x8() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let c = Array2::from_shape_fn((8, 8), |_| rng.random_range(0.0..1.0));
        let u = uniform(8);
        let exact = solve_exact_ot(&cost(c.clone()), u.view(), u.view()).unwrap().value;
        let eps = 0.01 * c.mean().unwrap();
        let v = solve_sinkhorn(&cost(c.clone()), u.view(), u.view(), eps, 100_000, 1e-6).unwrap().value;
        let max_c = c.iter().copied().fold(0.0, f64::max);
        assert!((v - exact).abs() <= 0.1 * max_c);
    }
}

#[test]
fn sinkhorn_reports_nonconvergence_and_bad_epsilon() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = Array2::from_shape_fn((6, 6), |_| rng.random_range(0.0..1.0));
    let u = uniform(6);
    let err = solve_sinkhorn(&cost(c.clone()), u.view(), u.view(), 1e-4, 1, 1e-14).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { .. }));
    assert!(solve_sinkhorn(&cost(c), u.view(), u.view(), 0.0, 10, 1e-9).is_err());
}

#[test]
fn calibrate_examples() {
    let sol = TransportSolution {
        value: 0.0,
        coupling: Array2::zeros((3, 1)),
        dual_source: array![1.0, 1.0, 1.0],
        dual_target: array![0.0],
    };
    let cal = calibrate_duals(&sol);
    assert_eq!(cal.dual_source, array![0.0, 0.0, 0.0]);
    assert_eq!(cal.dual_target, array![1.0]);

    let sol = TransportSolution {
        value: 0.0,
        coupling: Array2::zeros((2, 1)),
        dual_source: array![2.0, 0.0],
        dual_target: array![0.0],
    };
    assert_eq!(calibrate_duals(&sol).dual_source, array![1.0, -1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_solution_is_primal_dual_optimal(
        n in 1usize..6,
        m in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, pc, qc) = random_instance(&mut rng, n, m);
        let (p, q) = (normalize(&pc), normalize(&qc));
        let sol = solve_exact_ot(&cost(c.clone()), p.view(), q.view()).unwrap();
        assert_valid(&sol, &c, &p, &q);
        let cal = calibrate_duals(&sol);
        prop_assert!(cal.dual_source.sum().abs() < 1e-9);
        prop_assert_eq!(&cal.coupling, &sol.coupling);
        let dual = p.dot(&cal.dual_source) + q.dot(&cal.dual_target);
        prop_assert!((dual - sol.value).abs() < 1e-6);
    }
}
