//! Log-domain Sinkhorn iterations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::TransportSolution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Iteration budget used when Sinkhorn is selected through [`super::OtSolver`].
#[derive(Debug, Clone, Copy)]
pub struct SinkhornParams {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

fn log_sum_exp<T: Scalar>(xs: impl Iterator<Item = T> + Clone) -> T {
    let mx = xs.clone().fold(T::neg_infinity(), T::max);
    if mx == T::neg_infinity() {
        return mx;
    }
    mx + xs.map(|x| (x - mx).exp()).sum::<T>().ln()
}

pub(super) fn solve<T: Scalar>(
    cost: ArrayView2<'_, T>,
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportSolution<T>> {
    let (n, m) = cost.dim();
    let eps = T::of(epsilon);
    let log_p = p.mapv(|v| v.ln());
    let log_q = q.mapv(|v| v.ln());
    let mut f = Array1::<T>::zeros(n);
    let mut g = Array1::<T>::zeros(m);

    let sweep = |f: &mut Array1<T>, g: &mut Array1<T>, eps: T| {
        for i in 0..n {
            let lse = log_sum_exp((0..m).map(|j| log_q[j] + (g[j] - cost[[i, j]]) / eps));
            f[i] = -eps * lse;
        }
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| log_p[i] + (f[i] - cost[[i, j]]) / eps));
            g[j] = -eps * lse;
        }
    };

    let plan = |f: &Array1<T>, g: &Array1<T>| {
        Array2::from_shape_fn((n, m), |(i, j)| {
            ((f[i] + g[j] - cost[[i, j]]) / eps + log_p[i] + log_q[j]).exp()
        })
    };

    // anneal epsilon from the cost scale down to the target, warm-starting the potentials
    let max_cost = cost.iter().fold(T::zero(), |a, &c| a.max(c.abs())).to_f64_lossy();
    let mut stages = Vec::new();
    let mut e = max_cost;
    while e > 2.0 * epsilon {
        stages.push(e);
        e *= 0.5;
    }
    for stage_eps in stages {
        let se = T::of(stage_eps);
        for _ in 0..50 {
            sweep(&mut f, &mut g, se);
        }
    }

    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        sweep(&mut f, &mut g, eps);
        // columns are exact after the g-update; measure the row defect
        if iterations % 10 == 0 || iterations == max_iter {
            let pi = plan(&f, &g);
            violation = pi
                .rows()
                .into_iter()
                .zip(p.iter())
                .map(|(row, &pv)| (row.sum() - pv).abs().to_f64_lossy())
                .sum();
            if violation <= tol {
                break;
            }
        }
    }
    if !(violation <= tol) {
        return Err(Error::NonConvergence { violation, iterations });
    }
    let coupling = plan(&f, &g);
    let value = coupling
        .iter()
        .zip(cost.iter())
        .fold(T::zero(), |acc, (&x, &c)| acc + x * c);
    Ok(TransportSolution {
        value,
        coupling,
        dual_source: f,
        dual_target: g,
    })
}
