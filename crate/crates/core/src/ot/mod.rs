//! Discrete optimal transport between weighted point sets.
//!
//! [`solve_exact_ot`] solves the transportation linear program with a network
//! simplex and returns optimal dual potentials; [`solve_sinkhorn`] solves the
//! entropic relaxation in the log domain.

mod network_simplex;
mod sinkhorn;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::check_probability;
use crate::scalar::Scalar;

pub use sinkhorn::SinkhornParams;

/// Nonnegative, finite pairwise cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    values: Array2<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        for ((row, col), v) in values.indexed_iter() {
            if !v.is_finite() || *v < T::zero() {
                return Err(Error::InvalidCost { row, col });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Optimal transport value, coupling and dual potentials.
///
/// For the exact solver the duals satisfy `dual_source[i] + dual_target[j] <= cost[i, j]`
/// and `p . dual_source + q . dual_target == value`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution<T> {
    pub value: T,
    pub coupling: Array2<T>,
    pub dual_source: Array1<T>,
    pub dual_target: Array1<T>,
}

/// Which transport solver backs a computation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OtSolver {
    Exact,
    Sinkhorn { epsilon: f64 },
}

impl Default for OtSolver {
    fn default() -> Self {
        OtSolver::Exact
    }
}

impl OtSolver {
    pub fn solve<T: Scalar>(
        &self,
        cost: &CostMatrix<T>,
        p: ArrayView1<'_, T>,
        q: ArrayView1<'_, T>,
    ) -> Result<TransportSolution<T>> {
        match *self {
            OtSolver::Exact => solve_exact_ot(cost, p, q),
            OtSolver::Sinkhorn { epsilon } => {
                let params = SinkhornParams::default();
                solve_sinkhorn(cost, p, q, epsilon, params.max_iter, params.tol)
            }
        }
    }
}

/// Exact OT by network simplex.
///
/// Zero-mass atoms are removed before solving and reinserted with zero
/// coupling rows/columns; their dual is the largest value keeping the dual
/// constraints feasible (the c-transform of the opposite potential).
pub fn solve_exact_ot<T: Scalar>(
    cost: &CostMatrix<T>,
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
) -> Result<TransportSolution<T>> {
    check_marginals(cost.shape(), p, q)?;
    solve_exact_unchecked(cost.view(), p, q)
}

/// Exact OT for any finite cost (negative entries allowed) and marginals
/// already known to be valid. Used by the conditional-gradient solvers.
pub(crate) fn solve_exact_unchecked<T: Scalar>(
    cost: ArrayView2<'_, T>,
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
) -> Result<TransportSolution<T>> {
    with_support(cost, p, q, |c, ps, qs| network_simplex::solve(c, ps, qs))
}

/// Entropic OT. The reported value is `<coupling, cost>` without the entropy term.
pub fn solve_sinkhorn<T: Scalar>(
    cost: &CostMatrix<T>,
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportSolution<T>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::ConfigInvalid(format!("sinkhorn epsilon must be > 0, got {epsilon}")));
    }
    check_marginals(cost.shape(), p, q)?;
    with_support(cost.view(), p, q, |c, ps, qs| {
        sinkhorn::solve(c, ps, qs, epsilon, max_iter, tol)
    })
}

/// Shifts the source duals to zero sum and the target duals by the opposite
/// constant. Primal fields are untouched.
pub fn calibrate_duals<T: Scalar>(sol: &TransportSolution<T>) -> TransportSolution<T> {
    let mut out = sol.clone();
    let n = out.dual_source.len();
    if n == 0 {
        return out;
    }
    let shift = out.dual_source.sum() / T::from_usize_lossy(n);
    out.dual_source.mapv_inplace(|v| v - shift);
    out.dual_target.mapv_inplace(|v| v + shift);
    out
}

fn check_marginals<T: Scalar>(
    (rows, cols): (usize, usize),
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
) -> Result<()> {
    check_probability(&p.to_owned()).map_err(|reason| Error::InfeasibleMarginals { which: "p", reason })?;
    check_probability(&q.to_owned()).map_err(|reason| Error::InfeasibleMarginals { which: "q", reason })?;
    if rows != p.len() || cols != q.len() {
        return Err(Error::ShapeMismatch {
            rows,
            cols,
            n: p.len(),
            m: q.len(),
        });
    }
    Ok(())
}

/// Runs `solve` on the positive-mass sub-problem and maps the result back.
fn with_support<T, F>(
    cost: ArrayView2<'_, T>,
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
    solve: F,
) -> Result<TransportSolution<T>>
where
    T: Scalar,
    F: FnOnce(ArrayView2<'_, T>, ArrayView1<'_, T>, ArrayView1<'_, T>) -> Result<TransportSolution<T>>,
{
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > T::zero()).collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > T::zero()).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::AllZeroWeights);
    }
    if rows.len() == p.len() && cols.len() == q.len() {
        return solve(cost, p, q);
    }
    let sub_cost = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| cost[[rows[a], cols[b]]]);
    let sub_p = Array1::from_iter(rows.iter().map(|&i| p[i]));
    let sub_q = Array1::from_iter(cols.iter().map(|&j| q[j]));
    let sub = solve(sub_cost.view(), sub_p.view(), sub_q.view())?;

    let (n, m) = cost.dim();
    let mut coupling = Array2::zeros((n, m));
    let mut dual_source = Array1::from_elem(n, T::nan());
    let mut dual_target = Array1::from_elem(m, T::nan());
    for (a, &i) in rows.iter().enumerate() {
        dual_source[i] = sub.dual_source[a];
        for (b, &j) in cols.iter().enumerate() {
            coupling[[i, j]] = sub.coupling[[a, b]];
        }
    }
    for (b, &j) in cols.iter().enumerate() {
        dual_target[j] = sub.dual_target[b];
    }
    // zero-mass sources first, against the solved targets only
    for i in (0..n).filter(|&i| p[i] <= T::zero()) {
        dual_source[i] = cols
            .iter()
            .map(|&j| cost[[i, j]] - dual_target[j])
            .fold(T::infinity(), T::min);
    }
    for j in (0..m).filter(|&j| q[j] <= T::zero()) {
        dual_target[j] = (0..n)
            .map(|i| cost[[i, j]] - dual_source[i])
            .fold(T::infinity(), T::min);
    }
    Ok(TransportSolution {
        value: sub.value,
        coupling,
        dual_source,
        dual_target,
    })
}

#[cfg(test)]
mod tests;
