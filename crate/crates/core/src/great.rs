//! Sparse reweighting of a training set to minimize its distance to a
//! validation set.
//!
//! Each iteration takes a projected gradient step on the weights (the
//! gradient is the calibrated source dual of the transport problem), keeps
//! the `k(t)` largest weights and renormalizes. The budget `k(t)` shrinks
//! from `n` towards `n * tau`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gdd::{gdd_from_cost, LabelInformedCost};
use crate::graph::check_probability;
use crate::ot::{calibrate_duals, OtSolver};
use crate::scalar::Scalar;

/// Probability weights over training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    weights: Array1<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn new(weights: Array1<T>) -> Result<Self> {
        if !weights.is_empty() && weights.iter().all(|&w| w == T::zero()) {
            return Err(Error::AllZeroWeights);
        }
        check_probability(&weights).map_err(|reason| Error::InfeasibleMarginals { which: "w", reason })?;
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: Array1::from_elem(n, T::one() / T::from_usize_lossy(n)),
        }
    }

    /// Renormalized copy of a nonnegative vector with positive sum.
    pub fn normalized(raw: Array1<T>) -> Result<Self> {
        let s = raw.sum();
        if !(s > T::zero()) {
            return Err(Error::AllZeroWeights);
        }
        Ok(Self { weights: raw / s })
    }

    pub fn weights(&self) -> &Array1<T> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices with nonzero weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > T::zero())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > T::zero()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreatConfig {
    /// Fraction of the training set to keep.
    pub tau: f64,
    /// Iteration horizon; `T - 1` steps are taken.
    pub iterations: usize,
    /// Step size.
    pub eta: f64,
    pub solver: OtSolver,
}

impl Default for GreatConfig {
    fn default() -> Self {
        Self {
            tau: 0.2,
            iterations: 10,
            eta: 1e-4,
            solver: OtSolver::Exact,
        }
    }
}

impl GreatConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::ConfigInvalid(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.iterations < 2 {
            return Err(Error::ConfigInvalid("iterations must be >= 2".into()));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::ConfigInvalid(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if final_size(n, self.tau) == 0 {
            return Err(Error::ConfigInvalid(format!("floor({n} * {}) selects no samples", self.tau)));
        }
        Ok(())
    }
}

// n * tau is computed in floating point; snap values within this of an integer
const ROUNDING_SLACK: f64 = 1e-9;

fn final_size(n: usize, tau: f64) -> usize {
    ((n as f64 * tau) + ROUNDING_SLACK).floor() as usize
}

/// Support budget at iteration `t` (1-based) of a `T`-iteration run:
/// `n * max(tau, (T - t + 1)/(T - 1) + tau t/(T - 1))`, clamped to
/// `[ceil(n tau), n]` and rounded down.
pub fn sparsity_schedule(n: usize, tau: f64, big_t: usize, t: usize) -> usize {
    let tm1 = (big_t as f64 - 1.0).max(1.0);
    let frac = ((big_t as f64 - t as f64 + 1.0) / tm1 + tau * t as f64 / tm1).max(tau);
    let raw = n as f64 * frac;
    let lo = ((n as f64 * tau) - ROUNDING_SLACK).ceil().max(0.0);
    (raw.clamp(lo, n as f64) + ROUNDING_SLACK).floor() as usize
}

/// Calibrated source duals of the transport problem at `w`. Zero-weight
/// samples get the dual they would have if reinstated at zero mass.
pub fn gdd_gradient<T: Scalar>(dtilde: &LabelInformedCost<T>, w: &WeightVector<T>, solver: &OtSolver) -> Result<Array1<T>> {
    let sol = gdd_from_cost(dtilde, Some(w), solver)?;
    Ok(calibrate_duals(&sol).dual_source)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Distance at the weights entering the iteration.
    pub gdd: f64,
    /// Support size after the iteration.
    pub support: usize,
    /// Euclidean norm of the weight change.
    pub step_norm: f64,
    /// The gradient step zeroed every weight and was undone.
    pub reverted: bool,
    /// Weights after the iteration.
    #[serde(skip)]
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreatTrace<T> {
    pub records: Vec<IterationRecord>,
    pub final_weights: WeightVector<T>,
    pub final_gdd: T,
    /// Selected indices, ascending.
    pub selected: Vec<usize>,
}

/// Indices of the `k` largest entries, ties to the lower index.
fn top_k<T: Scalar>(v: &Array1<T>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).expect("finite weights").then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn restrict<T: Scalar>(v: &Array1<T>, keep: &[usize]) -> Array1<T> {
    let mut out = Array1::zeros(v.len());
    for &i in keep {
        out[i] = v[i];
    }
    out
}

fn l2_diff<T: Scalar>(a: &Array1<T>, b: &Array1<T>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).to_f64_lossy().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Runs the selection loop from uniform weights and returns the final
/// support, clamped to exactly `floor(n * tau)` indices.
pub fn great_select<T: Scalar>(dtilde: &LabelInformedCost<T>, cfg: &GreatConfig) -> Result<GreatTrace<T>> {
    let n = dtilde.shape().0;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    cfg.validate(n)?;
    let eta = T::of(cfg.eta);
    let mut w = WeightVector::uniform(n);
    let mut grad = Array1::zeros(n);
    let mut records = Vec::with_capacity(cfg.iterations - 1);

    for t in 1..cfg.iterations {
        let sol = gdd_from_cost(dtilde, Some(&w), &cfg.solver)?;
        grad = calibrate_duals(&sol).dual_source;
        // the support never grows back
        let k = sparsity_schedule(n, cfg.tau, cfg.iterations, t).min(w.support_size());
        let stepped = (w.weights() - &(&grad * eta)).mapv(|v| v.max(T::zero()));
        let (next, reverted) = if stepped.iter().all(|&v| v == T::zero()) {
            log::warn!("iteration {t}: gradient step zeroed every weight; keeping previous weights");
            (restrict(w.weights(), &top_k(w.weights(), k)), true)
        } else {
            (restrict(&stepped, &top_k(&stepped, k)), false)
        };
        let next = WeightVector::normalized(next)?;
        records.push(IterationRecord {
            t,
            gdd: sol.value.to_f64_lossy(),
            support: next.support_size(),
            step_norm: l2_diff(next.weights(), w.weights()),
            reverted,
            weights: next.weights().iter().map(|v| v.to_f64_lossy()).collect(),
        });
        w = next;
    }

    let target = final_size(n, cfg.tau);
    let mut selected = w.support();
    if selected.len() > target {
        selected = top_k(w.weights(), target);
        w = WeightVector::normalized(restrict(w.weights(), &selected))?;
    } else if selected.len() < target {
        // fill from the pruned samples with the most negative gradient
        let mut pruned: Vec<usize> = (0..n).filter(|i| w.weights()[*i] == T::zero()).collect();
        pruned.sort_by(|&a, &b| grad[a].partial_cmp(&grad[b]).expect("finite gradient").then(a.cmp(&b)));
        selected.extend(pruned.into_iter().take(target - selected.len()));
        selected.sort_unstable();
    }
    let final_gdd = gdd_from_cost(dtilde, Some(&w), &cfg.solver)?.value;
    Ok(GreatTrace {
        records,
        final_weights: w,
        final_gdd,
        selected,
    })
}
