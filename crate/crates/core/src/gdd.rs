//! Label-informed graph dataset distance.
//!
//! The cost between a training graph `i` and a validation graph `j` is their
//! linear FGW distance plus `c` times the transport distance between the two
//! label classes (uniform measures over class members, ground cost taken
//! from the same cross-distance block). The dataset distance is the exact
//! transport value between the (weighted) training set and the uniform
//! validation set under that cost.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgw::FgwConfig;
use crate::graph::LabeledGraphDataset;
use crate::great::WeightVector;
use crate::linear::LinearFgw;
use crate::ot::{CostMatrix, OtSolver, TransportSolution};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GddConfig {
    pub fgw: FgwConfig,
    /// Weight of the label distance.
    pub c: f64,
    /// Reference size for the linear embedding; median graph size when absent.
    pub nbar: Option<usize>,
    pub solver: OtSolver,
}

impl Default for GddConfig {
    fn default() -> Self {
        Self {
            fgw: FgwConfig::default(),
            c: 0.0,
            nbar: None,
            solver: OtSolver::Exact,
        }
    }
}

/// Transport distances between train classes (rows) and validation classes
/// (columns). Pairs with an empty class on either side are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistanceTable<T> {
    values: Array2<Option<T>>,
}

impl<T: Scalar> LabelDistanceTable<T> {
    pub fn compute(
        train: &LabeledGraphDataset<T>,
        val: &LabeledGraphDataset<T>,
        d: &Array2<T>,
        solver: &OtSolver,
    ) -> Result<Self> {
        check_pair(train, val, d)?;
        let k = train.num_classes();
        let entries: Vec<Option<T>> = (0..k * k)
            .into_par_iter()
            .map(|idx| match class_distance(train, val, d, idx / k, idx % k, solver) {
                Ok(v) => Ok(Some(v)),
                Err(Error::EmptyClass { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            values: Array2::from_shape_vec((k, k), entries).expect("shape"),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, y: usize, y2: usize) -> Option<T> {
        self.values[[y, y2]]
    }

    pub fn entries(&self) -> &Array2<Option<T>> {
        &self.values
    }

    /// Largest present entry.
    pub fn max_entry(&self) -> Option<T> {
        self.values.iter().flatten().copied().reduce(|a, b| a.max(b))
    }

    /// Entry `(y, y2)`, with absent pairs replaced by the largest present entry.
    pub fn get_or_max(&self, y: usize, y2: usize) -> T {
        self.get(y, y2).unwrap_or_else(|| {
            log::warn!("label pair ({y}, {y2}) has an empty class; using the largest label distance");
            self.max_entry().unwrap_or_else(T::zero)
        })
    }
}

fn check_pair<T: Scalar>(train: &LabeledGraphDataset<T>, val: &LabeledGraphDataset<T>, d: &Array2<T>) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.label_set() != val.label_set() {
        return Err(Error::InvalidDataset("train and validation label sets differ".into()));
    }
    if d.dim() != (train.len(), val.len()) {
        return Err(Error::ShapeMismatch {
            rows: d.nrows(),
            cols: d.ncols(),
            n: train.len(),
            m: val.len(),
        });
    }
    Ok(())
}

fn uniform<T: Scalar>(n: usize) -> Array1<T> {
    Array1::from_elem(n, T::one() / T::from_usize_lossy(n))
}

fn class_distance<T: Scalar>(
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    d: &Array2<T>,
    y: usize,
    y2: usize,
    solver: &OtSolver,
) -> Result<T> {
    let rows = train.class_members(y);
    if rows.is_empty() {
        return Err(Error::EmptyClass { side: "train", label: y });
    }
    let cols = val.class_members(y2);
    if cols.is_empty() {
        return Err(Error::EmptyClass {
            side: "validation",
            label: y2,
        });
    }
    let block = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| d[[rows[a], cols[b]]]);
    let sol = solver.solve(&CostMatrix::new(block)?, uniform(rows.len()).view(), uniform(cols.len()).view())?;
    Ok(sol.value)
}

/// Transport distance between train class `y` and validation class `y2`,
/// with `d` the train-by-validation graph distance block.
pub fn graph_label_distance<T: Scalar>(
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    d: &Array2<T>,
    y: usize,
    y2: usize,
) -> Result<T> {
    check_pair(train, val, d)?;
    class_distance(train, val, d, y, y2, &OtSolver::Exact)
}

/// Cost matrix `D + c * label_distance(label(i), label(j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelInformedCost<T> {
    pub values: Array2<T>,
    pub c: f64,
    /// Absent when `c == 0`.
    pub table: Option<LabelDistanceTable<T>>,
}

impl<T: Scalar> LabelInformedCost<T> {
    /// Cost without label information.
    pub fn plain(d: Array2<T>) -> Self {
        Self {
            values: d,
            c: 0.0,
            table: None,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

pub fn label_informed_cost<T: Scalar>(
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    d: &Array2<T>,
    c: f64,
    solver: &OtSolver,
) -> Result<LabelInformedCost<T>> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::ConfigInvalid(format!("label weight c must be finite and >= 0, got {c}")));
    }
    check_pair(train, val, d)?;
    if c == 0.0 {
        return Ok(LabelInformedCost::plain(d.clone()));
    }
    let table = LabelDistanceTable::compute(train, val, d, solver)?;
    let cc = T::of(c);
    let (tl, vl) = (train.labels(), val.labels());
    let values = Array2::from_shape_fn(d.dim(), |(i, j)| d[[i, j]] + cc * table.get_or_max(tl[i], vl[j]));
    Ok(LabelInformedCost {
        values,
        c,
        table: Some(table),
    })
}

/// Transport from `w` (uniform when `None`) to the uniform validation measure.
pub fn gdd_from_cost<T: Scalar>(
    dtilde: &LabelInformedCost<T>,
    w: Option<&WeightVector<T>>,
    solver: &OtSolver,
) -> Result<TransportSolution<T>> {
    let (n, m) = dtilde.shape();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let p = match w {
        Some(w) if w.len() != n => {
            return Err(Error::ShapeMismatch {
                rows: n,
                cols: m,
                n: w.len(),
                m,
            })
        }
        Some(w) => w.weights().clone(),
        None => uniform(n),
    };
    if p.iter().all(|&v| v == T::zero()) {
        return Err(Error::AllZeroWeights);
    }
    solver.solve(&CostMatrix::new(dtilde.values.clone())?, p.view(), uniform::<T>(m).view())
}

/// Linear FGW distances from every train graph to every validation graph,
/// with both sets embedded against one reference built from their union.
pub fn linear_cross_distance<T: Scalar>(
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    cfg: &FgwConfig,
    nbar: Option<usize>,
) -> Result<Array2<T>> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let all: Vec<_> = train.graphs().iter().chain(val.graphs()).cloned().collect();
    let lin = LinearFgw::fit(&all, nbar, cfg)?;
    let n = train.len();
    let rows: Vec<usize> = (0..n).collect();
    let cols: Vec<usize> = (n..all.len()).collect();
    Ok(lin.cross(&rows, &cols))
}

/// Dataset distance and its transport solution (whose duals drive selection).
pub fn gdd<T: Scalar>(
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    w: Option<&WeightVector<T>>,
    cfg: &GddConfig,
) -> Result<(T, TransportSolution<T>)> {
    let d = linear_cross_distance(train, val, &cfg.fgw, cfg.nbar)?;
    let dtilde = label_informed_cost(train, val, &d, cfg.c, &cfg.solver)?;
    let sol = gdd_from_cost(&dtilde, w, &cfg.solver)?;
    Ok((sol.value, sol))
}
