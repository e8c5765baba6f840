//! Training-set selectors: the iterative reweighting selector, a one-shot
//! dual-ranking baseline (LAVA) and uniform random sampling.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgw::FgwConfig;
use crate::gdd::{gdd_from_cost, label_informed_cost, linear_cross_distance, LabelInformedCost};
use crate::graph::{degree_one_hot_features, LabeledGraphDataset};
use crate::great::{great_select, GreatConfig, IterationRecord};
use crate::io::dataset_hash;
use crate::ot::{calibrate_duals, OtSolver};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gradate,
    Lava,
    Random,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Gradate => "gradate",
            Method::Lava => "lava",
            Method::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub alpha: f64,
    pub order: u32,
    /// Weight of the label distance.
    pub c: f64,
    pub tau: f64,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub eta: f64,
    pub seed: u64,
    pub solver: OtSolver,
    /// Reference size; median graph size of train and validation when absent.
    pub nbar: Option<usize>,
    /// When false, validation labels are ignored and `c` is treated as 0.
    pub validation_labels: bool,
    /// Give featureless datasets one-hot degree features.
    pub degree_features: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            order: 2,
            c: 0.0,
            tau: 0.2,
            iterations: 10,
            eta: 1e-4,
            seed: 0,
            solver: OtSolver::Exact,
            nbar: None,
            validation_labels: true,
            degree_features: true,
        }
    }
}

impl SelectionConfig {
    pub fn fgw(&self) -> FgwConfig {
        FgwConfig {
            alpha: self.alpha,
            order: self.order,
            seed: self.seed,
            ..FgwConfig::default()
        }
    }

    pub fn great(&self) -> GreatConfig {
        GreatConfig {
            tau: self.tau,
            iterations: self.iterations,
            eta: self.eta,
            solver: self.solver,
        }
    }

    /// Label weight actually applied.
    pub fn effective_c(&self) -> f64 {
        if self.validation_labels {
            self.c
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fgw().validate()?;
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::ConfigInvalid(format!("c must be finite and >= 0, got {}", self.c)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::ConfigInvalid(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.nbar == Some(0) {
            return Err(Error::ConfigInvalid("nbar must be >= 1".into()));
        }
        Ok(())
    }
}

/// Number of samples kept for `n` candidates, rejecting empty selections.
pub fn selection_size(n: usize, tau: f64) -> Result<usize> {
    let k = ((n as f64 * tau) + 1e-9).floor() as usize;
    if k == 0 {
        return Err(Error::ConfigInvalid(format!("floor({n} * {tau}) selects no samples")));
    }
    Ok(k.min(n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    /// Ascending indices into the training dataset.
    pub indices: Vec<usize>,
    /// Weight of each selected index.
    pub weights: Vec<f64>,
    pub config: SelectionConfig,
    /// Hash of the training dataset the indices refer to.
    pub dataset_hash: String,
    pub created_at: Option<u64>,
    #[serde(skip)]
    pub trace: Option<SelectionTrace>,
}

/// Per-iteration records plus the distance at the final weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub records: Vec<IterationRecord>,
    pub final_gdd: f64,
}

/// Train and validation sets as the distance computations see them.
pub fn prepare<T: Scalar>(
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    cfg: &SelectionConfig,
) -> Result<(LabeledGraphDataset<T>, LabeledGraphDataset<T>)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(cfg.degree_features && train.feature_dim() == 0 && val.feature_dim() == 0) {
        return Ok((train.clone(), val.clone()));
    }
    // one feature space for both sides
    let joint = degree_one_hot_features(&train.concat(val)?);
    let n = train.len();
    let train_idx: Vec<usize> = (0..n).collect();
    let val_idx: Vec<usize> = (n..joint.len()).collect();
    Ok((joint.subset(&train_idx)?, joint.subset(&val_idx)?))
}

/// Label-informed train-by-validation cost. Both sets are embedded against
/// one reference built from their union.
pub fn selection_cost<T: Scalar>(
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    cfg: &SelectionConfig,
) -> Result<LabelInformedCost<T>> {
    cfg.validate()?;
    let (train, val) = prepare(train, val, cfg)?;
    let d = linear_cross_distance(&train, &val, &cfg.fgw(), cfg.nbar)?;
    label_informed_cost(&train, &val, &d, cfg.effective_c(), &cfg.solver)
}

fn result(method: Method, indices: Vec<usize>, weights: Vec<f64>, cfg: &SelectionConfig, hash: String) -> SelectionResult {
    SelectionResult {
        method,
        indices,
        weights,
        config: *cfg,
        dataset_hash: hash,
        created_at: None,
        trace: None,
    }
}

fn uniform_weights(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Iterative selector on a precomputed cost.
pub fn gradate_from_cost<T: Scalar>(dtilde: &LabelInformedCost<T>, cfg: &SelectionConfig, hash: String) -> Result<SelectionResult> {
    cfg.validate()?;
    selection_size(dtilde.shape().0, cfg.tau)?;
    let trace = great_select(dtilde, &cfg.great())?;
    let w = trace.final_weights.weights();
    let weights = trace.selected.iter().map(|&i| w[i].to_f64_lossy()).collect();
    let mut out = result(Method::Gradate, trace.selected.clone(), weights, cfg, hash);
    out.trace = Some(SelectionTrace {
        records: trace.records,
        final_gdd: trace.final_gdd.to_f64_lossy(),
    });
    Ok(out)
}

/// One transport solve at uniform weights; keeps the samples with the
/// smallest calibrated duals (ties to the lower index).
pub fn lava_from_cost<T: Scalar>(dtilde: &LabelInformedCost<T>, cfg: &SelectionConfig, hash: String) -> Result<SelectionResult> {
    cfg.validate()?;
    let n = dtilde.shape().0;
    let k = selection_size(n, cfg.tau)?;
    let sol = gdd_from_cost(dtilde, None, &cfg.solver)?;
    let duals = calibrate_duals(&sol).dual_source;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| duals[a].partial_cmp(&duals[b]).expect("finite duals").then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(result(Method::Lava, order, uniform_weights(k), cfg, hash))
}

/// Calibrated source duals at uniform weights, as ranked by the LAVA baseline.
pub fn calibrated_duals<T: Scalar>(dtilde: &LabelInformedCost<T>, solver: &OtSolver) -> Result<Array1<T>> {
    Ok(calibrate_duals(&gdd_from_cost(dtilde, None, solver)?).dual_source)
}

pub fn gradate<T: Scalar>(train: &LabeledGraphDataset<T>, val: &LabeledGraphDataset<T>, cfg: &SelectionConfig) -> Result<SelectionResult> {
    selection_size(train.len(), cfg.tau)?;
    let dtilde = selection_cost(train, val, cfg)?;
    gradate_from_cost(&dtilde, cfg, dataset_hash(train))
}

pub fn lava_select<T: Scalar>(train: &LabeledGraphDataset<T>, val: &LabeledGraphDataset<T>, cfg: &SelectionConfig) -> Result<SelectionResult> {
    selection_size(train.len(), cfg.tau)?;
    let dtilde = selection_cost(train, val, cfg)?;
    lava_from_cost(&dtilde, cfg, dataset_hash(train))
}

/// `floor(n tau)` indices drawn uniformly without replacement, seeded.
pub fn random_select<T: Scalar>(train: &LabeledGraphDataset<T>, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let n = train.len();
    let k = selection_size(n, cfg.tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices = rand::seq::index::sample(&mut rng, n, k).into_vec();
    indices.sort_unstable();
    Ok(result(Method::Random, indices, uniform_weights(k), cfg, dataset_hash(train)))
}

pub fn select<T: Scalar>(
    method: Method,
    train: &LabeledGraphDataset<T>,
    val: &LabeledGraphDataset<T>,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    match method {
        Method::Gradate => gradate(train, val, cfg),
        Method::Lava => lava_select(train, val, cfg),
        Method::Random => random_select(train, cfg),
    }
}
