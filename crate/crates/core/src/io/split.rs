//! Covariate-shift splits by graph density or size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{graph_density, LabeledGraphDataset};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftProperty {
    Density,
    Size,
}

impl std::str::FromStr for ShiftProperty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(Self::Density),
            "size" => Ok(Self::Size),
            other => Err(Error::ConfigInvalid(format!("unknown shift property `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSplit {
    pub property: ShiftProperty,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl DomainSplit {
    /// Checks that the three lists partition `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train_idx.iter().chain(&self.val_idx).chain(&self.test_idx) {
            if i >= n {
                return Err(Error::Schema(format!("split index {i} out of range for {n} graphs")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Schema(format!("split index {i} appears twice")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Schema(format!("split does not cover graph {i}")));
        }
        Ok(())
    }

    /// Train, validation and test sub-datasets.
    pub fn apply<T: Scalar>(
        &self,
        dataset: &LabeledGraphDataset<T>,
    ) -> Result<(LabeledGraphDataset<T>, LabeledGraphDataset<T>, LabeledGraphDataset<T>)> {
        self.validate(dataset.len())?;
        Ok((
            dataset.subset(&self.train_idx)?,
            dataset.subset(&self.val_idx)?,
            dataset.subset(&self.test_idx)?,
        ))
    }
}

/// Sorts graphs ascending by the property (ties by index) and cuts the order
/// into `floor(0.6 N)` train, `floor(0.2 N)` validation and the rest test.
pub fn covariate_split<T: Scalar>(dataset: &LabeledGraphDataset<T>, property: ShiftProperty) -> Result<DomainSplit> {
    let n = dataset.len();
    if n < 5 {
        return Err(Error::DatasetTooSmall(n));
    }
    let key: Vec<f64> = dataset
        .graphs()
        .iter()
        .map(|g| match property {
            ShiftProperty::Density => graph_density(g),
            ShiftProperty::Size => g.num_nodes() as f64,
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]));
    let n_train = n * 3 / 5;
    let n_val = n / 5;
    Ok(DomainSplit {
        property,
        train_idx: order[..n_train].to_vec(),
        val_idx: order[n_train..n_train + n_val].to_vec(),
        test_idx: order[n_train + n_val..].to_vec(),
    })
}
