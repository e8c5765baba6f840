//! Selection result files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::SelectionResult;

fn check_schema(r: &SelectionResult) -> Result<()> {
    if r.indices.is_empty() {
        return Err(Error::Schema("selection is empty".into()));
    }
    if r.indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Schema("indices must be strictly ascending (no duplicates)".into()));
    }
    if r.weights.len() != r.indices.len() {
        return Err(Error::Schema(format!("{} weights for {} indices", r.weights.len(), r.indices.len())));
    }
    if r.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Schema("weights must be finite and nonnegative".into()));
    }
    let total: f64 = r.weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Schema(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Pretty-printed JSON, written atomically. Byte-identical for equal results.
pub fn save_selection(result: &SelectionResult, path: &Path) -> Result<()> {
    check_schema(result)?;
    let mut bytes = serde_json::to_vec_pretty(result)?;
    bytes.push(b'\n');
    super::write_atomic(path, &bytes)
}

/// Reads a selection file and checks its internal invariants.
pub fn load_selection(path: &Path) -> Result<SelectionResult> {
    let text = std::fs::read(path)?;
    let result: SelectionResult = serde_json::from_slice(&text).map_err(|e| Error::Schema(e.to_string()))?;
    check_schema(&result)?;
    Ok(result)
}

/// Checks a selection against the training set it claims to index. A hash
/// mismatch is an error unless `force`, in which case it is only logged.
pub fn verify_selection(result: &SelectionResult, dataset_hash: &str, n: usize, force: bool) -> Result<()> {
    if let Some(&bad) = result.indices.iter().find(|&&i| i >= n) {
        return Err(Error::Schema(format!("index {bad} out of range for {n} graphs")));
    }
    if result.dataset_hash != dataset_hash {
        if !force {
            return Err(Error::HashMismatch {
                expected: result.dataset_hash.clone(),
                actual: dataset_hash.to_owned(),
            });
        }
        log::warn!("selection was made on dataset {}, using it with {dataset_hash}", result.dataset_hash);
    }
    Ok(())
}
