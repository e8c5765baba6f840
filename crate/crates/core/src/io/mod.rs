//! Dataset files, domain splits, selection files and distance caches.

mod cache;
mod native;
mod selection;
mod split;
mod tu;

pub use cache::{CacheKey, DistanceCache};
pub use native::{load_json_dataset, read_json_dataset, save_json_dataset, write_json_dataset};
pub use selection::{load_selection, save_selection, verify_selection};
pub use split::{covariate_split, DomainSplit, ShiftProperty};
pub use tu::{load_tudataset, load_tudataset_with, TuOptions};

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::graph::LabeledGraphDataset;
use crate::scalar::Scalar;

/// SHA-256 (hex) over the exact contents of a dataset: every graph's
/// adjacency, features and node weights (as `f64` bits), labels and the
/// label universe.
pub fn dataset_hash<T: Scalar>(dataset: &LabeledGraphDataset<T>) -> String {
    let mut h = Sha256::new();
    let put = |h: &mut Sha256, v: u64| h.update(v.to_le_bytes());
    put(&mut h, dataset.len() as u64);
    for (g, &label) in dataset.graphs().iter().zip(dataset.labels()) {
        put(&mut h, g.num_nodes() as u64);
        put(&mut h, g.feature_dim() as u64);
        for v in g.adjacency().iter().chain(g.features().iter()).chain(g.node_weights().iter()) {
            put(&mut h, (v.to_f64_lossy() + 0.0).to_bits());
        }
        put(&mut h, label as u64);
    }
    put(&mut h, dataset.label_set().len() as u64);
    for &l in dataset.label_set() {
        put(&mut h, l as u64);
    }
    hex::encode(h.finalize())
}

/// Loads a TU directory or a native JSON file, chosen by the path kind.
pub fn load_dataset(path: &Path) -> Result<LabeledGraphDataset<f64>> {
    if path.is_dir() {
        load_tudataset(path)
    } else {
        load_json_dataset(path)
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
