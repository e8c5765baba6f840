//! Seeded random graph generators for experiments and tests.

use ndarray::Array2;
use rand::Rng;

use crate::error::Result;
use crate::graph::{AttributedGraph, LabeledGraphDataset};
use crate::scalar::Scalar;

/// Erdős–Rényi graph `G(n, p)` without features.
pub fn erdos_renyi<T: Scalar, R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<AttributedGraph<T>> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    AttributedGraph::from_edges_featureless(n, &edges)
}

/// Erdős–Rényi graph with i.i.d. uniform `[0, 1)` node features of dimension `d`.
pub fn erdos_renyi_featured<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    p: f64,
    d: usize,
    rng: &mut R,
) -> Result<AttributedGraph<T>> {
    let g: AttributedGraph<T> = erdos_renyi(n, p, rng)?;
    let x = Array2::from_shape_fn((n, d), |_| T::of(rng.random::<f64>()));
    g.with_features(x)
}

/// Dense and sparse random graph families with sizes drawn from `sizes`.
///
/// Graph `i < dense` is drawn with edge probability `p_dense`, the rest with
/// `p_sparse`. Labels alternate between two classes.
pub fn two_family_corpus<T: Scalar, R: Rng + ?Sized>(
    dense: usize,
    sparse: usize,
    sizes: std::ops::RangeInclusive<usize>,
    p_dense: f64,
    p_sparse: f64,
    rng: &mut R,
) -> Result<LabeledGraphDataset<T>> {
    let mut graphs = Vec::with_capacity(dense + sparse);
    for i in 0..dense + sparse {
        let n = rng.random_range(sizes.clone());
        let p = if i < dense { p_dense } else { p_sparse };
        graphs.push(erdos_renyi(n, p, rng)?);
    }
    let labels = (0..dense + sparse).map(|i| i % 2).collect();
    LabeledGraphDataset::new(graphs, labels, vec![0, 1])
}
