//! FGW barycenter by block-coordinate descent.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::{fgw_distance, FgwConfig};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

/// Median node count of the dataset, rounded up.
pub fn default_barycenter_size<T: Scalar>(graphs: &[AttributedGraph<T>]) -> usize {
    if graphs.is_empty() {
        return 1;
    }
    let mut sizes: Vec<usize> = graphs.iter().map(|g| g.num_nodes()).collect();
    sizes.sort_unstable();
    let k = sizes.len();
    if k % 2 == 1 {
        sizes[k / 2]
    } else {
        (sizes[k / 2 - 1] + sizes[k / 2]).div_ceil(2)
    }
}

/// Monotone (north-west corner) coupling between two measures on ordered supports.
fn monotone_coupling<T: Scalar>(p: &Array1<T>, q: &Array1<T>) -> Array2<T> {
    let mut pi = Array2::zeros((p.len(), q.len()));
    let (mut i, mut j) = (0, 0);
    let (mut rp, mut rq) = (p[0], q[0]);
    let tiny = T::epsilon() * T::of(16.0);
    while i < p.len() && j < q.len() {
        let mass = rp.min(rq);
        pi[[i, j]] = pi[[i, j]] + mass;
        rp = rp - mass;
        rq = rq - mass;
        if rp <= tiny {
            i += 1;
            if i < p.len() {
                rp = p[i];
            }
        }
        if rq <= tiny {
            j += 1;
            if j < q.len() {
                rq = q[j];
            }
        }
    }
    pi
}

fn symmetrize<T: Scalar>(a: &Array2<T>) -> Array2<T> {
    let half = T::of(0.5);
    Array2::from_shape_fn(a.dim(), |(i, j)| (a[[i, j]] + a[[j, i]]) * half)
}

/// Reference graph carried by the coupling `pi` (`n x nbar`) of `g`.
pub(crate) fn transported<T: Scalar>(g: &AttributedGraph<T>, pi: &Array2<T>, nbar: usize) -> (Array2<T>, Array2<T>) {
    let s = T::from_usize_lossy(nbar);
    let x = pi.t().dot(g.features()) * s;
    let a = pi.t().dot(g.adjacency()).dot(pi) * (s * s);
    (a, x)
}

/// Reference graph with `nbar` uniformly weighted nodes that is a
/// block-coordinate stationary point of the mean FGW objective to `graphs`.
///
/// Each sweep solves every graph-to-reference coupling (in parallel), then
/// replaces the reference features and structure by the coupling-weighted
/// averages of the transported features and adjacencies.
pub fn fgw_barycenter<T: Scalar>(
    graphs: &[AttributedGraph<T>],
    nbar: usize,
    cfg: &FgwConfig,
) -> Result<AttributedGraph<T>> {
    if graphs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if nbar == 0 {
        return Err(Error::ConfigInvalid("barycenter size must be >= 1".into()));
    }
    cfg.validate()?;
    let d = graphs[0].feature_dim();
    if let Some(g) = graphs.iter().find(|g| g.feature_dim() != d) {
        return Err(Error::DimensionMismatch(d, g.feature_dim()));
    }
    let uniform = Array1::from_elem(nbar, T::one() / T::from_usize_lossy(nbar));

    // start from the first graph closest in size, squeezed onto nbar nodes
    let seed_graph = graphs
        .iter()
        .min_by_key(|g| g.num_nodes().abs_diff(nbar))
        .expect("nonempty");
    let (a0, x0) = if seed_graph.num_nodes() == nbar {
        (seed_graph.adjacency().clone(), seed_graph.features().clone())
    } else {
        let pi = monotone_coupling(seed_graph.node_weights(), &uniform);
        transported(seed_graph, &pi, nbar)
    };
    let mut reference = AttributedGraph::new(symmetrize(&a0), x0, uniform.clone())?;

    let weight = T::one() / T::from_usize_lossy(graphs.len());
    for _ in 0..cfg.barycenter_iter {
        let couplings: Vec<Array2<T>> = graphs
            .par_iter()
            .map(|g| fgw_distance(g, &reference, cfg).map(|r| r.coupling))
            .collect::<Result<_>>()?;
        let mut a = Array2::<T>::zeros((nbar, nbar));
        let mut x = Array2::<T>::zeros((nbar, d));
        for (g, pi) in graphs.iter().zip(&couplings) {
            let (ga, gx) = transported(g, pi, nbar);
            a = a + ga * weight;
            x = x + gx * weight;
        }
        let next = AttributedGraph::new(symmetrize(&a), x, uniform.clone())?;
        let unchanged = next == reference;
        reference = next;
        if unchanged {
            break;
        }
    }
    Ok(reference)
}

/// Mean FGW objective (not its root) from `graphs` to `reference`.
pub fn barycenter_objective<T: Scalar>(
    graphs: &[AttributedGraph<T>],
    reference: &AttributedGraph<T>,
    cfg: &FgwConfig,
) -> Result<T> {
    if graphs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total = graphs
        .iter()
        .map(|g| fgw_distance(g, reference, cfg).map(|r| r.objective))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::zero(), |a, b| a + b);
    Ok(total / T::from_usize_lossy(graphs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};

    #[test]
    fn median_size_rounds_up() {
        let g = |n| AttributedGraph::<f64>::from_edges_featureless(n, &[]).unwrap();
        assert_eq!(default_barycenter_size(&[g(3), g(8), g(5)]), 5);
        assert_eq!(default_barycenter_size(&[g(3), g(4)]), 4);
        assert_eq!(default_barycenter_size(&[g(2), g(4), g(5), g(9)]), 5);
    }

    #[test]
    fn monotone_coupling_has_right_marginals() {
        let p: Array1<f64> = array![0.5, 0.25, 0.25];
        let q: Array1<f64> = array![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let pi = monotone_coupling(&p, &q);
        for (r, v) in pi.sum_axis(Axis(1)).iter().zip(&p) {
            assert!((r - v).abs() < 1e-12);
        }
        for (c, v) in pi.sum_axis(Axis(0)).iter().zip(&q) {
            assert!((c - v).abs() < 1e-12);
        }
    }
}
