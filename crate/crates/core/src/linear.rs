//! Linear FGW: every graph is embedded once against a shared reference graph
//! through the barycentric projection of its optimal coupling, and pairs of
//! graphs are compared by a closed-form distance between embeddings.

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fgw::{default_barycenter_size, fgw_barycenter, fgw_distance, transported, FgwConfig};
use crate::graph::{AttributedGraph, LabeledGraphDataset};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricEmbedding<T> {
    /// `nbar x d` transported features.
    pub t_node: Array2<T>,
    /// `nbar x nbar` transported adjacency.
    pub t_edge: Array2<T>,
    /// Position of the embedded graph in its dataset.
    pub graph_index: usize,
    /// Whether the coupling solve converged.
    pub converged: bool,
}

impl<T: Scalar> BarycentricEmbedding<T> {
    pub fn new(t_node: Array2<T>, t_edge: Array2<T>, graph_index: usize) -> Result<Self> {
        let nbar = t_edge.nrows();
        if t_edge.ncols() != nbar || t_node.nrows() != nbar {
            return Err(Error::ReferenceMismatch(format!(
                "t_node is {:?} and t_edge is {:?}",
                t_node.dim(),
                t_edge.dim()
            )));
        }
        Ok(Self {
            t_node,
            t_edge,
            graph_index,
            converged: true,
        })
    }

    pub fn reference_size(&self) -> usize {
        self.t_edge.nrows()
    }
}

/// Embeds `g` against `reference` (which must carry uniform node weights).
///
/// With `pi` the `n x nbar` FGW coupling, `t_node = nbar pi^T X` and
/// `t_edge = nbar^2 pi^T A pi`. A non-converged coupling is still used.
pub fn barycentric_embed<T: Scalar>(
    g: &AttributedGraph<T>,
    reference: &AttributedGraph<T>,
    cfg: &FgwConfig,
) -> Result<BarycentricEmbedding<T>> {
    if !reference.has_uniform_weights() {
        return Err(Error::InvalidGraph("reference graph must have uniform node weights".into()));
    }
    let res = fgw_distance(g, reference, cfg)?;
    let nbar = reference.num_nodes();
    let (t_edge, t_node) = transported(g, &res.coupling, nbar);
    Ok(BarycentricEmbedding {
        t_node,
        t_edge,
        graph_index: 0,
        converged: res.converged,
    })
}

fn sq_frobenius<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> T {
    let mut acc = T::zero();
    Zip::from(a).and(b).for_each(|&x, &y| acc = acc + (x - y) * (x - y));
    acc
}

/// `(1 - alpha) ||dT_node||_F^2 + alpha ||dT_edge||_F^2`. This is a squared
/// distance; its square root is a metric on embeddings.
pub fn linear_fgw_distance<T: Scalar>(e1: &BarycentricEmbedding<T>, e2: &BarycentricEmbedding<T>, alpha: f64) -> Result<T> {
    if e1.t_node.dim() != e2.t_node.dim() || e1.t_edge.dim() != e2.t_edge.dim() {
        return Err(Error::ReferenceMismatch(format!(
            "embeddings of shape {:?}/{:?} and {:?}/{:?}",
            e1.t_node.dim(),
            e1.t_edge.dim(),
            e2.t_node.dim(),
            e2.t_edge.dim()
        )));
    }
    let alpha = T::of(alpha);
    Ok((T::one() - alpha) * sq_frobenius(&e1.t_node, &e2.t_node) + alpha * sq_frobenius(&e1.t_edge, &e2.t_edge))
}

/// A reference graph together with the embeddings of a graph collection.
#[derive(Debug, Clone)]
pub struct LinearFgw<T> {
    pub reference: AttributedGraph<T>,
    pub embeddings: Vec<BarycentricEmbedding<T>>,
    pub alpha: f64,
}

impl<T: Scalar> LinearFgw<T> {
    /// Builds the barycenter of `graphs` (`nbar` nodes, median size when
    /// `None`) and embeds every graph against it.
    pub fn fit(graphs: &[AttributedGraph<T>], nbar: Option<usize>, cfg: &FgwConfig) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let nbar = nbar.unwrap_or_else(|| default_barycenter_size(graphs));
        let reference = fgw_barycenter(graphs, nbar, cfg)?;
        Self::with_reference(graphs, reference, cfg)
    }

    pub fn with_reference(graphs: &[AttributedGraph<T>], reference: AttributedGraph<T>, cfg: &FgwConfig) -> Result<Self> {
        let embeddings = graphs
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let mut e = barycentric_embed(g, &reference, cfg)?;
                e.graph_index = i;
                if !e.converged {
                    log::warn!("coupling of graph {i} to the reference did not converge; using last iterate");
                }
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            reference,
            embeddings,
            alpha: cfg.alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> T {
        linear_fgw_distance(&self.embeddings[i], &self.embeddings[j], self.alpha).expect("shared reference")
    }

    /// Distances between every `rows[a]` and `cols[b]`.
    pub fn cross(&self, rows: &[usize], cols: &[usize]) -> Array2<T> {
        let values: Vec<T> = (0..rows.len() * cols.len())
            .into_par_iter()
            .map(|k| {
                let (a, b) = (rows[k / cols.len()], cols[k % cols.len()]);
                if a == b {
                    T::zero()
                } else {
                    // fixed argument order keeps D[i,j] and D[j,i] bit-identical
                    self.distance(a.min(b), a.max(b))
                }
            })
            .collect();
        Array2::from_shape_vec((rows.len(), cols.len()), values).expect("shape")
    }

    /// Full symmetric matrix with zero diagonal.
    pub fn pairwise(&self) -> Array2<T> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.cross(&all, &all)
    }
}

/// Pairwise linear FGW matrix of a dataset against its own barycenter.
pub fn pairwise_linear_fgw<T: Scalar>(dataset: &LabeledGraphDataset<T>, cfg: &FgwConfig) -> Result<Array2<T>> {
    Ok(LinearFgw::fit(dataset.graphs(), None, cfg)?.pairwise())
}
