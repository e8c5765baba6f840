//! Attributed graphs and labeled graph datasets.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SYMMETRY_TOL: f64 = 1e-9;
const SIMPLEX_TOL: f64 = 1e-9;

/// Undirected graph with node features and a probability measure over nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph<T> {
    adjacency: Array2<T>,
    features: Array2<T>,
    node_weights: Array1<T>,
}

impl<T: Scalar> AttributedGraph<T> {
    /// Validates and builds a graph. Asymmetric adjacency is rejected, never symmetrized.
    pub fn new(adjacency: Array2<T>, features: Array2<T>, node_weights: Array1<T>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if adjacency.ncols() != n {
            return Err(Error::InvalidGraph(format!(
                "adjacency is {}x{}, expected square",
                n,
                adjacency.ncols()
            )));
        }
        if features.nrows() != n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                n
            )));
        }
        if node_weights.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} node weights for {} nodes",
                node_weights.len(),
                n
            )));
        }
        let tol = T::of(SYMMETRY_TOL);
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[[i, j]];
                if !a.is_finite() || a < T::zero() {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency entry ({i}, {j}) = {a} is negative or not finite"
                    )));
                }
                if j > i && (a - adjacency[[j, i]]).abs() > tol {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGraph("non-finite node feature".into()));
        }
        check_probability(&node_weights).map_err(Error::InvalidGraph)?;
        Ok(Self {
            adjacency,
            features,
            node_weights,
        })
    }

    /// Graph with uniform node weights.
    pub fn with_uniform_weights(adjacency: Array2<T>, features: Array2<T>) -> Result<Self> {
        let n = adjacency.nrows().max(1);
        let w = Array1::from_elem(adjacency.nrows(), T::one() / T::from_usize_lossy(n));
        Self::new(adjacency, features, w)
    }

    /// Unweighted graph from a 0-indexed undirected edge list; both directions are set.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], features: Array2<T>) -> Result<Self> {
        let mut adj = Array2::zeros((n, n));
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            adj[[i, j]] = T::one();
            adj[[j, i]] = T::one();
        }
        Self::with_uniform_weights(adj, features)
    }

    /// Featureless (d = 0) graph from an edge list.
    pub fn from_edges_featureless(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(n, edges, Array2::zeros((n, 0)))
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn adjacency(&self) -> &Array2<T> {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn node_weights(&self) -> &Array1<T> {
        &self.node_weights
    }

    pub fn has_uniform_weights(&self) -> bool {
        let u = T::one() / T::from_usize_lossy(self.num_nodes());
        let tol = T::of(SIMPLEX_TOL);
        self.node_weights.iter().all(|&w| (w - u).abs() <= tol)
    }

    /// Number of distinct neighbours of every node (self loops ignored).
    pub fn degrees(&self) -> Vec<usize> {
        let n = self.num_nodes();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && self.adjacency[[i, j]] != T::zero())
                    .count()
            })
            .collect()
    }

    /// Undirected edge count: nonzero entries strictly above the diagonal.
    pub fn num_edges(&self) -> usize {
        let n = self.num_nodes();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[[i, j]] != T::zero() {
                    count += 1;
                }
            }
        }
        count
    }

    /// `2|E| / (n(n-1))`, and 0 for a single node.
    pub fn density(&self) -> f64 {
        let n = self.num_nodes();
        if n < 2 {
            return 0.0;
        }
        2.0 * self.num_edges() as f64 / (n * (n - 1)) as f64
    }

    /// Replaces the feature matrix, keeping structure and weights.
    pub fn with_features(&self, features: Array2<T>) -> Result<Self> {
        Self::new(self.adjacency.clone(), features, self.node_weights.clone())
    }

    /// Applies a node relabeling: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::InvalidGraph("permutation length differs from node count".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
            seen[p] = true;
        }
        let adj = Array2::from_shape_fn((n, n), |(i, j)| self.adjacency[[perm[i], perm[j]]]);
        let feat = Array2::from_shape_fn((n, self.feature_dim()), |(i, k)| {
            self.features[[perm[i], k]]
        });
        let w = Array1::from_shape_fn(n, |i| self.node_weights[perm[i]]);
        Self::new(adj, feat, w)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> AttributedGraph<U> {
        let conv = |v: &T| U::of(v.to_f64_lossy());
        let node_weights = self.node_weights.map(conv);
        let total = node_weights.sum();
        AttributedGraph {
            adjacency: self.adjacency.map(conv),
            features: self.features.map(conv),
            node_weights: node_weights / total,
        }
    }
}

/// Simplex membership test shared by graphs and transport marginals.
pub(crate) fn check_probability<T: Scalar>(v: &Array1<T>) -> std::result::Result<(), String> {
    if v.is_empty() {
        return Err("empty probability vector".into());
    }
    if let Some((i, w)) = v.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < T::zero()) {
        return Err(format!("entry {i} = {w} is negative or not finite"));
    }
    let s = v.sum();
    if (s - T::one()).abs() > T::of(SIMPLEX_TOL).max(T::epsilon() * T::of(64.0)) {
        return Err(format!("entries sum to {s}, not 1"));
    }
    Ok(())
}

/// Ordered collection of labeled graphs sharing one feature dimension.
///
/// `labels[i]` is a class index into `label_set`, which holds the original
/// label values.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraphDataset<T> {
    graphs: Vec<AttributedGraph<T>>,
    labels: Vec<usize>,
    label_set: Vec<i64>,
}

impl<T: Scalar> LabeledGraphDataset<T> {
    pub fn new(graphs: Vec<AttributedGraph<T>>, labels: Vec<usize>, label_set: Vec<i64>) -> Result<Self> {
        if graphs.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} graphs but {} labels",
                graphs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_set.len()) {
            return Err(Error::InvalidDataset(format!(
                "label index {bad} outside label set of size {}",
                label_set.len()
            )));
        }
        if let Some(first) = graphs.first() {
            let d = first.feature_dim();
            if let Some(g) = graphs.iter().find(|g| g.feature_dim() != d) {
                return Err(Error::DimensionMismatch(d, g.feature_dim()));
            }
        }
        Ok(Self {
            graphs,
            labels,
            label_set,
        })
    }

    /// Dataset where every graph carries the single class `0`.
    pub fn unlabeled(graphs: Vec<AttributedGraph<T>>) -> Result<Self> {
        let n = graphs.len();
        Self::new(graphs, vec![0; n], vec![0])
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[AttributedGraph<T>] {
        &self.graphs
    }

    pub fn graph(&self, i: usize) -> &AttributedGraph<T> {
        &self.graphs[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_set(&self) -> &[i64] {
        &self.label_set
    }

    pub fn num_classes(&self) -> usize {
        self.label_set.len()
    }

    /// Shared feature dimension (0 for an empty dataset).
    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, |g| g.feature_dim())
    }

    /// Positions of the graphs carrying class `label`, in dataset order.
    pub fn class_members(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sub-dataset in the given order; the label universe is kept.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidDataset(format!(
                "index {bad} out of range for {} graphs",
                self.len()
            )));
        }
        Ok(Self {
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_set: self.label_set.clone(),
        })
    }

    /// Concatenation of two datasets over the same label universe.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.label_set != other.label_set {
            return Err(Error::InvalidDataset("label sets differ".into()));
        }
        let mut graphs = self.graphs.clone();
        graphs.extend(other.graphs.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(graphs, labels, self.label_set.clone())
    }

    /// Same graphs with every label collapsed onto one class.
    pub fn collapse_labels(&self) -> Self {
        Self {
            graphs: self.graphs.clone(),
            labels: vec![0; self.len()],
            label_set: vec![0],
        }
    }

    pub fn cast<U: Scalar>(&self) -> LabeledGraphDataset<U> {
        LabeledGraphDataset {
            graphs: self.graphs.iter().map(|g| g.cast()).collect(),
            labels: self.labels.clone(),
            label_set: self.label_set.clone(),
        }
    }
}

/// Adds one-hot degree features to a featureless dataset.
///
/// The dimension is `max degree + 1` over the whole dataset, so splits built
/// afterwards share one feature space. Datasets that already have features are
/// returned unchanged.
pub fn degree_one_hot_features<T: Scalar>(dataset: &LabeledGraphDataset<T>) -> LabeledGraphDataset<T> {
    if dataset.feature_dim() > 0 || dataset.is_empty() {
        return dataset.clone();
    }
    let degrees: Vec<Vec<usize>> = dataset.graphs.iter().map(|g| g.degrees()).collect();
    let max_degree = degrees.iter().flatten().copied().max().unwrap_or(0);
    let dim = max_degree + 1;
    let graphs = dataset
        .graphs
        .iter()
        .zip(&degrees)
        .map(|(g, deg)| {
            let mut x = Array2::zeros((g.num_nodes(), dim));
            for (v, &k) in deg.iter().enumerate() {
                x[[v, k]] = T::one();
            }
            AttributedGraph {
                adjacency: g.adjacency.clone(),
                features: x,
                node_weights: g.node_weights.clone(),
            }
        })
        .collect();
    LabeledGraphDataset {
        graphs,
        labels: dataset.labels.clone(),
        label_set: dataset.label_set.clone(),
    }
}

/// Density of a graph; see [`AttributedGraph::density`].
pub fn graph_density<T: Scalar>(g: &AttributedGraph<T>) -> f64 {
    g.density()
}
