//! Native JSON dataset format:
//! `{"graphs": [{"n": .., "edges": [[i, j], ..], "features": [[..], ..], "label": ..}], "label_set": [..]}`.
//!
//! Optional per-graph fields: `edge_weights` (parallel to `edges`, default 1)
//! and `node_weights` (default uniform). Labels are the original values.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, LabeledGraphDataset};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_weights: Option<Vec<f64>>,
    #[serde(default)]
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_weights: Option<Vec<f64>>,
    label: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRecord {
    graphs: Vec<GraphRecord>,
    #[serde(default)]
    label_set: Option<Vec<i64>>,
}

fn to_record(g: &AttributedGraph<f64>, label: i64) -> GraphRecord {
    let a = g.adjacency();
    let n = g.num_nodes();
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in i..n {
            if a[[i, j]] != 0.0 {
                edges.push([i, j]);
                weights.push(a[[i, j]]);
            }
        }
    }
    GraphRecord {
        n,
        edges,
        edge_weights: weights.iter().any(|&w| w != 1.0).then_some(weights),
        features: g.features().rows().into_iter().map(|r| r.to_vec()).collect(),
        node_weights: (!g.has_uniform_weights()).then(|| g.node_weights().to_vec()),
        label,
    }
}

fn from_record(k: usize, r: GraphRecord) -> Result<AttributedGraph<f64>> {
    let bad = |m: String| Error::Schema(format!("graph {k}: {m}"));
    let mut a = Array2::zeros((r.n, r.n));
    if let Some(w) = &r.edge_weights {
        if w.len() != r.edges.len() {
            return Err(bad(format!("{} edge weights for {} edges", w.len(), r.edges.len())));
        }
    }
    for (e, &[i, j]) in r.edges.iter().enumerate() {
        if i >= r.n || j >= r.n {
            return Err(bad(format!("edge ({i}, {j}) out of range for {} nodes", r.n)));
        }
        let w = r.edge_weights.as_ref().map_or(1.0, |w| w[e]);
        a[[i, j]] = w;
        a[[j, i]] = w;
    }
    let d = r.features.first().map_or(0, Vec::len);
    if !r.features.is_empty() && r.features.len() != r.n {
        return Err(bad(format!("{} feature rows for {} nodes", r.features.len(), r.n)));
    }
    if r.features.iter().any(|row| row.len() != d) {
        return Err(bad("ragged feature rows".into()));
    }
    let x = Array2::from_shape_vec((r.n, d), r.features.into_iter().flatten().collect()).expect("checked shape");
    match r.node_weights {
        Some(w) => AttributedGraph::new(a, x, Array1::from(w)),
        None => AttributedGraph::with_uniform_weights(a, x),
    }
}

pub fn write_json_dataset<W: Write>(dataset: &LabeledGraphDataset<f64>, out: W) -> Result<()> {
    let record = DatasetRecord {
        graphs: dataset
            .graphs()
            .iter()
            .zip(dataset.labels())
            .map(|(g, &l)| to_record(g, dataset.label_set()[l]))
            .collect(),
        label_set: Some(dataset.label_set().to_vec()),
    };
    serde_json::to_writer(out, &record)?;
    Ok(())
}

pub fn read_json_dataset<R: Read>(input: R) -> Result<LabeledGraphDataset<f64>> {
    let record: DatasetRecord = serde_json::from_reader(input)?;
    let label_set = match record.label_set {
        Some(s) => s,
        None => {
            let mut s: Vec<i64> = record.graphs.iter().map(|g| g.label).collect();
            s.sort_unstable();
            s.dedup();
            s
        }
    };
    let mut graphs = Vec::with_capacity(record.graphs.len());
    let mut labels = Vec::with_capacity(record.graphs.len());
    for (k, g) in record.graphs.into_iter().enumerate() {
        let class = label_set
            .iter()
            .position(|&l| l == g.label)
            .ok_or_else(|| Error::Schema(format!("graph {k}: label {} is not in label_set", g.label)))?;
        labels.push(class);
        graphs.push(from_record(k, g)?);
    }
    LabeledGraphDataset::new(graphs, labels, label_set)
}

pub fn save_json_dataset(dataset: &LabeledGraphDataset<f64>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_json_dataset(dataset, &mut buf)?;
    super::write_atomic(path, &buf)
}

pub fn load_json_dataset(path: &Path) -> Result<LabeledGraphDataset<f64>> {
    read_json_dataset(std::io::BufReader::new(std::fs::File::open(path)?))
}
