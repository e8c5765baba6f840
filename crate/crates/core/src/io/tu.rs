//! TU benchmark flat files (`DS_A.txt`, `DS_graph_indicator.txt`, ...).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, LabeledGraphDataset};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TuOptions {
    /// Without node attributes, use one-hot node labels as features.
    pub node_labels_as_features: bool,
}

struct Lines {
    path: PathBuf,
    text: String,
}

impl Lines {
    fn read(path: PathBuf) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        Ok(Self { path, text })
    }

    /// Non-blank lines with 1-based line numbers.
    fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn parse_fields<F: std::str::FromStr>(&self, line: usize, text: &str) -> Result<Vec<F>> {
        text.split(',')
            .map(|f| {
                let f = f.trim();
                f.parse().map_err(|_| self.error(line, format!("cannot parse `{f}`")))
            })
            .collect()
    }

    fn parse_one<F: std::str::FromStr>(&self, line: usize, text: &str) -> Result<F> {
        let mut v = self.parse_fields(line, text)?;
        if v.len() != 1 {
            return Err(self.error(line, format!("expected one value, found {}", v.len())));
        }
        Ok(v.pop().expect("one value"))
    }
}

/// Dataset prefix `DS` of the directory, from its `DS_graph_indicator.txt`.
fn prefix(dir: &Path) -> Result<String> {
    const SUFFIX: &str = "_graph_indicator.txt";
    let mut found: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(SUFFIX)).map(str::to_owned))
        .collect();
    found.sort();
    match found.len() {
        1 => Ok(found.pop().expect("one prefix")),
        0 => Err(Error::InvalidDataset(format!("no *{SUFFIX} file in {}", dir.display()))),
        _ => Err(Error::InvalidDataset(format!("several datasets in {}: {found:?}", dir.display()))),
    }
}

pub fn load_tudataset(dir: &Path) -> Result<LabeledGraphDataset<f64>> {
    load_tudataset_with(dir, TuOptions::default())
}

/// Graphs follow indicator order; both edge directions are inserted; graph
/// labels are mapped to class indices in ascending order of their values.
pub fn load_tudataset_with(dir: &Path, opts: TuOptions) -> Result<LabeledGraphDataset<f64>> {
    let ds = prefix(dir)?;
    let file = |name: &str| dir.join(format!("{ds}_{name}.txt"));

    let indicator = Lines::read(file("graph_indicator"))?;
    let mut node_graph: Vec<usize> = Vec::new();
    for (line, text) in indicator.iter() {
        let g: usize = indicator.parse_one(line, text)?;
        if g == 0 {
            return Err(indicator.error(line, "graph ids are 1-based"));
        }
        if let Some(&prev) = node_graph.last() {
            if g < prev {
                return Err(indicator.error(line, "nodes of a graph must be contiguous"));
            }
        }
        node_graph.push(g - 1);
    }
    let num_graphs = node_graph.last().map_or(0, |g| g + 1);
    let mut offsets = vec![0usize; num_graphs + 1];
    for &g in &node_graph {
        offsets[g + 1] += 1;
    }
    for g in 0..num_graphs {
        offsets[g + 1] += offsets[g];
    }

    let label_lines = Lines::read(file("graph_labels"))?;
    let raw_labels: Vec<i64> = label_lines
        .iter()
        .map(|(line, text)| label_lines.parse_one(line, text))
        .collect::<Result<_>>()?;
    if raw_labels.len() != num_graphs {
        return Err(Error::InvalidDataset(format!(
            "{} graph labels for {num_graphs} graphs",
            raw_labels.len()
        )));
    }

    let mut adjacency: Vec<Array2<f64>> = (0..num_graphs)
        .map(|g| {
            let n = offsets[g + 1] - offsets[g];
            Array2::zeros((n, n))
        })
        .collect();
    let edges = Lines::read(file("A"))?;
    for (line, text) in edges.iter() {
        let ends: Vec<usize> = edges.parse_fields(line, text)?;
        if ends.len() != 2 {
            return Err(edges.error(line, format!("expected `i, j`, found {} values", ends.len())));
        }
        let (u, v) = (ends[0], ends[1]);
        for node in [u, v] {
            if node == 0 || node > node_graph.len() {
                return Err(Error::DanglingEdge { node, line });
            }
        }
        let g = node_graph[u - 1];
        if node_graph[v - 1] != g {
            return Err(edges.error(line, format!("edge ({u}, {v}) joins two graphs")));
        }
        let (a, b) = (u - 1 - offsets[g], v - 1 - offsets[g]);
        adjacency[g][[a, b]] = 1.0;
        adjacency[g][[b, a]] = 1.0;
    }

    let features = node_features(&file("node_attributes"), &file("node_labels"), node_graph.len(), opts)?;
    let d = features.ncols();
    let graphs = adjacency
        .into_iter()
        .enumerate()
        .map(|(g, a)| {
            let x = features.slice(ndarray::s![offsets[g]..offsets[g + 1], ..]).to_owned();
            debug_assert_eq!(x.ncols(), d);
            AttributedGraph::with_uniform_weights(a, x)
        })
        .collect::<Result<Vec<_>>>()?;

    let label_set: Vec<i64> = {
        let mut s = raw_labels.clone();
        s.sort_unstable();
        s.dedup();
        s
    };
    let class: BTreeMap<i64, usize> = label_set.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let labels = raw_labels.iter().map(|l| class[l]).collect();
    LabeledGraphDataset::new(graphs, labels, label_set)
}

fn node_features(attributes: &Path, node_labels: &Path, num_nodes: usize, opts: TuOptions) -> Result<Array2<f64>> {
    if attributes.exists() {
        let lines = Lines::read(attributes.to_path_buf())?;
        let rows: Vec<(usize, Vec<f64>)> = lines
            .iter()
            .map(|(line, text)| Ok((line, lines.parse_fields(line, text)?)))
            .collect::<Result<_>>()?;
        if rows.len() != num_nodes {
            return Err(Error::InvalidDataset(format!("{} attribute rows for {num_nodes} nodes", rows.len())));
        }
        let d = rows.first().map_or(0, |r| r.1.len());
        let mut x = Array2::zeros((num_nodes, d));
        for (v, (line, row)) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(lines.error(*line, format!("expected {d} attributes, found {}", row.len())));
            }
            if let Some(bad) = row.iter().find(|a| !a.is_finite()) {
                return Err(lines.error(*line, format!("attribute {bad} is not finite")));
            }
            x.row_mut(v).assign(&ndarray::ArrayView1::from(row));
        }
        return Ok(x);
    }
    if opts.node_labels_as_features && node_labels.exists() {
        let lines = Lines::read(node_labels.to_path_buf())?;
        let raw: Vec<i64> = lines.iter().map(|(line, text)| lines.parse_one(line, text)).collect::<Result<_>>()?;
        if raw.len() != num_nodes {
            return Err(Error::InvalidDataset(format!("{} node labels for {num_nodes} nodes", raw.len())));
        }
        let mut values = raw.clone();
        values.sort_unstable();
        values.dedup();
        let mut x = Array2::zeros((num_nodes, values.len()));
        for (v, l) in raw.iter().enumerate() {
            x[[v, values.binary_search(l).expect("present")]] = 1.0;
        }
        return Ok(x);
    }
    Ok(Array2::zeros((num_nodes, 0)))
}
