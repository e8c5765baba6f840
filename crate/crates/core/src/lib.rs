//! Optimal-transport distances between attributed graphs and graph datasets,
//! and training-data selection by minimizing the dataset distance.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases below fix it to `f64`, which the I/O layer and CLI use.

pub mod error;
pub mod fgw;
pub mod gdd;
pub mod graph;
pub mod great;
pub mod io;
pub mod linear;
pub mod ot;
pub mod pipeline;
pub mod scalar;
pub mod synthetic;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type AttributedGraph = graph::AttributedGraph<f64>;
pub type LabeledGraphDataset = graph::LabeledGraphDataset<f64>;
pub type CostMatrix = ot::CostMatrix<f64>;
pub type TransportSolution = ot::TransportSolution<f64>;
pub type FgwResult = fgw::FgwResult<f64>;
pub type BarycentricEmbedding = linear::BarycentricEmbedding<f64>;
pub type LabelInformedCost = gdd::LabelInformedCost<f64>;
pub type WeightVector = great::WeightVector<f64>;

pub type AttributedGraph32 = graph::AttributedGraph<f32>;
pub type LabeledGraphDataset32 = graph::LabeledGraphDataset<f32>;
