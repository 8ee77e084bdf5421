//! Numerical laboratory for p-Dirichlet structures on finite weighted graphs.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix the scalar to `f64`.

#![allow(clippy::too_many_arguments, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod blending;
pub mod certify;
pub mod energy;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod partition;
pub mod scale;
pub mod scalar;
pub mod solver;
pub mod suite;
pub mod whitney;

pub use error::{Error, Result};
pub use graph::{Ball, Edge, MetricSpace, Net, VertexSet, WeightedGraph};
pub use scalar::Scalar;

pub type Graph = WeightedGraph<f64>;
pub type Space = MetricSpace<f64>;
