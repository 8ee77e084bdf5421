//! JSON formats for graphs, covers, balls, functions and scale tables.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Ball, Edge, WeightedGraph};
use crate::scalar::{lit, Scalar};
use crate::whitney::WhitneyCover;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: usize,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub w: f64,
    pub len: f64,
}

/// `{"vertices":[{"id","mu"}], "edges":[{"u","v","w","len"}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl GraphFile {
    pub fn from_graph<T: Scalar>(g: &WeightedGraph<T>) -> Self {
        let coords = g.coords();
        Self {
            vertices: (0..g.n())
                .map(|id| VertexRecord { id, mu: g.mu()[id].to_f64_lossy(), coords: coords.map(|c| c[id].clone()) })
                .collect(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeRecord { u: e.u, v: e.v, w: e.w.to_f64_lossy(), len: e.len.to_f64_lossy() })
                .collect(),
        }
    }

    /// Builds the graph, requiring ids `0..n` and connectivity.
    pub fn to_graph<T: Scalar>(&self) -> Result<WeightedGraph<T>> {
        let n = self.vertices.len();
        let mut mu = vec![None; n];
        for v in &self.vertices {
            if v.id >= n || mu[v.id].is_some() {
                return Err(Error::InvalidGraph(format!("vertex ids must be 0..{n} without repeats, found {}", v.id)));
            }
            mu[v.id] = Some(lit::<T>(v.mu));
        }
        let mu: Vec<T> = mu.into_iter().map(|m| m.unwrap()).collect();
        let edges = self.edges.iter().map(|e| Edge { u: e.u, v: e.v, w: lit(e.w), len: lit(e.len) }).collect();
        let mut g = WeightedGraph::new(mu, edges)?;
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        if self.vertices.iter().all(|v| v.coords.is_some()) {
            let mut coords = vec![Vec::new(); n];
            for v in &self.vertices {
                coords[v.id] = v.coords.clone().unwrap();
            }
            g = g.with_coords(coords);
        }
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRecord {
    pub center: usize,
    pub radius: f64,
}

impl BallRecord {
    pub fn to_ball<T: Scalar>(self) -> Ball<T> {
        Ball::new(self.center, lit(self.radius))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverRecord {
    pub center: usize,
    pub radius: f64,
    pub scale_index: i32,
}

pub fn cover_records<T: Scalar>(cover: &WhitneyCover<T>) -> Vec<CoverRecord> {
    cover
        .balls
        .iter()
        .map(|b| CoverRecord { center: b.ball.center, radius: b.ball.radius.to_f64_lossy(), scale_index: b.scale_index })
        .collect()
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_graph<T: Scalar>(path: &Path) -> Result<WeightedGraph<T>> {
    read_json::<GraphFile>(path)?.to_graph()
}

pub fn write_graph<T: Scalar>(path: &Path, g: &WeightedGraph<T>) -> Result<()> {
    write_json(path, &GraphFile::from_graph(g))
}

/// A function on vertices: a plain JSON array of numbers.
pub fn read_function<T: Scalar>(path: &Path, n: usize) -> Result<Vec<T>> {
    let v: Vec<f64> = read_json(path)?;
    if v.len() != n {
        return Err(Error::InvalidArgument(format!("{} has {} values for {n} vertices", path.display(), v.len())));
    }
    Ok(v.into_iter().map(lit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::gasket;

    #[test]
    fn round_trip() {
        let g = gasket::<f64>(2, 5.0 / 3.0).unwrap();
        let file = GraphFile::from_graph(&g);
        let text = serde_json::to_string(&file).unwrap();
        let back: GraphFile = serde_json::from_str(&text).unwrap();
        let h: WeightedGraph<f64> = back.to_graph().unwrap();
        assert_eq!(GraphFile::from_graph(&h), file);
    }

    #[test]
    fn rejects_disconnected() {
        let text = r#"{"vertices":[{"id":0,"mu":1},{"id":1,"mu":1},{"id":2,"mu":1}],"edges":[{"u":0,"v":1,"w":1,"len":1}]}"#;
        let file: GraphFile = serde_json::from_str(text).unwrap();
        assert!(matches!(file.to_graph::<f64>(), Err(Error::Disconnected)));
    }

    #[test]
    fn rejects_bad_ids_and_weights() {
        let dup = r#"{"vertices":[{"id":0,"mu":1},{"id":0,"mu":1}],"edges":[]}"#;
        assert!(serde_json::from_str::<GraphFile>(dup).unwrap().to_graph::<f64>().is_err());
        let neg = r#"{"vertices":[{"id":0,"mu":1},{"id":1,"mu":1}],"edges":[{"u":0,"v":1,"w":-1,"len":1}]}"#;
        assert!(matches!(serde_json::from_str::<GraphFile>(neg).unwrap().to_graph::<f64>(), Err(Error::InvalidGraph(_))));
    }
}
