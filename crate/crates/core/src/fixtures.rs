//! Graph families: paths, cycles, lattice boxes, pre-fractal gaskets and
//! carpets, dumbbells and random connected graphs.
//!
//! Every generated graph carries the uniform probability measure.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::scalar::{lit, Scalar};

pub const MAX_GASKET_LEVEL: usize = 7;
pub const MAX_CARPET_LEVEL: usize = 4;
const MAX_VERTICES: usize = 1 << 20;

/// A graph family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `n` unit edges.
    Path { n: usize },
    Cycle { n: usize },
    /// `{0, ..., m-1}^d` with nearest-neighbor unit edges.
    LatticeBox { d: usize, m: usize },
    /// Edge lengths `2^{-level}`, conductances `multiplier^{level}`
    /// (default `5/3`).
    Gasket { level: usize, multiplier: Option<f64> },
    /// Edge lengths `3^{-level}`, conductances `multiplier^{level}`
    /// (default `1`).
    Carpet { level: usize, multiplier: Option<f64> },
    /// Two complete graphs on `clique` vertices joined by a path of
    /// `bridge` edges.
    Dumbbell { clique: usize, bridge: usize },
    /// Random spanning tree plus extra edges, weights and lengths drawn
    /// from `[0.1, 10]` and `[0.5, 2]`.
    Random { n: usize, extra: usize, seed: u64 },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Path { .. } => "path",
            FamilySpec::Cycle { .. } => "cycle",
            FamilySpec::LatticeBox { .. } => "lattice_box",
            FamilySpec::Gasket { .. } => "gasket",
            FamilySpec::Carpet { .. } => "carpet",
            FamilySpec::Dumbbell { .. } => "dumbbell",
            FamilySpec::Random { .. } => "random",
        }
    }
}

pub fn generate<T: Scalar>(spec: &FamilySpec) -> Result<WeightedGraph<T>> {
    match *spec {
        FamilySpec::Path { n } => path(n),
        FamilySpec::Cycle { n } => cycle(n),
        FamilySpec::LatticeBox { d, m } => lattice_box(d, m),
        FamilySpec::Gasket { level, multiplier } => gasket(level, multiplier.unwrap_or(5.0 / 3.0)),
        FamilySpec::Carpet { level, multiplier } => carpet(level, multiplier.unwrap_or(1.0)),
        FamilySpec::Dumbbell { clique, bridge } => dumbbell(clique, bridge),
        FamilySpec::Random { n, extra, seed } => random_connected(n, extra, seed),
    }
}

fn uniform<T: Scalar>(n: usize, edges: Vec<Edge<T>>) -> Result<WeightedGraph<T>> {
    WeightedGraph::new(vec![T::one() / lit(n as f64); n], edges)
}

fn unit<T: Scalar>(u: usize, v: usize) -> Edge<T> {
    Edge { u, v, w: T::one(), len: T::one() }
}

pub fn path<T: Scalar>(n: usize) -> Result<WeightedGraph<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("a path needs at least one edge".into()));
    }
    let g = uniform(n + 1, (0..n).map(|i| unit(i, i + 1)).collect())?;
    Ok(g.with_coords((0..=n).map(|i| vec![i as f64]).collect()))
}

pub fn cycle<T: Scalar>(n: usize) -> Result<WeightedGraph<T>> {
    if n < 3 {
        return Err(Error::InvalidArgument("a cycle needs at least three vertices".into()));
    }
    uniform(n, (0..n).map(|i| unit(i, (i + 1) % n)).collect())
}

pub fn lattice_box<T: Scalar>(d: usize, m: usize) -> Result<WeightedGraph<T>> {
    if d == 0 || m < 2 {
        return Err(Error::InvalidArgument("lattice box needs d >= 1 and m >= 2".into()));
    }
    let n = m.checked_pow(d as u32).filter(|&n| n <= MAX_VERTICES).ok_or(Error::OverBudget {
        family: "lattice_box".into(),
        level: m,
        max: MAX_VERTICES,
    })?;
    let coord = |mut x: usize| -> Vec<usize> {
        (0..d)
            .map(|_| {
                let c = x % m;
                x /= m;
                c
            })
            .collect()
    };
    let mut edges = Vec::new();
    let mut stride = 1;
    for k in 0..d {
        for x in 0..n {
            if coord(x)[k] + 1 < m {
                edges.push(unit(x, x + stride));
            }
        }
        stride *= m;
    }
    let coords = (0..n).map(|x| coord(x).into_iter().map(|c| c as f64).collect()).collect();
    Ok(uniform(n, edges)?.with_coords(coords))
}

struct Builder {
    ids: BTreeMap<(i64, i64), usize>,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    fn new() -> Self {
        Self { ids: BTreeMap::new(), edges: Vec::new() }
    }

    fn vertex(&mut self, p: (i64, i64)) -> usize {
        let next = self.ids.len();
        *self.ids.entry(p).or_insert(next)
    }

    fn edge(&mut self, a: (i64, i64), b: (i64, i64)) {
        let (x, y) = (self.vertex(a), self.vertex(b));
        self.edges.push((x.min(y), x.max(y)));
    }

    fn finish<T: Scalar>(mut self, len: f64, w: f64, to_plane: impl Fn((i64, i64)) -> Vec<f64>) -> Result<WeightedGraph<T>> {
        self.edges.sort_unstable();
        self.edges.dedup();
        let n = self.ids.len();
        let edges = self.edges.iter().map(|&(u, v)| Edge { u, v, w: lit(w), len: lit(len) }).collect();
        let mut coords = vec![Vec::new(); n];
        for (&p, &id) in &self.ids {
            coords[id] = to_plane(p);
        }
        Ok(uniform(n, edges)?.with_coords(coords))
    }
}

fn gasket_cells(b: &mut Builder, a: i64, c: i64, s: i64) {
    if s == 1 {
        b.edge((a, c), (a + 1, c));
        b.edge((a, c), (a, c + 1));
        b.edge((a + 1, c), (a, c + 1));
    } else {
        let h = s / 2;
        gasket_cells(b, a, c, h);
        gasket_cells(b, a + h, c, h);
        gasket_cells(b, a, c + h, h);
    }
}

/// Level-`level` Sierpiński gasket graph: `(3^{level+1} + 3) / 2` vertices
/// and `3^{level+1}` edges.
pub fn gasket<T: Scalar>(level: usize, multiplier: f64) -> Result<WeightedGraph<T>> {
    if level > MAX_GASKET_LEVEL {
        return Err(Error::OverBudget { family: "gasket".into(), level, max: MAX_GASKET_LEVEL });
    }
    let side = 1i64 << level;
    let mut b = Builder::new();
    gasket_cells(&mut b, 0, 0, side);
    let h = 0.75f64.sqrt();
    let unit_len = 1.0 / side as f64;
    b.finish(unit_len, multiplier.powi(level as i32), |(a, c)| vec![(a as f64 + 0.5 * c as f64) * unit_len, h * c as f64 * unit_len])
}

/// Level-`level` Sierpiński carpet graph: corners and sides of the `8^level`
/// surviving squares of side `3^{-level}`.
pub fn carpet<T: Scalar>(level: usize, multiplier: f64) -> Result<WeightedGraph<T>> {
    if level > MAX_CARPET_LEVEL {
        return Err(Error::OverBudget { family: "carpet".into(), level, max: MAX_CARPET_LEVEL });
    }
    let mut cells = vec![(0i64, 0i64)];
    for _ in 0..level {
        let mut next = Vec::with_capacity(cells.len() * 8);
        for &(x, y) in &cells {
            for i in 0..3 {
                for j in 0..3 {
                    if (i, j) != (1, 1) {
                        next.push((3 * x + i, 3 * y + j));
                    }
                }
            }
        }
        cells = next;
    }
    cells.sort_unstable();
    let mut b = Builder::new();
    for &(x, y) in &cells {
        b.edge((x, y), (x + 1, y));
        b.edge((x, y), (x, y + 1));
        b.edge((x + 1, y), (x + 1, y + 1));
        b.edge((x, y + 1), (x + 1, y + 1));
    }
    let unit_len = 3f64.powi(-(level as i32));
    b.finish(unit_len, multiplier.powi(level as i32), |(x, y)| vec![x as f64 * unit_len, y as f64 * unit_len])
}

pub fn dumbbell<T: Scalar>(clique: usize, bridge: usize) -> Result<WeightedGraph<T>> {
    if clique < 2 || bridge == 0 {
        return Err(Error::InvalidArgument("dumbbell needs cliques of size >= 2 and a bridge".into()));
    }
    let mut edges = Vec::new();
    for side in 0..2 {
        let off = side * clique;
        for i in 0..clique {
            for j in (i + 1)..clique {
                edges.push(unit(off + i, off + j));
            }
        }
    }
    // bridge from vertex clique-1 to vertex clique through bridge-1 new vertices
    let mut prev = clique - 1;
    let mut n = 2 * clique;
    for k in 0..bridge {
        let next = if k + 1 == bridge {
            clique
        } else {
            n += 1;
            n - 1
        };
        edges.push(unit(prev, next));
        prev = next;
    }
    uniform(n, edges)
}

pub fn random_connected<T: Scalar>(n: usize, extra: usize, seed: u64) -> Result<WeightedGraph<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument("random graph needs at least two vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.random_range(0..v), v));
    }
    let mut tries = 0;
    while pairs.len() < n - 1 + extra && tries < 20 * (extra + 1) {
        tries += 1;
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let key = (a.min(b), a.max(b));
        if a != b && !pairs.iter().any(|&(u, v)| (u.min(v), u.max(v)) == key) {
            pairs.push(key);
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge { u, v, w: lit(rng.random_range(0.1..10.0)), len: lit(rng.random_range(0.5..2.0)) })
        .collect();
    uniform(n, edges)
}

/// Every connected simple graph on `n` vertices with unit data, one per
/// isomorphism class.
pub fn connected_graphs<T: Scalar>(n: usize) -> Vec<WeightedGraph<T>> {
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let perms = permutations(n);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << slots.len()) {
        let chosen: Vec<(usize, usize)> = slots.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e).collect();
        let canon = perms
            .iter()
            .map(|pi| {
                let mut es: Vec<(usize, usize)> = chosen.iter().map(|&(a, b)| (pi[a].min(pi[b]), pi[a].max(pi[b]))).collect();
                es.sort_unstable();
                es
            })
            .min()
            .unwrap_or_default();
        if !seen.insert(canon) {
            continue;
        }
        if let Ok(g) = uniform(n, chosen.iter().map(|&(a, b)| unit(a, b)).collect()) {
            if g.is_connected() {
                out.push(g);
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let p = path::<f64>(1).unwrap();
        assert_eq!((p.n(), p.edges().len()), (2, 1));
        let l = lattice_box::<f64>(2, 3).unwrap();
        assert_eq!((l.n(), l.edges().len()), (9, 12));
        let g1 = gasket::<f64>(1, 5.0 / 3.0).unwrap();
        assert_eq!((g1.n(), g1.edges().len()), (6, 9));
        for level in 0..5 {
            let g = gasket::<f64>(level, 5.0 / 3.0).unwrap();
            let t = 3usize.pow(level as u32 + 1);
            assert_eq!((g.n(), g.edges().len()), ((t + 3) / 2, t));
        }
        // one square, then 8 squares around a hole
        assert_eq!(carpet::<f64>(0, 1.0).unwrap().n(), 4);
        let c1 = carpet::<f64>(1, 1.0).unwrap();
        assert_eq!((c1.n(), c1.edges().len()), (16, 24));
        assert_eq!(dumbbell::<f64>(3, 2).unwrap().n(), 7);
    }

    #[test]
    fn budgets() {
        assert!(matches!(gasket::<f64>(8, 1.0), Err(Error::OverBudget { .. })));
        assert!(matches!(carpet::<f64>(5, 1.0), Err(Error::OverBudget { .. })));
    }

    #[test]
    fn small_graph_census() {
        // connected graphs up to isomorphism: 1, 1, 2, 6
        let counts: Vec<usize> = (1..=4).map(|n| connected_graphs::<f64>(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 6]);
    }

    #[test]
    fn measures_are_probabilities() {
        for spec in [FamilySpec::Gasket { level: 3, multiplier: None }, FamilySpec::Carpet { level: 2, multiplier: None }, FamilySpec::Random { n: 12, extra: 5, seed: 3 }] {
            let g = generate::<f64>(&spec).unwrap();
            assert!((g.mu().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(g.is_connected());
        }
    }
}
