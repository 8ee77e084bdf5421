//! Finite weighted graphs viewed as metric measure spaces.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// An undirected edge with conductance `w` and length `len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<T> {
    pub u: usize,
    pub v: usize,
    pub w: T,
    pub len: T,
}

impl<T: Copy> Edge<T> {
    /// The endpoint opposite to `x`.
    #[inline]
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }
}

/// Vertex measure, edge conductances and edge lengths.
#[derive(Clone, Debug)]
pub struct WeightedGraph<T> {
    mu: Vec<T>,
    edges: Vec<Edge<T>>,
    adj: Vec<Vec<(usize, usize)>>,
    coords: Option<Vec<Vec<f64>>>,
}

impl<T: Scalar> WeightedGraph<T> {
    /// Builds a graph, validating ids and positivity. Connectivity is not
    /// required here; [`MetricSpace::new`] rejects disconnected graphs.
    pub fn new(mu: Vec<T>, edges: Vec<Edge<T>>) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if let Some((i, m)) = mu.iter().enumerate().find(|(_, m)| !(**m > T::zero()) || !m.is_finite()) {
            return Err(Error::InvalidGraph(format!("vertex {i} has non-positive measure {m}")));
        }
        let mut adj = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(Error::InvalidGraph(format!("edge {k} references a missing vertex")));
            }
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!("edge {k} is a self-loop at {}", e.u)));
            }
            if !(e.w > T::zero()) || !e.w.is_finite() {
                return Err(Error::InvalidGraph(format!("edge {k} has non-positive conductance {}", e.w)));
            }
            if !(e.len > T::zero()) || !e.len.is_finite() {
                return Err(Error::InvalidGraph(format!("edge {k} has non-positive length {}", e.len)));
            }
            adj[e.u].push((e.v, k));
            adj[e.v].push((e.u, k));
        }
        Ok(Self { mu, edges, adj, coords: None })
    }

    /// Attaches generator coordinates.
    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Self {
        assert_eq!(coords.len(), self.mu.len());
        self.coords = Some(coords);
        self
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// `(neighbor, edge index)` pairs at `x`.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[x]
    }

    /// Measure of a vertex set.
    pub fn measure(&self, set: &VertexSet) -> T {
        set.iter().map(|x| self.mu[x]).sum()
    }

    /// μ-average of `f` over a nonempty set.
    pub fn average(&self, f: &[T], set: &VertexSet) -> T {
        let m = self.measure(set);
        let s: T = set.iter().map(|x| self.mu[x] * f[x]).sum();
        s / m
    }

    pub fn is_connected(&self) -> bool {
        self.components(&VertexSet::full(self.n())).len() == 1
    }

    /// Connected components of the subgraph induced on `set`.
    pub fn components(&self, set: &VertexSet) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for s in set.iter() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                let x = comp[i];
                i += 1;
                for &(y, _) in &self.adj[x] {
                    if set.contains(y) && !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Vertices of `set` whose neighbors all lie in `set`.
    pub fn interior(&self, set: &VertexSet) -> VertexSet {
        let mut out = VertexSet::empty(self.n());
        for x in set.iter() {
            if self.adj[x].iter().all(|&(y, _)| set.contains(y)) {
                out.insert(x);
            }
        }
        out
    }

    /// `set` together with all its graph neighbors.
    pub fn inflate(&self, set: &VertexSet) -> VertexSet {
        let mut out = set.clone();
        for x in set.iter() {
            for &(y, _) in &self.adj[x] {
                out.insert(y);
            }
        }
        out
    }

    /// Same graph with every conductance multiplied by `t`.
    pub fn scale_conductances(&self, t: T) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.w *= t;
        }
        g
    }

    /// Same graph with every conductance replaced by `w(e)`.
    pub fn map_conductances(&self, mut w: impl FnMut(&Edge<T>) -> T) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.w = w(e);
        }
        g
    }
}

/// A set of vertices stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VertexSet {
    mask: Vec<bool>,
}

impl VertexSet {
    pub fn empty(n: usize) -> Self {
        Self { mask: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { mask: vec![true; n] }
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for x in members {
            s.insert(x);
        }
        s
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.mask[x]
    }

    pub fn insert(&mut self, x: usize) {
        self.mask[x] = true;
    }

    pub fn remove(&mut self, x: usize) {
        self.mask[x] = false;
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn members(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn complement(&self) -> Self {
        Self { mask: self.mask.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect() }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect() }
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && !*b).collect() }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).any(|(a, b)| *a && *b)
    }
}

/// Open ball `B(center, radius) = {y : d(center, y) < radius}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball<T> {
    pub center: usize,
    pub radius: T,
}

impl<T: Scalar> Ball<T> {
    pub fn new(center: usize, radius: T) -> Self {
        Self { center, radius }
    }

    /// The inflation `cB`.
    pub fn scaled(&self, c: T) -> Self {
        Self { center: self.center, radius: self.radius * c }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem<T>(T, usize);

impl<T: PartialOrd> Eq for HeapItem<T> {}

impl<T: PartialOrd> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for HeapItem<T> {
    // reversed so that BinaryHeap pops the smallest distance
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then_with(|| other.1.cmp(&self.1))
    }
}

/// Single-source shortest paths by edge length.
pub fn dijkstra<T: Scalar>(graph: &WeightedGraph<T>, source: usize) -> Vec<T> {
    let n = graph.n();
    let mut dist = vec![T::infinity(); n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = T::zero();
    heap.push(HeapItem(T::zero(), source));
    while let Some(HeapItem(d, x)) = heap.pop() {
        if done[x] {
            continue;
        }
        done[x] = true;
        for &(y, k) in graph.neighbors(x) {
            let nd = d + graph.edges()[k].len;
            if nd < dist[y] {
                dist[y] = nd;
                heap.push(HeapItem(nd, y));
            }
        }
    }
    dist
}

/// All-pairs shortest-path distances, row-major.
pub fn metric_closure<T: Scalar>(graph: &WeightedGraph<T>) -> Result<Vec<T>> {
    use rayon::prelude::*;
    let n = graph.n();
    let rows: Vec<Vec<T>> = (0..n).into_par_iter().map(|s| dijkstra(graph, s)).collect();
    let mut d = Vec::with_capacity(n * n);
    for (s, row) in rows.into_iter().enumerate() {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Disconnected);
        }
        // Dijkstra is exact for sums of representable lengths, but enforce
        // symmetry bitwise in case of summation-order differences
        debug_assert_eq!(row[s], T::zero());
        d.extend(row);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let m = d[i * n + j].min(d[j * n + i]);
            d[i * n + j] = m;
            d[j * n + i] = m;
        }
    }
    Ok(d)
}

/// A connected graph together with its distance table.
#[derive(Clone, Debug)]
pub struct MetricSpace<T> {
    graph: WeightedGraph<T>,
    dist: Vec<T>,
    diam: T,
}

impl<T: Scalar> MetricSpace<T> {
    pub fn new(graph: WeightedGraph<T>) -> Result<Self> {
        let dist = metric_closure(&graph)?;
        let diam = dist.iter().copied().fold(T::zero(), T::max);
        Ok(Self { graph, dist, diam })
    }

    pub fn graph(&self) -> &WeightedGraph<T> {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    #[inline]
    pub fn d(&self, x: usize, y: usize) -> T {
        self.dist[x * self.graph.n() + y]
    }

    /// Distances from `x` to every vertex.
    pub fn row(&self, x: usize) -> &[T] {
        let n = self.graph.n();
        &self.dist[x * n..(x + 1) * n]
    }

    pub fn diameter(&self) -> T {
        self.diam
    }

    /// Replaces the underlying graph's conductances; the metric is unchanged.
    pub fn with_graph(&self, graph: WeightedGraph<T>) -> Self {
        assert_eq!(graph.n(), self.n());
        Self { graph, dist: self.dist.clone(), diam: self.diam }
    }

    /// `{y : d(center, y) < radius}`.
    pub fn ball_members(&self, ball: &Ball<T>) -> VertexSet {
        VertexSet::from_mask(self.row(ball.center).iter().map(|&d| d < ball.radius).collect())
    }

    /// `{y : d(center, y) <= radius}`.
    pub fn closed_ball_members(&self, ball: &Ball<T>) -> VertexSet {
        VertexSet::from_mask(self.row(ball.center).iter().map(|&d| d <= ball.radius).collect())
    }

    /// `d(x, set)`; infinite for an empty set.
    pub fn dist_to_set(&self, x: usize, set: &VertexSet) -> T {
        set.iter().map(|y| self.d(x, y)).fold(T::infinity(), T::min)
    }

    /// `inf d(a, b)` over `a ∈ s`, `b ∈ t`.
    pub fn set_distance(&self, s: &VertexSet, t: &VertexSet) -> T {
        s.iter().map(|x| self.dist_to_set(x, t)).fold(T::infinity(), T::min)
    }

    pub fn ball_measure(&self, ball: &Ball<T>) -> T {
        self.graph.measure(&self.ball_members(ball))
    }

    /// Sorted distinct distances from `x`.
    pub fn realized_distances(&self, x: usize) -> Vec<T> {
        let mut ds: Vec<T> = self.row(x).to_vec();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ds.dedup();
        ds
    }

    /// Midpoints between consecutive realized distances from `x`, capped at
    /// twice the diameter. Every radius in the grid gives a distinct ball.
    pub fn radius_grid(&self, x: usize) -> Vec<T> {
        let ds = self.realized_distances(x);
        let two = lit::<T>(2.0);
        let mut out: Vec<T> = ds.windows(2).map(|w| (w[0] + w[1]) / two).collect();
        let last = *ds.last().unwrap();
        let cap = two * self.diam;
        let tail = if ds.len() > 1 { last + (last - ds[ds.len() - 2]) / two } else { T::one() };
        out.push(tail.min(cap).max(last + (cap - last) / two));
        out.retain(|r| *r <= cap || self.n() == 1);
        out
    }

    /// Moves `r` to the midpoint of the gap between realized distances from
    /// `x` containing it, so the ball is insensitive to rounding.
    pub fn snap_radius(&self, x: usize, r: T) -> T {
        let ds = self.realized_distances(x);
        let two = lit::<T>(2.0);
        for w in ds.windows(2) {
            if r > w[0] && r <= w[1] {
                return (w[0] + w[1]) / two;
            }
        }
        r
    }
}

/// `max μ(B(x,2r)) / μ(B(x,r))` over the samples; `1` for an empty list.
pub fn doubling_constant<T: Scalar>(space: &MetricSpace<T>, samples: &[(usize, T)]) -> T {
    let two = lit::<T>(2.0);
    samples
        .iter()
        .map(|&(x, r)| {
            let b = Ball::new(x, r);
            space.ball_measure(&b.scaled(two)) / space.ball_measure(&b)
        })
        .fold(T::one(), T::max)
}

/// A maximal `eps`-separated subset of a host set.
#[derive(Clone, Debug, PartialEq)]
pub struct Net<T> {
    pub eps: T,
    pub points: Vec<usize>,
    pub host: VertexSet,
}

/// Greedy net in ascending vertex id: a host vertex is taken whenever it is
/// at distance `>= eps` from every point chosen so far.
pub fn build_net<T: Scalar>(space: &MetricSpace<T>, host: &VertexSet, eps: T) -> Net<T> {
    let mut points: Vec<usize> = Vec::new();
    for x in host.iter() {
        if points.iter().all(|&p| space.d(p, x) >= eps) {
            points.push(x);
        }
    }
    Net { eps, points, host: host.clone() }
}

impl<T: Scalar> Net<T> {
    /// Separation and maximality, checked exhaustively.
    pub fn is_valid(&self, space: &MetricSpace<T>) -> bool {
        let separated = self
            .points
            .iter()
            .enumerate()
            .all(|(i, &a)| self.points[i + 1..].iter().all(|&b| space.d(a, b) >= self.eps));
        let maximal = self
            .host
            .iter()
            .all(|x| self.points.iter().any(|&p| space.d(p, x) < self.eps));
        separated && maximal && self.points.iter().all(|&p| self.host.contains(p))
    }
}

/// Outcome of comparing averages over nested balls.
#[derive(Clone, Debug)]
pub struct AverageComparison<T> {
    /// `|f_{B'} - f_B|^p`.
    pub lhs: T,
    /// `avg_{LB} |f - f_B|^p`.
    pub oscillation: T,
    /// `μ(LB) / μ(B')`.
    pub constant: T,
}

impl<T: Scalar> AverageComparison<T> {
    pub fn holds(&self, rel_tol: T) -> bool {
        self.lhs <= self.constant * self.oscillation * (T::one() + rel_tol) + T::min_positive_value()
    }
}

/// Compares `f_{B'}` with `f_B` for `B' ⊂ LB`.
pub fn average_comparison<T: Scalar>(
    space: &MetricSpace<T>,
    f: &[T],
    b: &Ball<T>,
    b_prime: &Ball<T>,
    l: T,
    p: T,
) -> Result<AverageComparison<T>> {
    let g = space.graph();
    let sb = space.ball_members(b);
    let sbp = space.ball_members(b_prime);
    let slb = space.ball_members(&b.scaled(l));
    if !sbp.is_subset(&slb) {
        return Err(Error::InvalidArgument("B' is not contained in LB".into()));
    }
    let fb = g.average(f, &sb);
    let fbp = g.average(f, &sbp);
    let dev: Vec<T> = f.iter().map(|&v| (v - fb).abs().powf(p)).collect();
    Ok(AverageComparison {
        lhs: (fbp - fb).abs().powf(p),
        oscillation: g.average(&dev, &slb),
        constant: g.measure(&slb) / g.measure(&sbp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> WeightedGraph<f64> {
        let edges = (0..n).map(|i| Edge { u: i, v: i + 1, w: 1.0, len: 1.0 }).collect();
        WeightedGraph::new(vec![1.0; n + 1], edges).unwrap()
    }

    #[test]
    fn path_distances() {
        let s = MetricSpace::new(path(2)).unwrap();
        assert_eq!(s.d(0, 2), 2.0);
        assert_eq!(s.d(2, 0), 2.0);
    }

    #[test]
    fn single_vertex() {
        let g = WeightedGraph::new(vec![1.0], vec![]).unwrap();
        let s = MetricSpace::new(g).unwrap();
        assert_eq!(s.d(0, 0), 0.0);
        assert_eq!(doubling_constant(&s, &[(0, 1.0)]), 1.0);
    }

    #[test]
    fn disconnected_rejected() {
        let g = WeightedGraph::new(vec![1.0, 1.0], vec![]).unwrap();
        let err = MetricSpace::new(g).unwrap_err();
        assert!(err.to_string().contains("metric undefined"));
    }

    #[test]
    fn bad_measure_rejected() {
        assert!(WeightedGraph::<f64>::new(vec![1.0, 0.0], vec![]).is_err());
        let e = Edge { u: 0, v: 1, w: -1.0, len: 1.0 };
        assert!(WeightedGraph::new(vec![1.0, 1.0], vec![e]).is_err());
    }

    #[test]
    fn strict_balls() {
        let s = MetricSpace::new(path(2)).unwrap();
        assert_eq!(s.ball_members(&Ball::new(1, 1.0)).members(), vec![1]);
        assert_eq!(s.ball_members(&Ball::new(1, 1.5)).members(), vec![0, 1, 2]);
        assert_eq!(s.ball_members(&Ball::new(0, 10.0)).len(), 3);
        assert_eq!(s.closed_ball_members(&Ball::new(1, 1.0)).len(), 3);
    }

    #[test]
    fn path_doubling_ratio() {
        // 9 vertices, center 4: radius 1.5 holds 3, radius 3 holds 5 (strict)
        let s = MetricSpace::new(path(8)).unwrap();
        let c = doubling_constant(&s, &[(4, 1.5)]);
        assert!((c - 5.0 / 3.0).abs() < 1e-15);
        // at radius 1.6 the doubled ball (3.2) holds 7 vertices
        let c = doubling_constant(&s, &[(4, 1.6)]);
        assert!((c - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn greedy_net() {
        let s = MetricSpace::new(path(5)).unwrap();
        let host = VertexSet::full(6);
        let net = build_net(&s, &host, 2.0);
        assert_eq!(net.points, vec![0, 2, 4]);
        assert!(net.is_valid(&s));
        assert_eq!(build_net(&s, &host, 100.0).points, vec![0]);
        let one = VertexSet::from_members(6, [3]);
        assert_eq!(build_net(&s, &one, 1.0).points, vec![3]);
    }

    #[test]
    fn radius_grid_midpoints() {
        let s = MetricSpace::new(path(3)).unwrap();
        let grid = s.radius_grid(0);
        assert_eq!(&grid[..3], &[0.5, 1.5, 2.5]);
        assert!(grid.iter().all(|&r| r <= 6.0));
        assert_eq!(s.snap_radius(0, 2.0), 1.5);
    }

    #[test]
    fn interior_and_inflation() {
        let g = path(4);
        let a = VertexSet::from_members(5, [1, 2, 3]);
        assert_eq!(g.interior(&a).members(), vec![2]);
        assert_eq!(g.inflate(&a).len(), 5);
    }
}
