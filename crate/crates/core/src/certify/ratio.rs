//! Suprema of `N(f) / D(f)` for a p-homogeneous pair
//!
//! * `N(f) = Σ_x a_x |f(x) - m(f)|^p` with `m` a weighted mean or zero,
//! * `D(f) = Σ_e c_e |Δ_e f|^p + Σ_x g_x |f(x)|^p`.
//!
//! For `p = 2` the supremum is the top generalized eigenvalue. For any `p`
//! a nonlinear inverse power iteration gives a lower bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower, solve_upper_t, symmetric_eigen, Dense};
use crate::scalar::{lit, Scalar};
use crate::solver::{minimize, Objective, SolveOptions};

/// How a constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactEigen,
    IterativeLowerBound,
    BruteForce,
    /// The value is forced (zero numerator or infinite ratio).
    Degenerate,
}

/// Which route [`maximize_ratio`] takes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Eigen route for `p = 2`, iteration otherwise.
    #[default]
    Auto,
    Exact,
    Iterative,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioOptions {
    pub route: Route,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the ratio changes by less than this, relatively.
    pub rel_tol: f64,
    pub solve: SolveOptions,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self { route: Route::Auto, restarts: 32, seed: 0, max_iter: 5000, rel_tol: 1e-13, solve: SolveOptions::default() }
    }
}

impl RatioOptions {
    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }
}

/// A two-weight ratio on a graph with `n` vertices.
#[derive(Clone, Debug)]
pub struct RatioProblem<T> {
    pub n: usize,
    pub edges: Vec<(usize, usize, T)>,
    pub ground: Vec<(usize, T)>,
    pub numerator: Vec<(usize, T)>,
    /// Weights of the mean subtracted in the numerator; they sum to one.
    pub centering: Option<Vec<(usize, T)>>,
    pub p: T,
}

/// Best ratio found together with the function attaining it.
#[derive(Clone, Debug, Serialize)]
pub struct RatioEstimate<T> {
    pub value: f64,
    pub method: Method,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub witness: Vec<T>,
}

impl<T: Scalar> RatioEstimate<T> {
    /// Multiplies the value by a positive factor.
    pub fn scaled(mut self, factor: T) -> Self {
        self.value *= factor.to_f64_lossy();
        self
    }
}

impl<T: Scalar> RatioProblem<T> {
    fn mean(&self, f: &[T]) -> T {
        match &self.centering {
            Some(w) => w.iter().map(|&(x, c)| c * f[x]).sum(),
            None => T::zero(),
        }
    }

    pub fn numerator_value(&self, f: &[T]) -> T {
        let m = self.mean(f);
        self.numerator.iter().map(|&(x, a)| a * (f[x] - m).abs().powf(self.p)).sum()
    }

    pub fn denominator_value(&self, f: &[T]) -> T {
        let e: T = self.edges.iter().map(|&(a, b, c)| c * (f[a] - f[b]).abs().powf(self.p)).sum();
        e + self.ground.iter().map(|&(x, g)| g * f[x].abs().powf(self.p)).sum::<T>()
    }

    /// `N(f)/D(f)`, infinite when only the denominator vanishes and zero
    /// when both do.
    pub fn ratio(&self, f: &[T]) -> T {
        let (num, den) = (self.numerator_value(f), self.denominator_value(f));
        if num == T::zero() {
            T::zero()
        } else if den == T::zero() {
            T::infinity()
        } else {
            num / den
        }
    }
}

/// The problem restricted to the vertices it touches.
struct Local<T> {
    verts: Vec<usize>,
    prob: RatioProblem<T>,
    pinned: Vec<bool>,
    comp: Vec<usize>,
}

enum Prepared<T> {
    Ready(Local<T>),
    Infinite(Vec<T>),
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

fn prepare<T: Scalar>(prob: &RatioProblem<T>) -> Result<Prepared<T>> {
    let n = prob.n;
    let mut touched = vec![false; n];
    let check = |x: usize| -> Result<()> {
        if x >= n {
            Err(Error::InvalidArgument(format!("vertex {x} out of range")))
        } else {
            Ok(())
        }
    };
    for &(a, b, _) in &prob.edges {
        check(a)?;
        check(b)?;
        touched[a] = true;
        touched[b] = true;
    }
    let centering = prob.centering.clone().unwrap_or_default();
    for &(x, _) in prob.ground.iter().chain(&prob.numerator).chain(&centering) {
        check(x)?;
        touched[x] = true;
    }
    let verts: Vec<usize> = (0..n).filter(|&x| touched[x]).collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &x) in verts.iter().enumerate() {
        idx[x] = i;
    }
    let m = verts.len();
    let local = RatioProblem {
        n: m,
        edges: prob.edges.iter().filter(|e| e.2 > T::zero()).map(|&(a, b, c)| (idx[a], idx[b], c)).collect(),
        ground: prob.ground.iter().filter(|g| g.1 > T::zero()).map(|&(x, g)| (idx[x], g)).collect(),
        numerator: prob.numerator.iter().filter(|a| a.1 > T::zero()).map(|&(x, a)| (idx[x], a)).collect(),
        centering: prob.centering.as_ref().map(|w| w.iter().map(|&(x, c)| (idx[x], c)).collect()),
        p: prob.p,
    };

    let mut parent: Vec<usize> = (0..m).collect();
    for &(a, b, _) in &local.edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let comp: Vec<usize> = (0..m).map(|x| find(&mut parent, x)).collect();
    let mut grounded = vec![false; m];
    for &(x, _) in &local.ground {
        grounded[comp[x]] = true;
    }
    let mut pinned = vec![false; m];
    for root in 0..m {
        if comp[root] != root || grounded[root] {
            continue;
        }
        // constants on an ungrounded component cost nothing
        let ind: Vec<T> = (0..m).map(|x| if comp[x] == root { T::one() } else { T::zero() }).collect();
        let shift = local.mean(&ind);
        let leaks = local
            .numerator
            .iter()
            .any(|&(x, _)| (ind[x] - shift).abs() > lit::<T>(1e-12));
        if leaks {
            let mut witness = vec![T::zero(); n];
            for (i, &x) in verts.iter().enumerate() {
                witness[x] = ind[i];
            }
            return Ok(Prepared::Infinite(witness));
        }
        pinned[root] = true;
    }
    Ok(Prepared::Ready(Local { verts, prob: local, pinned, comp }))
}

impl<T: Scalar> Local<T> {
    fn expand(&self, u: &[T]) -> Vec<T> {
        let mut f = vec![T::zero(); self.verts.iter().max().map_or(0, |&x| x + 1)];
        for (i, &x) in self.verts.iter().enumerate() {
            f[x] = u[i];
        }
        f
    }

    /// Shifts each ungrounded component so its pinned vertex is zero.
    fn normalize_pins(&self, u: &mut [T]) {
        let m = u.len();
        let mut shift = vec![T::zero(); m];
        for x in 0..m {
            if self.pinned[x] {
                shift[x] = u[x];
            }
        }
        for x in 0..m {
            u[x] -= shift[self.comp[x]];
        }
    }

    fn grad_numerator(&self, f: &[T]) -> Vec<T> {
        let p = self.prob.p;
        let m = self.prob.mean(f);
        let mut g = vec![T::zero(); f.len()];
        let mut total = T::zero();
        for &(x, a) in &self.prob.numerator {
            let r = f[x] - m;
            let d = if r == T::zero() { T::zero() } else { p * a * r.abs().powf(p - T::one()) * r.signum() };
            g[x] += d;
            total += d;
        }
        if let Some(w) = &self.prob.centering {
            for &(y, c) in w {
                g[y] -= c * total;
            }
        }
        g
    }
}

/// `sup N/D` over functions with `D > 0`.
pub fn maximize_ratio<T: Scalar>(prob: &RatioProblem<T>, opts: &RatioOptions) -> Result<RatioEstimate<T>> {
    let local = match prepare(prob)? {
        Prepared::Infinite(witness) => {
            return Ok(RatioEstimate { value: f64::INFINITY, method: Method::Degenerate, restarts: 0, iterations: 0, seed: opts.seed, witness })
        }
        Prepared::Ready(l) => l,
    };
    let zero = RatioEstimate { value: 0.0, method: Method::Degenerate, restarts: 0, iterations: 0, seed: opts.seed, witness: vec![T::zero(); prob.n] };
    if local.prob.numerator.is_empty() || local.pinned.iter().all(|&p| p) {
        return Ok(zero);
    }
    let two = prob.p == lit(2.0);
    let mut est = match opts.route {
        Route::Exact if !two => return Err(Error::InvalidArgument("the eigen route needs p = 2".into())),
        Route::Exact => exact(&local)?,
        Route::Auto if two => exact(&local)?,
        _ => iterative(&local, opts)?,
    };
    let mut witness = local.expand(&est.witness);
    witness.resize(prob.n, T::zero());
    est.witness = witness;
    est.seed = opts.seed;
    Ok(est)
}

fn exact<T: Scalar>(local: &Local<T>) -> Result<RatioEstimate<T>> {
    let lp = &local.prob;
    let free: Vec<usize> = (0..lp.n).filter(|&x| !local.pinned[x]).collect();
    let mut pos = vec![usize::MAX; lp.n];
    for (i, &x) in free.iter().enumerate() {
        pos[x] = i;
    }
    let m = free.len();
    let mut q = Dense::zeros(m);
    for &(a, b, c) in &lp.edges {
        let (i, j) = (pos[a], pos[b]);
        if i != usize::MAX {
            q.add(i, i, c);
        }
        if j != usize::MAX {
            q.add(j, j, c);
        }
        if i != usize::MAX && j != usize::MAX {
            q.add(i, j, -c);
            q.add(j, i, -c);
        }
    }
    for &(x, g) in &lp.ground {
        if pos[x] != usize::MAX {
            q.add(pos[x], pos[x], g);
        }
    }
    let mut wvec = vec![T::zero(); m];
    if let Some(w) = &lp.centering {
        for &(y, c) in w {
            if pos[y] != usize::MAX {
                wvec[pos[y]] += c;
            }
        }
    }
    let mut a = Dense::zeros(m);
    for &(x, ax) in &lp.numerator {
        let mut v: Vec<T> = wvec.iter().map(|&c| -c).collect();
        if pos[x] != usize::MAX {
            v[pos[x]] += T::one();
        }
        let nz: Vec<usize> = (0..m).filter(|&i| v[i] != T::zero()).collect();
        for &i in &nz {
            for &j in &nz {
                a.add(i, j, ax * v[i] * v[j]);
            }
        }
    }
    let l = cholesky(&q)?;
    // M = L⁻¹ A L⁻ᵀ, built column by column
    let mut x = Dense::zeros(m);
    for j in 0..m {
        let col: Vec<T> = (0..m).map(|i| a.get(i, j)).collect();
        let y = solve_lower(&l, &col);
        for i in 0..m {
            x.set(j, i, y[i]);
        }
    }
    let mut mm = Dense::zeros(m);
    for j in 0..m {
        let col: Vec<T> = (0..m).map(|i| x.get(i, j)).collect();
        let y = solve_lower(&l, &col);
        for i in 0..m {
            mm.set(i, j, y[i]);
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let s = (mm.get(i, j) + mm.get(j, i)) / lit(2.0);
            mm.set(i, j, s);
            mm.set(j, i, s);
        }
    }
    let (vals, vecs) = symmetric_eigen(&mm);
    let top = vals[0].max(T::zero());
    let f = solve_upper_t(&l, &vecs[0]);
    let mut u = vec![T::zero(); lp.n];
    for (i, &x) in free.iter().enumerate() {
        u[x] = f[i];
    }
    Ok(RatioEstimate { value: top.to_f64_lossy(), method: Method::ExactEigen, restarts: 0, iterations: 0, seed: 0, witness: u })
}

fn starts<T: Scalar>(local: &Local<T>, opts: &RatioOptions) -> Vec<Vec<T>> {
    let m = local.prob.n;
    let mut out = Vec::with_capacity(opts.restarts + 2);
    // distance-like start: position along the vertex order of the heaviest weight
    let heaviest = local.prob.numerator.iter().fold((0, T::zero()), |acc, &(x, a)| if a > acc.1 { (x, a) } else { acc }).0;
    out.push(bfs_distance(local, heaviest));
    for k in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
        out.push((0..m).map(|_| lit(rng.random_range(-1.0..1.0))).collect());
    }
    if local.prob.p != lit(2.0) {
        let quad = Local { prob: RatioProblem { p: lit(2.0), ..local.prob.clone() }, verts: local.verts.clone(), pinned: local.pinned.clone(), comp: local.comp.clone() };
        if let Ok(e) = exact(&quad) {
            out.push(e.witness);
        }
    }
    out
}

fn bfs_distance<T: Scalar>(local: &Local<T>, source: usize) -> Vec<T> {
    let m = local.prob.n;
    let mut adj = vec![Vec::new(); m];
    for &(a, b, _) in &local.prob.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![usize::MAX; m];
    let mut queue = std::collections::VecDeque::from([source]);
    dist[source] = 0;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    let far = dist.iter().filter(|&&d| d != usize::MAX).max().copied().unwrap_or(0) + 1;
    dist.iter().map(|&d| lit(if d == usize::MAX { far as f64 } else { d as f64 })).collect()
}

fn iterative<T: Scalar>(local: &Local<T>, opts: &RatioOptions) -> Result<RatioEstimate<T>> {
    let starts = starts(local, opts);
    let runs: Vec<(T, Vec<T>, usize)> = starts.into_par_iter().map(|s| power_iteration(local, s, opts)).collect();
    let restarts = runs.len();
    let iterations = runs.iter().map(|r| r.2).sum();
    let (best, witness, _) = runs
        .into_iter()
        .fold((T::zero(), vec![T::zero(); local.prob.n], 0), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(RatioEstimate { value: best.to_f64_lossy(), method: Method::IterativeLowerBound, restarts, iterations, seed: opts.seed, witness })
}

fn sup_norm<T: Scalar>(u: &[T]) -> T {
    u.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Nonlinear inverse power iteration: `u = argmin D(u) - <∇N(f), u>`,
/// rescaled, until the ratio settles.
fn power_iteration<T: Scalar>(local: &Local<T>, start: Vec<T>, opts: &RatioOptions) -> (T, Vec<T>, usize) {
    let lp = &local.prob;
    let p = lp.p;
    let m = lp.n;
    let virt = m;
    let mut edges = lp.edges.clone();
    edges.extend(lp.ground.iter().map(|&(x, g)| (x, virt, g)));
    let mut fixed: Vec<Option<T>> = local.pinned.iter().map(|&p| if p { Some(T::zero()) } else { None }).collect();
    fixed.push(Some(T::zero()));
    let mut obj = Objective { n: m + 1, edges, fixed, source: None, p };

    let mut f = start;
    local.normalize_pins(&mut f);
    let s = sup_norm(&f);
    if s == T::zero() {
        return (T::zero(), f, 0);
    }
    f.iter_mut().for_each(|v| *v /= s);
    let mut ratio = lp.ratio(&f);
    let mut best = (ratio, f.clone());
    if !ratio.is_finite() || ratio == T::zero() {
        return (if ratio.is_finite() { T::zero() } else { ratio }, f, 0);
    }
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let mut src = local.grad_numerator(&f);
        src.push(T::zero());
        obj.source = Some(src);
        let alpha = ratio.powf(T::one() / (p - T::one()));
        let mut init: Vec<T> = f.iter().map(|&v| alpha * v).collect();
        init.push(T::zero());
        let u = match minimize(&obj, Some(&init), &opts.solve) {
            Ok(r) => r.u,
            Err(Error::NonConvergence { best, .. }) => best.iter().map(|&v| lit(v)).collect(),
            Err(_) => break,
        };
        let mut u = u[..m].to_vec();
        let s = sup_norm(&u);
        if !(s > T::zero()) || !s.is_finite() {
            break;
        }
        u.iter_mut().for_each(|v| *v /= s);
        let next = lp.ratio(&u);
        if !next.is_finite() {
            break;
        }
        let change = (next - ratio).abs();
        if next > best.0 {
            best = (next, u.clone());
        }
        f = u;
        let prev = ratio;
        ratio = next;
        if change <= lit::<T>(opts.rel_tol) * prev.max(next) {
            break;
        }
    }
    (best.0, best.1, it)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_problem(n: usize, p: f64) -> RatioProblem<f64> {
        RatioProblem {
            n,
            edges: (0..n - 1).map(|i| (i, i + 1, 1.0)).collect(),
            ground: vec![],
            numerator: (0..n).map(|x| (x, 1.0 / n as f64)).collect(),
            centering: Some((0..n).map(|x| (x, 1.0 / n as f64)).collect()),
            p,
        }
    }

    #[test]
    fn two_vertex_eigen() {
        // f = (-1, 1): numerator 1, denominator 4
        let prob = path_problem(2, 2.0);
        let e = maximize_ratio(&prob, &RatioOptions::default()).unwrap();
        assert_eq!(e.method, Method::ExactEigen);
        assert!((e.value - 0.25).abs() < 1e-14);
    }

    #[test]
    fn path_spectral_gap() {
        // mean-zero Rayleigh quotient on a path: 1 / (n λ₁) with λ₁ = 2 - 2cos(π/n)
        let n = 9;
        let prob = path_problem(n, 2.0);
        let e = maximize_ratio(&prob, &RatioOptions::default()).unwrap();
        let lam = 2.0 - 2.0 * (std::f64::consts::PI / n as f64).cos();
        assert!((e.value - 1.0 / (n as f64 * lam)).abs() < 1e-12);
        let it = maximize_ratio(&prob, &RatioOptions::default().with_route(Route::Iterative)).unwrap();
        assert!((it.value - e.value).abs() < 1e-9 * e.value);
        assert!((prob.ratio(&it.witness) - it.value).abs() < 1e-12);
    }

    #[test]
    fn disconnected_numerator_is_infinite() {
        let prob = RatioProblem { n: 3, edges: vec![(0, 1, 1.0)], ground: vec![], numerator: vec![(0, 1.0), (2, 1.0)], centering: Some(vec![(0, 0.5), (2, 0.5)]), p: 2.0 };
        let e = maximize_ratio(&prob, &RatioOptions::default()).unwrap();
        assert!(e.value.is_infinite());
        assert!(prob.denominator_value(&e.witness) == 0.0 && prob.numerator_value(&e.witness) > 0.0);
    }

    #[test]
    fn singleton_centering_is_zero() {
        let prob = RatioProblem { n: 2, edges: vec![(0, 1, 1.0)], ground: vec![], numerator: vec![(0, 1.0)], centering: Some(vec![(0, 1.0)]), p: 1.5 };
        assert_eq!(maximize_ratio(&prob, &RatioOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn grounded_single_edge() {
        // sup f0² / ((f0 - f1)² + f1²) = 2 at f = (2, 1)
        let prob = RatioProblem { n: 2, edges: vec![(0, 1, 1.0)], ground: vec![(1, 1.0)], numerator: vec![(0, 1.0)], centering: None, p: 2.0 };
        let e = maximize_ratio(&prob, &RatioOptions::default()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
        let it = maximize_ratio(&prob, &RatioOptions::default().with_route(Route::Iterative)).unwrap();
        assert!((it.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn p_not_two_grounded_edge() {
        // sup |f0|^p / (|f0 - f1|^p + |f1|^p) = 2^{p-1}, attained at f1 = f0 / 2
        for &p in &[1.5, 3.0] {
            let prob = RatioProblem { n: 2, edges: vec![(0, 1, 1.0)], ground: vec![(1, 1.0)], numerator: vec![(0, 1.0)], centering: None, p };
            let it = maximize_ratio(&prob, &RatioOptions::default()).unwrap();
            let want = 2f64.powf(p - 1.0);
            assert!((it.value - want).abs() < 1e-8 * want, "p={p}: {} vs {want}", it.value);
        }
    }
}
