//! p-harmonic minimization, capacity minimizers and the superharmonicity
//! and log-Caccioppoli checks built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{check_exponent, energy, energy_measure};
use crate::error::{Error, Result};
use crate::graph::{Ball, MetricSpace, VertexSet, WeightedGraph};
use crate::linalg::pcg;
use crate::scalar::{count, lit, Scalar};

/// Stopping rules shared by every minimization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Relative sup-norm of the gradient on free vertices.
    pub tol: f64,
    pub max_iter: usize,
    /// Smoothing levels relative to the data scale; `None` picks
    /// `1e-2, 1e-4, ..., 1e-12` for `p != 2` and no smoothing for `p = 2`.
    pub eps_schedule: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000, eps_schedule: None }
    }
}

impl SolveOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn schedule<T: Scalar>(&self, p: T) -> Vec<f64> {
        match &self.eps_schedule {
            Some(s) if !s.is_empty() => s.clone(),
            _ if p == lit(2.0) => vec![0.0],
            _ => vec![1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12],
        }
    }
}

/// `Σ_e c_e φ(u_a - u_b) - Σ_x s_x u_x` over the free vertices, where
/// `φ(t) = |t|^p` smoothed to `(t² + ε²)^{p/2}` during continuation.
#[derive(Clone, Debug)]
pub struct Objective<T> {
    pub n: usize,
    pub edges: Vec<(usize, usize, T)>,
    pub fixed: Vec<Option<T>>,
    pub source: Option<Vec<T>>,
    pub p: T,
}

/// Result of a minimization.
#[derive(Clone, Debug)]
pub struct Minimizer<T> {
    pub u: Vec<T>,
    pub iterations: usize,
    /// Relative gradient residual at termination.
    pub residual: f64,
}

struct Work<'a, T> {
    obj: &'a Objective<T>,
    free: Vec<usize>,
    local: Vec<usize>,
    active: Vec<(usize, usize, T)>,
}

const NONE: usize = usize::MAX;

impl<'a, T: Scalar> Work<'a, T> {
    fn new(obj: &'a Objective<T>) -> Self {
        let free: Vec<usize> = (0..obj.n).filter(|&x| obj.fixed[x].is_none()).collect();
        let mut local = vec![NONE; obj.n];
        for (i, &x) in free.iter().enumerate() {
            local[x] = i;
        }
        let active = obj
            .edges
            .iter()
            .copied()
            .filter(|&(a, b, _)| local[a] != NONE || local[b] != NONE)
            .collect();
        Self { obj, free, local, active }
    }

    #[inline]
    fn phi(&self, t: T, eps: T) -> T {
        let p = self.obj.p;
        if eps == T::zero() {
            t.abs().powf(p)
        } else {
            (t * t + eps * eps).powf(p / lit(2.0))
        }
    }

    #[inline]
    fn dphi(&self, t: T, eps: T) -> T {
        let p = self.obj.p;
        if eps == T::zero() {
            if t == T::zero() {
                T::zero()
            } else {
                p * t.abs().powf(p - T::one()) * t.signum()
            }
        } else {
            p * t * (t * t + eps * eps).powf(p / lit(2.0) - T::one())
        }
    }

    #[inline]
    fn ddphi(&self, t: T, eps: T) -> T {
        let p = self.obj.p;
        if eps == T::zero() {
            if p == lit(2.0) {
                lit(2.0)
            } else if t == T::zero() {
                T::zero()
            } else {
                p * (p - T::one()) * t.abs().powf(p - lit(2.0))
            }
        } else {
            let s = t * t + eps * eps;
            p * s.powf(p / lit(2.0) - lit(2.0)) * ((p - T::one()) * t * t + eps * eps)
        }
    }

    fn value(&self, u: &[T], eps: T) -> (T, T) {
        let mut f = T::zero();
        let mut mag = T::zero();
        for &(a, b, c) in &self.active {
            let e = c * self.phi(u[a] - u[b], eps);
            f += e;
            mag += e.abs();
        }
        if let Some(s) = &self.obj.source {
            for &x in &self.free {
                f -= s[x] * u[x];
                mag += (s[x] * u[x]).abs();
            }
        }
        (f, mag)
    }

    /// Gradient on free vertices and the relative residual.
    fn gradient(&self, u: &[T], eps: T) -> (Vec<T>, T) {
        let m = self.free.len();
        let mut g = vec![T::zero(); m];
        let mut scale = vec![T::zero(); m];
        for &(a, b, c) in &self.active {
            let d = c * self.dphi(u[a] - u[b], eps);
            let (la, lb) = (self.local[a], self.local[b]);
            if la != NONE {
                g[la] += d;
                scale[la] += d.abs();
            }
            if lb != NONE {
                g[lb] -= d;
                scale[lb] += d.abs();
            }
        }
        if let Some(s) = &self.obj.source {
            for (i, &x) in self.free.iter().enumerate() {
                g[i] -= s[x];
                scale[i] += s[x].abs();
            }
        }
        let gmax = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut smax = scale.iter().fold(T::zero(), |m, v| m.max(*v));
        // floor the scale by the largest flux the data can drive, so that
        // vertices sitting in flat regions do not make the residual 0/0
        let (lo, hi) = u.iter().fold((T::infinity(), T::neg_infinity()), |(l, h), &v| (l.min(v), h.max(v)));
        if hi > lo {
            let cmax = self.active.iter().fold(T::zero(), |m, e| m.max(e.2));
            smax = smax.max(lit::<T>(1e-6) * cmax * self.obj.p * (hi - lo).powf(self.obj.p - T::one()));
        }
        let res = if gmax == T::zero() {
            T::zero()
        } else if smax == T::zero() {
            T::infinity()
        } else {
            gmax / smax
        };
        (g, res)
    }

    fn newton_direction(&self, u: &[T], g: &[T], eps: T) -> Vec<T> {
        let m = self.free.len();
        let h: Vec<T> = self.active.iter().map(|&(a, b, c)| c * self.ddphi(u[a] - u[b], eps)).collect();
        let mut diag = vec![T::zero(); m];
        for (&(a, b, _), &hk) in self.active.iter().zip(&h) {
            if self.local[a] != NONE {
                diag[self.local[a]] += hk;
            }
            if self.local[b] != NONE {
                diag[self.local[b]] += hk;
            }
        }
        let dmax = diag.iter().fold(T::zero(), |m, v| m.max(*v));
        let reg = (dmax * lit(1e-14)).max(T::min_positive_value());
        for d in &mut diag {
            *d += reg;
        }
        let apply = |x: &[T], y: &mut [T]| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = reg * x[i];
            }
            for (&(a, b, _), &hk) in self.active.iter().zip(&h) {
                let (la, lb) = (self.local[a], self.local[b]);
                match (la != NONE, lb != NONE) {
                    (true, true) => {
                        let t = hk * (x[la] - x[lb]);
                        y[la] += t;
                        y[lb] -= t;
                    }
                    (true, false) => y[la] += hk * x[la],
                    (false, true) => y[lb] += hk * x[lb],
                    _ => {}
                }
            }
        };
        let rhs: Vec<T> = g.iter().map(|&v| -v).collect();
        let mut dx = vec![T::zero(); m];
        let tol = lit::<T>(1e-13).max(T::epsilon() * lit(10.0));
        pcg(apply, &diag, &rhs, &mut dx, tol, 20 * m + 100);
        dx
    }
}

/// Damped Newton with continuation in the smoothing parameter.
///
/// With `init`, a point that already meets the tolerance is returned
/// untouched and otherwise only the final smoothing level is run.
pub fn minimize<T: Scalar>(obj: &Objective<T>, init: Option<&[T]>, opts: &SolveOptions) -> Result<Minimizer<T>> {
    check_exponent(obj.p)?;
    let work = Work::new(obj);
    let tol = lit::<T>(opts.tol).max(T::epsilon() * lit(100.0));
    let mut u: Vec<T> = match init {
        Some(v) => v.to_vec(),
        None => vec![T::zero(); obj.n],
    };
    for (x, fv) in obj.fixed.iter().enumerate() {
        if let Some(v) = fv {
            u[x] = *v;
        }
    }
    if work.free.is_empty() {
        return Ok(Minimizer { u, iterations: 0, residual: 0.0 });
    }
    if init.is_none() {
        u = quadratic_start(obj, &work, u, opts)?;
    }

    let scale = data_scale(obj, &u);
    let schedule: Vec<T> = opts.schedule(obj.p).iter().map(|&e| lit::<T>(e) * scale).collect();
    let last = *schedule.last().unwrap();
    let stages: Vec<T> = if init.is_some() {
        let (_, res) = work.gradient(&u, last);
        if res <= tol {
            return Ok(Minimizer { u, iterations: 0, residual: res.to_f64_lossy() });
        }
        if res <= lit(1e-3) {
            vec![last]
        } else {
            schedule
        }
    } else {
        schedule
    };

    let mut iterations = 0usize;
    let mut res = T::infinity();
    let nst = stages.len();
    for (k, &eps) in stages.iter().enumerate() {
        let final_stage = k + 1 == nst;
        let stage_tol = if final_stage { tol } else { tol.max(eps / scale) };
        loop {
            let (g, r) = work.gradient(&u, eps);
            res = r;
            if res <= stage_tol {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: res.to_f64_lossy(),
                    best: u.iter().map(|v| v.to_f64_lossy()).collect(),
                });
            }
            let dx = work.newton_direction(&u, &g, eps);
            let slope: T = g.iter().zip(&dx).map(|(&a, &b)| a * b).sum();
            let (f0, mag) = work.value(&u, eps);
            let mut t = T::one();
            let mut accepted = false;
            let mut trial = u.clone();
            for _ in 0..60 {
                for (i, &x) in work.free.iter().enumerate() {
                    trial[x] = u[x] + t * dx[i];
                }
                let (f1, _) = work.value(&trial, eps);
                if f1 <= f0 + lit::<T>(1e-4) * t * slope {
                    accepted = true;
                } else if f1 - f0 <= lit::<T>(100.0) * T::epsilon() * mag {
                    // energy change is at rounding level: fall back to the gradient
                    let (_, r1) = work.gradient(&trial, eps);
                    accepted = r1 < res;
                }
                if accepted {
                    break;
                }
                t /= lit(2.0);
            }
            iterations += 1;
            if !accepted {
                if final_stage {
                    return Err(Error::NonConvergence {
                        iterations,
                        residual: res.to_f64_lossy(),
                        best: u.iter().map(|v| v.to_f64_lossy()).collect(),
                    });
                }
                break;
            }
            std::mem::swap(&mut u, &mut trial);
        }
    }
    Ok(Minimizer { u, iterations, residual: res.to_f64_lossy() })
}

fn data_scale<T: Scalar>(obj: &Objective<T>, u: &[T]) -> T {
    let (lo, hi) = u.iter().fold((T::infinity(), T::neg_infinity()), |(l, h), &v| (l.min(v), h.max(v)));
    let mut s = hi - lo;
    if let Some(src) = &obj.source {
        s = s.max(src.iter().fold(T::zero(), |m, v| m.max(v.abs())));
    }
    if s > T::zero() && s.is_finite() {
        s
    } else {
        T::one()
    }
}

/// Harmonic (`p = 2`) solve of the same constraints, used as a start.
fn quadratic_start<T: Scalar>(obj: &Objective<T>, work: &Work<'_, T>, mut u: Vec<T>, opts: &SolveOptions) -> Result<Vec<T>> {
    let fixed: Vec<T> = obj.fixed.iter().flatten().copied().collect();
    let mean = if fixed.is_empty() {
        T::zero()
    } else {
        fixed.iter().copied().sum::<T>() / count(fixed.len())
    };
    for &x in &work.free {
        u[x] = mean;
    }
    if obj.p == lit(2.0) {
        return Ok(u);
    }
    let quad = Objective { p: lit(2.0), ..obj.clone() };
    let qwork = Work::new(&quad);
    let (g, _) = qwork.gradient(&u, T::zero());
    let dx = qwork.newton_direction(&u, &g, T::zero());
    for (i, &x) in qwork.free.iter().enumerate() {
        u[x] += dx[i];
    }
    let _ = opts;
    Ok(u)
}

/// Dirichlet data for [`p_harmonic`].
#[derive(Clone, Debug)]
pub struct BoundaryProblem<T> {
    pub constraints: Vec<(usize, T)>,
    pub p: T,
    pub options: SolveOptions,
}

impl<T: Scalar> BoundaryProblem<T> {
    pub fn new(constraints: Vec<(usize, T)>, p: T) -> Self {
        Self { constraints, p, options: SolveOptions::default() }
    }

    pub fn with_options(mut self, options: SolveOptions) -> Self {
        self.options = options;
        self
    }
}

/// A p-harmonic extension with its certificate.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub u: Vec<T>,
    pub energy: T,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimizes `E_p` subject to the problem's constraints.
pub fn p_harmonic<T: Scalar>(graph: &WeightedGraph<T>, problem: &BoundaryProblem<T>, init: Option<&[T]>) -> Result<Solution<T>> {
    check_exponent(problem.p)?;
    let n = graph.n();
    if problem.constraints.is_empty() {
        return Err(Error::InvalidArgument("at least one constrained vertex is required".into()));
    }
    let mut fixed = vec![None; n];
    for &(x, v) in &problem.constraints {
        if x >= n {
            return Err(Error::InvalidArgument(format!("constraint on missing vertex {x}")));
        }
        fixed[x] = Some(v);
    }
    let obj = Objective {
        n,
        edges: graph.edges().iter().map(|e| (e.u, e.v, e.w)).collect(),
        fixed,
        source: None,
        p: problem.p,
    };
    let m = minimize(&obj, init, &problem.options)?;
    Ok(Solution { energy: energy(graph, &m.u, problem.p), u: m.u, iterations: m.iterations, residual: m.residual })
}

/// A cutoff equal to 1 on an inner set and 0 off an outer set.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffFunction<T> {
    pub values: Vec<T>,
    /// `E_p` of the cutoff.
    pub capacity: T,
    pub iterations: usize,
    pub residual: f64,
    /// Set when the outer set is everything, so the cutoff is constant.
    pub degenerate: bool,
}

/// Capacity minimizer of `inner` relative to `outer`, clamped to `[0, 1]`.
pub fn cutoff_between<T: Scalar>(
    graph: &WeightedGraph<T>,
    inner: &VertexSet,
    outer: &VertexSet,
    p: T,
    options: &SolveOptions,
) -> Result<CutoffFunction<T>> {
    check_exponent(p)?;
    if !inner.is_subset(outer) {
        return Err(Error::InvalidArgument("inner set is not inside the outer set".into()));
    }
    let n = graph.n();
    if outer.is_full() {
        return Ok(CutoffFunction { values: vec![T::one(); n], capacity: T::zero(), iterations: 0, residual: 0.0, degenerate: true });
    }
    let mut constraints: Vec<(usize, T)> = inner.iter().map(|x| (x, T::one())).collect();
    constraints.extend(outer.complement().iter().map(|x| (x, T::zero())));
    let problem = BoundaryProblem::new(constraints, p).with_options(options.clone());
    let sol = p_harmonic(graph, &problem, None)?;
    let values: Vec<T> = sol.u.iter().map(|v| v.max(T::zero()).min(T::one())).collect();
    Ok(CutoffFunction { capacity: energy(graph, &values, p), values, iterations: sol.iterations, residual: sol.residual, degenerate: false })
}

/// `ψ_B`: 1 on `B`, 0 off `2B`, p-harmonic in between.
pub fn capacity_minimizer<T: Scalar>(space: &MetricSpace<T>, ball: &Ball<T>, p: T, options: &SolveOptions) -> Result<CutoffFunction<T>> {
    let inner = space.ball_members(ball);
    let outer = space.ball_members(&ball.scaled(lit(2.0)));
    cutoff_between(space.graph(), &inner, &outer, p, options)
}

/// Worst relative slack of `Γ⟨u+ψ⟩(S) >= Γ⟨u⟩(S)` over sampled `ψ >= 0`
/// supported in `Ω`, where `S` is the support of `ψ` with its neighbors.
#[derive(Clone, Debug, Serialize)]
pub struct SuperharmonicCheck {
    pub trials: usize,
    pub worst_slack: f64,
}

pub fn check_superharmonic<T: Scalar>(
    graph: &WeightedGraph<T>,
    u: &[T],
    omega: &VertexSet,
    p: T,
    trials: usize,
    seed: u64,
) -> Result<SuperharmonicCheck> {
    check_exponent(p)?;
    let n = graph.n();
    let members = omega.members();
    let base = energy_measure(graph, u, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let range = u.iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::one());
    for trial in 0..trials {
        let mut psi = vec![T::zero(); n];
        if trial > 0 && !members.is_empty() {
            let amp = lit::<T>(10f64.powf(rng.random_range(-4.0..0.0))) * range;
            let k = rng.random_range(1..=members.len());
            for _ in 0..k {
                let x = members[rng.random_range(0..members.len())];
                psi[x] = amp * lit(rng.random_range(0.0..1.0));
            }
        }
        let support = VertexSet::from_mask(psi.iter().map(|v| *v > T::zero()).collect());
        let s = graph.inflate(&support.intersection(omega));
        let v: Vec<T> = u.iter().zip(&psi).map(|(&a, &b)| a + b).collect();
        let pert = energy_measure(graph, &v, p)?;
        let (a, b) = (pert.on(&s), base.on(&s));
        let denom = a.max(b).max(T::min_positive_value());
        let slack = if a == b { T::zero() } else { (a - b) / denom };
        worst = worst.min(slack.to_f64_lossy());
    }
    Ok(SuperharmonicCheck { trials, worst_slack: if trials == 0 { 0.0 } else { worst } })
}

/// Both sides of the log-Caccioppoli bound.
#[derive(Clone, Debug, Serialize)]
pub struct LogCaccioppoli {
    /// `Γ⟨u⟩` on the graph interior of `A`.
    pub lhs: f64,
    /// `Γ⟨h⟩` on `Ω` together with its neighbors.
    pub rhs: f64,
    /// `Γ⟨u⟩(A)` as stated for continuous spaces.
    pub lhs_literal: f64,
    /// `Γ⟨h⟩(Ω)` as stated for continuous spaces.
    pub rhs_literal: f64,
    pub holds: bool,
}

/// Checks `Γ⟨u⟩(A°) <= Γ⟨h⟩(Ω ∪ ∂Ω)` for `u` superharmonic in `Ω`.
///
/// On a graph the energy of an edge is split between its endpoints, so the
/// bound is taken on the interior of `A` against the one-step inflation of
/// `Ω`; the literal values are returned alongside.
pub fn log_caccioppoli_check<T: Scalar>(
    graph: &WeightedGraph<T>,
    u: &[T],
    h: &[T],
    a: &VertexSet,
    omega: &VertexSet,
    p: T,
    tol: f64,
) -> Result<LogCaccioppoli> {
    check_exponent(p)?;
    let slop = lit::<T>(1e-12);
    if let Some(x) = (0..graph.n()).find(|&x| u[x] < -slop || u[x] > T::one() + slop) {
        return Err(Error::Hypothesis(format!("0 <= u <= 1 fails at vertex {x}")));
    }
    if let Some(x) = omega.complement().iter().find(|&x| h[x] > T::zero()) {
        return Err(Error::Hypothesis(format!("h <= 0 off Omega fails at vertex {x}")));
    }
    if let Some(x) = a.iter().find(|&x| h[x] < T::one()) {
        return Err(Error::Hypothesis(format!("h >= 1 on A fails at vertex {x}")));
    }
    if !a.is_subset(omega) {
        return Err(Error::Hypothesis("A is not contained in Omega".into()));
    }
    let gu = energy_measure(graph, u, p)?;
    let gh = energy_measure(graph, h, p)?;
    let lhs = gu.on(&graph.interior(a)).to_f64_lossy();
    let rhs = gh.on(&graph.inflate(omega)).to_f64_lossy();
    Ok(LogCaccioppoli {
        lhs,
        rhs,
        lhs_literal: gu.on(a).to_f64_lossy(),
        rhs_literal: gh.on(omega).to_f64_lossy(),
        holds: lhs <= rhs + tol * rhs.max(lhs).max(1e-300),
    })
}
