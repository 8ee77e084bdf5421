//! Best constants for the capacity, Poincaré and cutoff Sobolev
//! inequalities, per ball and per family.

mod mazya;
pub mod ratio;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use mazya::{constructive_cs_pipeline, mazya_truncation_audit, MazyaAudit, MazyaLevel, PipelineReport};
pub use ratio::{maximize_ratio, Method, RatioEstimate, RatioOptions, RatioProblem, Route};

use crate::blending::{blend_energy_report, whitney_blend};
use crate::energy::check_exponent;
use crate::error::{Error, Result};
use crate::graph::{build_net, doubling_constant, Ball, MetricSpace, VertexSet};
use crate::scalar::{lit, Scalar};
use crate::scale::ScaleFunction;
use crate::solver::{capacity_minimizer, cutoff_between, CutoffFunction, SolveOptions};

pub const SCHEMA: &str = "pdirichlet-report/1";

/// Edges of `Γ_p⟨·⟩(region)`: full weight inside, half weight on the
/// boundary edges.
pub fn restricted_form<T: Scalar>(space: &MetricSpace<T>, region: &VertexSet) -> Vec<(usize, usize, T)> {
    let half = lit::<T>(0.5);
    space
        .graph()
        .edges()
        .iter()
        .filter_map(|e| match (region.contains(e.u), region.contains(e.v)) {
            (true, true) => Some((e.u, e.v, e.w)),
            (true, false) | (false, true) => Some((e.u, e.v, half * e.w)),
            _ => None,
        })
        .collect()
}

fn mean_weights<T: Scalar>(space: &MetricSpace<T>, set: &VertexSet) -> Vec<(usize, T)> {
    let total = space.graph().measure(set);
    set.iter().map(|x| (x, space.graph().mu()[x] / total)).collect()
}

fn nonempty<T: Scalar>(space: &MetricSpace<T>, b: &Ball<T>) -> Result<VertexSet> {
    let set = space.ball_members(b);
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("ball around {} of radius {} is empty", b.center, b.radius)));
    }
    Ok(set)
}

/// `C_cap(B) = cap(B, 2B) Ψ(B) / μ(B)`.
pub fn capacity_constant<T: Scalar>(space: &MetricSpace<T>, b: &Ball<T>, p: T, psi: &ScaleFunction<T>, opts: &SolveOptions) -> Result<T> {
    nonempty(space, b)?;
    let cut = capacity_minimizer(space, b, p, opts)?;
    Ok(cut.capacity * psi.eval_checked(b.center, b.radius)? / space.ball_measure(b))
}

/// Ratio behind `C_PI(B)`, before division by `Ψ(B)`.
pub fn poincare_problem<T: Scalar>(space: &MetricSpace<T>, b: &Ball<T>, p: T, lambda: T) -> Result<RatioProblem<T>> {
    let ball = nonempty(space, b)?;
    let big = space.ball_members(&b.scaled(lambda));
    Ok(RatioProblem {
        n: space.n(),
        edges: restricted_form(space, &big),
        ground: vec![],
        numerator: ball.iter().map(|x| (x, space.graph().mu()[x])).collect(),
        centering: Some(mean_weights(space, &ball)),
        p,
    })
}

/// `sup (μ(B)/Ψ(B)) avg_B |f - f_B|^p / Γ_p⟨f⟩(ΛB)`.
pub fn poincare_constant<T: Scalar>(
    space: &MetricSpace<T>,
    b: &Ball<T>,
    p: T,
    lambda: T,
    psi: &ScaleFunction<T>,
    opts: &RatioOptions,
) -> Result<RatioEstimate<T>> {
    check_exponent(p)?;
    let prob = poincare_problem(space, b, p, lambda)?;
    let scale = psi.eval_checked(b.center, b.radius)?;
    Ok(maximize_ratio(&prob, opts)?.scaled(T::one() / scale))
}

/// Ratio behind `C_CS(B)` for a given cutoff.
pub fn cs_problem<T: Scalar>(space: &MetricSpace<T>, b: &Ball<T>, p: T, lambda: T, cutoff: &[T]) -> Result<RatioProblem<T>> {
    let ball = nonempty(space, b)?;
    let double = space.ball_members(&b.scaled(lit(2.0)));
    let big = space.ball_members(&b.scaled(lambda));
    let weight = crate::energy::energy_measure(space.graph(), cutoff, p)?;
    Ok(RatioProblem {
        n: space.n(),
        edges: restricted_form(space, &big),
        ground: vec![],
        numerator: double.iter().map(|x| (x, weight.mass[x])).collect(),
        centering: Some(mean_weights(space, &ball)),
        p,
    })
}

/// `sup ∫_{2B} |f - f_B|^p dΓ_p⟨ψ_B⟩ / Γ_p⟨f⟩(ΛB)`.
pub fn cs_constant<T: Scalar>(
    space: &MetricSpace<T>,
    b: &Ball<T>,
    p: T,
    lambda: T,
    cutoff: &CutoffFunction<T>,
    opts: &RatioOptions,
) -> Result<RatioEstimate<T>> {
    check_exponent(p)?;
    let prob = cs_problem(space, b, p, lambda, &cutoff.values)?;
    maximize_ratio(&prob, opts)
}

/// `sup ∫_{2B} |f|^p dΓ_p⟨ψ_B⟩ / (Γ_p⟨f⟩(ΛB) + Ψ(B)⁻¹ ∫_{2B} |f|^p dμ)`.
pub fn classical_cs_constant<T: Scalar>(
    space: &MetricSpace<T>,
    b: &Ball<T>,
    p: T,
    lambda: T,
    cutoff: &CutoffFunction<T>,
    psi: &ScaleFunction<T>,
    opts: &RatioOptions,
) -> Result<RatioEstimate<T>> {
    check_exponent(p)?;
    let mut prob = cs_problem(space, b, p, lambda, &cutoff.values)?;
    let scale = psi.eval_checked(b.center, b.radius)?;
    let double = space.ball_members(&b.scaled(lit(2.0)));
    prob.centering = None;
    prob.ground = double.iter().map(|x| (x, space.graph().mu()[x] / scale)).collect();
    maximize_ratio(&prob, opts)
}

/// `sup Ψ(B)⁻¹ ∫_{2B} |f - f_B|^p dμ / Γ_p⟨f⟩(ΛB)`, the Poincaré bound the
/// first half of the equivalence uses.
pub fn double_poincare_constant<T: Scalar>(
    space: &MetricSpace<T>,
    b: &Ball<T>,
    p: T,
    lambda: T,
    psi: &ScaleFunction<T>,
    opts: &RatioOptions,
) -> Result<RatioEstimate<T>> {
    let mut prob = poincare_problem(space, b, p, lambda)?;
    let double = space.ball_members(&b.scaled(lit(2.0)));
    prob.numerator = double.iter().map(|x| (x, space.graph().mu()[x])).collect();
    let scale = psi.eval_checked(b.center, b.radius)?;
    Ok(maximize_ratio(&prob, opts)?.scaled(T::one() / scale))
}

/// Both directions of the equivalence between the two cutoff Sobolev forms.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub c_cs: f64,
    pub c_classical: f64,
    /// Poincaré constant on `2B` centered on `B`.
    pub c_pi_double: f64,
    pub c_cap: f64,
    /// `C_cl (1 + C_PI)`: the bound on `C_CS` from the classical form.
    pub implied_cs: f64,
    /// `2^{p-1} max(C_CS, C_cap)`: the bound on `C_cl` from `CS_p`.
    pub implied_classical: f64,
    pub forward_holds: bool,
    pub backward_holds: bool,
    pub methods: Vec<Method>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.forward_holds && self.backward_holds
    }
}

pub fn cs_equivalence_check<T: Scalar>(
    space: &MetricSpace<T>,
    b: &Ball<T>,
    p: T,
    lambda: T,
    psi: &ScaleFunction<T>,
    opts: &RatioOptions,
    tol: f64,
) -> Result<EquivalenceReport> {
    let cut = capacity_minimizer(space, b, p, &opts.solve)?;
    let cs = cs_constant(space, b, p, lambda, &cut, opts)?;
    let cl = classical_cs_constant(space, b, p, lambda, &cut, psi, opts)?;
    let pi = double_poincare_constant(space, b, p, lambda, psi, opts)?;
    let cap = (cut.capacity * psi.eval_checked(b.center, b.radius)? / space.ball_measure(b)).to_f64_lossy();
    let implied_cs = cl.value * (1.0 + pi.value);
    let implied_classical = 2f64.powf(p.to_f64_lossy() - 1.0) * cs.value.max(cap);
    Ok(EquivalenceReport {
        c_cs: cs.value,
        c_classical: cl.value,
        c_pi_double: pi.value,
        c_cap: cap,
        implied_cs,
        implied_classical,
        forward_holds: cs.value <= implied_cs * (1.0 + tol),
        backward_holds: cl.value <= implied_classical * (1.0 + tol),
        methods: vec![cs.method, cl.method, pi.method],
    })
}

/// Energy of the condenser between two small balls at distance `r`.
#[derive(Clone, Debug, Serialize)]
pub struct BallCapacity {
    pub distance: f64,
    pub small_radius: f64,
    pub energy: f64,
    /// `E_p · Ψ(x, r) / μ(B(x, r))`.
    pub candidate: f64,
}

pub fn ball_capacity_lower<T: Scalar>(
    space: &MetricSpace<T>,
    x: usize,
    y: usize,
    a: T,
    p: T,
    psi: &ScaleFunction<T>,
    opts: &SolveOptions,
) -> Result<BallCapacity> {
    check_exponent(p)?;
    if x == y || x >= space.n() || y >= space.n() {
        return Err(Error::InvalidArgument("need two distinct vertices".into()));
    }
    if !(a >= lit(3.0)) {
        return Err(Error::InvalidArgument(format!("A must be at least 3, got {a}")));
    }
    let r = space.d(x, y);
    let small = r / a;
    let bx = space.ball_members(&Ball::new(x, small));
    let by = space.ball_members(&Ball::new(y, small));
    if bx.intersects(&by) {
        return Err(Error::BallsIntersect);
    }
    let cut = cutoff_between(space.graph(), &bx, &by.complement(), p, opts)?;
    let big = Ball::new(x, r);
    let candidate = cut.capacity * psi.eval_checked(x, r)? / space.ball_measure(&big);
    Ok(BallCapacity {
        distance: r.to_f64_lossy(),
        small_radius: small.to_f64_lossy(),
        energy: cut.capacity.to_f64_lossy(),
        candidate: candidate.to_f64_lossy(),
    })
}

/// Knobs for [`certify`].
#[derive(Clone, Debug, Serialize)]
pub struct CertifyOptions {
    pub lambda_pi: f64,
    pub lambda_whitney: f64,
    pub eta: f64,
    /// Random `(f, g)` pairs blended per ball for `C_WB`.
    pub blend_trials: usize,
    pub ratio: RatioOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { lambda_pi: 2.0, lambda_whitney: 8.0, eta: 0.5, blend_trials: 4, ratio: RatioOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallRecord {
    pub center: usize,
    pub radius: f64,
    pub measure: f64,
    pub c_cap: f64,
    pub c_pi: RatioEstimate<f64>,
    pub c_cs: RatioEstimate<f64>,
    pub c_cs_classical: RatioEstimate<f64>,
    pub c_wb: f64,
    pub cutoff_residual: f64,
    pub cutoff_degenerate: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        values.fold(Range { min: f64::INFINITY, max: f64::NEG_INFINITY }, |r, v| Range { min: r.min.min(v), max: r.max.max(v) })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub c_d: f64,
    pub c_cap: Range,
    pub c_pi: Range,
    pub c_cs: Range,
    pub c_cs_classical: Range,
    pub c_wb: Range,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertReport {
    pub schema: &'static str,
    pub p: f64,
    pub beta: Option<f64>,
    pub options: CertifyOptions,
    pub balls: Vec<BallRecord>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

fn wrap<T: Scalar>(e: RatioEstimate<T>) -> RatioEstimate<f64> {
    RatioEstimate { value: e.value, method: e.method, restarts: e.restarts, iterations: e.iterations, seed: e.seed, witness: e.witness.iter().map(|v| v.to_f64_lossy()).collect() }
}

/// Default balls: centers on a net at scale `diam/8`, radii `diam/16`,
/// `diam/8` and `diam/4` moved to gaps between realized distances.
pub fn auto_balls<T: Scalar>(space: &MetricSpace<T>) -> Vec<Ball<T>> {
    let diam = space.diameter();
    let net = build_net(space, &VertexSet::full(space.n()), diam / lit(8.0));
    let mut out = Vec::new();
    for &x in &net.points {
        for k in [16.0, 8.0, 4.0] {
            let r = space.snap_radius(x, diam / lit(k));
            let b = Ball::new(x, r);
            if !out.contains(&b) {
                out.push(b);
            }
        }
    }
    out
}

fn certify_ball<T: Scalar>(space: &MetricSpace<T>, b: &Ball<T>, p: T, psi: &ScaleFunction<T>, opts: &CertifyOptions) -> Result<BallRecord> {
    let lambda = lit::<T>(opts.lambda_pi);
    let cut = capacity_minimizer(space, b, p, &opts.ratio.solve)?;
    let scale = psi.eval_checked(b.center, b.radius)?;
    let c_cap = cut.capacity * scale / space.ball_measure(b);
    let c_pi = poincare_constant(space, b, p, lambda, psi, &opts.ratio)?;
    let c_cs = cs_constant(space, b, p, lambda, &cut, &opts.ratio)?;
    let c_cl = classical_cs_constant(space, b, p, lambda, &cut, psi, &opts.ratio)?;
    let mut c_wb = 0.0f64;
    for k in 0..opts.blend_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.ratio.seed.wrapping_add(1000 + k as u64));
        let f: Vec<T> = (0..space.n()).map(|_| lit(rng.random_range(-1.0..1.0))).collect();
        let g: Vec<T> = (0..space.n()).map(|_| lit(rng.random_range(-1.0..1.0))).collect();
        let res = whitney_blend(space, &f, &g, b, lit(opts.eta), p, lit(opts.lambda_whitney), &opts.ratio.solve)?;
        c_wb = c_wb.max(blend_energy_report(space, &res, psi)?.ratio);
    }
    Ok(BallRecord {
        center: b.center,
        radius: b.radius.to_f64_lossy(),
        measure: space.ball_measure(b).to_f64_lossy(),
        c_cap: c_cap.to_f64_lossy(),
        c_pi: wrap(c_pi),
        c_cs: wrap(c_cs),
        c_cs_classical: wrap(c_cl),
        c_wb,
        cutoff_residual: cut.residual,
        cutoff_degenerate: cut.degenerate,
    })
}

/// Certifies every ball, in parallel; records come back in input order.
pub fn certify<T: Scalar>(space: &MetricSpace<T>, balls: &[Ball<T>], p: T, psi: &ScaleFunction<T>, opts: &CertifyOptions) -> Result<CertReport> {
    check_exponent(p)?;
    let records: Vec<BallRecord> = balls
        .par_iter()
        .map(|b| certify_ball(space, b, p, psi, opts))
        .collect::<Result<_>>()?;
    let samples: Vec<(usize, T)> = balls.iter().map(|b| (b.center, b.radius)).collect();
    let summary = Summary {
        c_d: doubling_constant(space, &samples).to_f64_lossy(),
        c_cap: Range::of(records.iter().map(|r| r.c_cap)),
        c_pi: Range::of(records.iter().map(|r| r.c_pi.value)),
        c_cs: Range::of(records.iter().map(|r| r.c_cs.value)),
        c_cs_classical: Range::of(records.iter().map(|r| r.c_cs_classical.value)),
        c_wb: Range::of(records.iter().map(|r| r.c_wb)),
    };
    let mut warnings = Vec::new();
    if records.iter().any(|r| r.cutoff_degenerate) {
        warnings.push("some doubled balls cover the whole graph; their cutoffs are constant".into());
    }
    if records.iter().any(|r| !r.c_pi.value.is_finite() || !r.c_cs.value.is_finite()) {
        warnings.push("infinite constant: the energy form is degenerate on some inflated ball".into());
    }
    Ok(CertReport {
        schema: SCHEMA,
        p: p.to_f64_lossy(),
        beta: psi.beta().map(|b| b.to_f64_lossy()),
        options: opts.clone(),
        balls: records,
        summary,
        warnings,
    })
}
