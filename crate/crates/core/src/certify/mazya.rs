//! Dyadic truncation and the end-to-end cutoff Sobolev construction.

use serde::Serialize;

use crate::blending::whitney_blend;
use crate::energy::{check_exponent, energy, energy_measure};
use crate::error::{Error, Result};
use crate::graph::{Ball, MetricSpace, VertexSet, WeightedGraph};
use crate::scalar::{lit, Scalar};
use crate::scale::ScaleFunction;
use crate::solver::{capacity_minimizer, log_caccioppoli_check, SolveOptions};

/// One dyadic level `λ` of the truncation.
#[derive(Clone, Debug, Serialize)]
pub struct MazyaLevel {
    pub lambda: f64,
    /// `|A_{2λ}|`.
    pub level_set: usize,
    /// `Γ⟨ψ⟩` on the graph interior of `A_{2λ}`.
    pub cutoff_mass: f64,
    /// `Γ⟨g_λ⟩` on `Ω` and its neighbors.
    pub truncated_energy: f64,
    /// `λ^{-p} Γ⟨g⟩` on the vertices where `g_λ` varies.
    pub band_bound: f64,
    pub slack_caccioppoli: f64,
    pub slack_band: f64,
}

impl MazyaLevel {
    pub fn worst_slack(&self) -> f64 {
        self.slack_caccioppoli.min(self.slack_band)
    }
}

/// Per-level and summed truncation bounds for `g` against `Γ⟨ψ⟩`.
#[derive(Clone, Debug, Serialize)]
pub struct MazyaAudit {
    pub p: f64,
    pub levels: Vec<MazyaLevel>,
    /// `Σ_x |g(x)|^p Γ⟨ψ⟩(x)`.
    pub integral: f64,
    /// Same with `|g(x)|` replaced by its minimum over the closed
    /// neighborhood of `x`, which is what the levels control.
    pub interior_integral: f64,
    /// `Σ_λ (4λ)^p Γ⟨ψ⟩(A°_{2λ})`.
    pub dyadic_sum: f64,
    /// `Γ⟨g⟩(X)`.
    pub energy: f64,
    /// `Σ_λ λ^p Γ⟨g_λ⟩(X)`, never above `energy`.
    pub truncation_sum: f64,
    /// Relative slack of `interior_integral <= 2^{p+1} energy`.
    pub summed_slack: f64,
    /// Relative slack of `dyadic_sum <= 4^p energy`.
    pub dyadic_slack: f64,
    /// Relative slack of `integral <= 2^{p+1} energy`.
    pub integral_slack: f64,
}

impl MazyaAudit {
    pub fn worst_level_slack(&self) -> f64 {
        self.levels.iter().map(MazyaLevel::worst_slack).fold(0.0, f64::min)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.worst_level_slack() >= -tol && self.summed_slack >= -tol && self.dyadic_slack >= -tol
    }
}

fn slack(lhs: f64, rhs: f64) -> f64 {
    if lhs <= rhs {
        0.0f64.max((rhs - lhs) / rhs.abs().max(1e-300)).min(1.0)
    } else {
        (rhs - lhs) / lhs.abs().max(rhs.abs()).max(1e-300)
    }
}

/// Audits the dyadic truncation of `g` against the cutoff `ψ`, which the
/// caller certifies to be superharmonic in `Ω`.
pub fn mazya_truncation_audit<T: Scalar>(graph: &WeightedGraph<T>, psi: &[T], g: &[T], omega: &VertexSet, p: T) -> Result<MazyaAudit> {
    check_exponent(p)?;
    let n = graph.n();
    if psi.len() != n || g.len() != n {
        return Err(Error::InvalidArgument("psi and g need one value per vertex".into()));
    }
    if let Some(x) = omega.complement().iter().find(|&x| g[x] != T::zero()) {
        return Err(Error::Hypothesis(format!("g must vanish off Omega, fails at vertex {x}")));
    }
    let abs: Vec<T> = g.iter().map(|v| v.abs()).collect();
    let gpsi = energy_measure(graph, psi, p)?;
    let gg = energy_measure(graph, g, p)?;
    let total = gg.total().to_f64_lossy();
    let pf = p.to_f64_lossy();

    let lows: Vec<T> = (0..n)
        .map(|x| graph.neighbors(x).iter().fold(abs[x], |m, &(y, _)| m.min(abs[y])))
        .collect();
    let integral: T = (0..n).map(|x| abs[x].powf(p) * gpsi.mass[x]).sum();
    let interior_integral: T = (0..n).map(|x| lows[x].powf(p) * gpsi.mass[x]).sum();

    let top = abs.iter().copied().fold(T::zero(), T::max);
    let bottom = abs.iter().copied().filter(|v| *v > T::zero()).fold(T::infinity(), T::min);
    let mut levels = Vec::new();
    let mut dyadic = 0.0;
    let mut truncation_sum = T::zero();
    if top > T::zero() {
        let jmin = bottom.log2().floor().to_f64_lossy() as i32 - 1;
        let jmax = top.log2().ceil().to_f64_lossy() as i32;
        for j in jmin..=jmax {
            let lambda = lit::<T>(2f64.powi(j));
            let two = lambda + lambda;
            let gl: Vec<T> = abs.iter().map(|&v| (v.min(two) - lambda).max(T::zero()) / lambda).collect();
            let a = VertexSet::from_mask(abs.iter().map(|&v| v > two).collect());
            let lc = log_caccioppoli_check(graph, psi, &gl, &a, omega, p, 0.0)?;
            let mut band = VertexSet::empty(n);
            let mut tl = T::zero();
            for e in graph.edges() {
                if gl[e.u] != gl[e.v] {
                    band.insert(e.u);
                    band.insert(e.v);
                    tl += e.w * (gl[e.u] - gl[e.v]).abs().powf(p);
                }
            }
            truncation_sum += lambda.powf(p) * tl;
            let band_bound = (gg.on(&band) / lambda.powf(p)).to_f64_lossy();
            dyadic += (4.0 * lambda.to_f64_lossy()).powf(pf) * lc.lhs;
            levels.push(MazyaLevel {
                lambda: lambda.to_f64_lossy(),
                level_set: a.len(),
                cutoff_mass: lc.lhs,
                truncated_energy: lc.rhs,
                band_bound,
                slack_caccioppoli: slack(lc.lhs, lc.rhs),
                slack_band: slack(lc.rhs, band_bound),
            });
        }
    }
    let c_sum = 2f64.powf(pf + 1.0);
    Ok(MazyaAudit {
        p: pf,
        levels,
        integral: integral.to_f64_lossy(),
        interior_integral: interior_integral.to_f64_lossy(),
        dyadic_sum: dyadic,
        energy: total,
        truncation_sum: truncation_sum.to_f64_lossy(),
        summed_slack: slack(interior_integral.to_f64_lossy(), c_sum * total),
        dyadic_slack: slack(dyadic, 4f64.powf(pf) * total),
        integral_slack: slack(integral.to_f64_lossy(), c_sum * total),
    })
}

/// Every measured quantity of one run of the construction.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    /// `∫_{2B} |f - f_B|^p dΓ⟨ψ_B⟩`.
    pub lhs: f64,
    /// `Γ⟨f⟩(ΛB)`.
    pub energy: f64,
    /// `Γ⟨h_i⟩(X) / Γ⟨f⟩(ΛB)` for the two blends.
    pub w1: f64,
    pub w2: f64,
    /// `cap(B) Ψ(B) / μ(B)`.
    pub c_cap: f64,
    /// `|f'_B|^p μ(B) / (Ψ(B) Γ⟨f⟩(ΛB))`.
    pub c_mean: f64,
    /// `2^{p-1} (2^{p+1} (w1 + w2) + c_cap c_mean)`.
    pub constant: f64,
    pub bound_holds: bool,
    /// `|f'|^p <= |h1|^p + |h2|^p` on `2B`.
    pub split_holds: bool,
    /// Audit of `h2` against `ψ_B` on `2B`.
    pub inner: MazyaAudit,
    /// Audit of `h1` against `1 - ψ_B` on `X \ B`.
    pub outer: MazyaAudit,
    /// Set when `ψ_{2ΛB}` is constant, so the subtraction is a plain shift.
    pub shift_degenerate: bool,
}

impl PipelineReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.bound_holds && self.split_holds && self.inner.passed(tol) && self.outer.passed(tol)
    }
}

/// Runs the cutoff Sobolev construction for one `f`:
///
/// 1. `f' = f - f_{2B} ψ_{2ΛB}`;
/// 2. `h1` is `0` on `B` and `f'` off `(1+η)B`, `h2` is `f'` on `(1+η)B`
///    and `0` off `2B`, both by Whitney blending;
/// 3. truncation audits for `(ψ_B, h2, 2B)` and `(1 - ψ_B, h1, X \ B)`.
#[allow(clippy::too_many_arguments)]
pub fn constructive_cs_pipeline<T: Scalar>(
    space: &MetricSpace<T>,
    b: &Ball<T>,
    f: &[T],
    p: T,
    eta: T,
    lambda: T,
    lambda_whitney: T,
    psi: &ScaleFunction<T>,
    opts: &SolveOptions,
) -> Result<PipelineReport> {
    check_exponent(p)?;
    let graph = space.graph();
    let n = space.n();
    if f.len() != n {
        return Err(Error::InvalidArgument("f needs one value per vertex".into()));
    }
    let two = lit::<T>(2.0);
    let ball = space.ball_members(b);
    if ball.is_empty() {
        return Err(Error::InvalidArgument("empty ball".into()));
    }
    let double = space.ball_members(&b.scaled(two));
    let big = space.ball_members(&b.scaled(lambda));
    let stage = |s: &'static str| Error::stage(s);

    let cut = capacity_minimizer(space, b, p, opts).map_err(stage("cutoff"))?;
    let wide = capacity_minimizer(space, &b.scaled(two * lambda), p, opts).map_err(stage("wide cutoff"))?;
    let mean2 = graph.average(f, &double);
    let fp: Vec<T> = f.iter().zip(&wide.values).map(|(&v, &w)| v - mean2 * w).collect();

    let zero = vec![T::zero(); n];
    let h1 = whitney_blend(space, &zero, &fp, b, eta, p, lambda_whitney, opts).map_err(stage("outer blend"))?.h;
    let mid = b.scaled(T::one() + eta);
    let eta2 = two / (T::one() + eta) - T::one();
    let h2 = whitney_blend(space, &fp, &zero, &mid, eta2, p, lambda_whitney, opts).map_err(stage("inner blend"))?.h;

    let pw = |v: T| v.abs().powf(p);
    let split_holds = double
        .iter()
        .all(|x| pw(fp[x]) <= (pw(h1[x]) + pw(h2[x])) * (T::one() + lit(1e-12)));

    let inner = mazya_truncation_audit(graph, &cut.values, &h2, &double, p).map_err(stage("inner truncation"))?;
    let flipped: Vec<T> = cut.values.iter().map(|&v| T::one() - v).collect();
    let outer = mazya_truncation_audit(graph, &flipped, &h1, &ball.complement(), p).map_err(stage("outer truncation"))?;

    let gpsi = energy_measure(graph, &cut.values, p)?;
    let mean_b = graph.average(f, &ball);
    let dev: Vec<T> = f.iter().map(|&v| pw(v - mean_b)).collect();
    let lhs = gpsi.integrate_on(&dev, &double).to_f64_lossy();
    let e = energy_measure(graph, f, p)?.on(&big).to_f64_lossy();
    let scale = psi.eval_checked(b.center, b.radius)?;
    let mu_b = graph.measure(&ball);
    let c_cap = (cut.capacity * scale / mu_b).to_f64_lossy();
    let fp_b = graph.average(&fp, &ball);
    let pf = p.to_f64_lossy();
    let (w1, w2, c_mean) = if e > 0.0 {
        (
            energy(graph, &h1, p).to_f64_lossy() / e,
            energy(graph, &h2, p).to_f64_lossy() / e,
            (pw(fp_b) * mu_b / scale).to_f64_lossy() / e,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let constant = 2f64.powf(pf - 1.0) * (2f64.powf(pf + 1.0) * (w1 + w2) + c_cap * c_mean);
    Ok(PipelineReport {
        lhs,
        energy: e,
        w1,
        w2,
        c_cap,
        c_mean,
        constant,
        bound_holds: lhs <= constant * e * (1.0 + 1e-12) + 1e-300,
        split_holds,
        inner,
        outer,
        shift_degenerate: wide.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn path(n: usize) -> WeightedGraph<f64> {
        let edges = (0..n).map(|i| Edge { u: i, v: i + 1, w: 1.0, len: 1.0 }).collect();
        WeightedGraph::new(vec![1.0; n + 1], edges).unwrap()
    }

    #[test]
    fn zero_g_is_vacuous() {
        let g = path(8);
        let psi = vec![1.0, 1.0, 0.75, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0];
        let omega = VertexSet::from_members(9, 0..5);
        let a = mazya_truncation_audit(&g, &psi, &[0.0; 9], &omega, 2.0).unwrap();
        assert!(a.levels.is_empty() && a.integral == 0.0 && a.passed(1e-12));
    }

    #[test]
    fn two_level_bump() {
        // |g| takes the values 1 and 3: λ = 1/2 .. 4
        let g = path(8);
        let psi = vec![1.0, 1.0, 0.75, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0];
        let mut h = vec![0.0; 9];
        h[2] = 1.0;
        h[3] = 3.0;
        h[4] = 1.0;
        let omega = VertexSet::from_members(9, 1..6);
        let a = mazya_truncation_audit(&g, &psi, &h, &omega, 2.0).unwrap();
        assert_eq!(a.levels.len(), 4);
        assert!(a.worst_level_slack() >= 0.0);
        assert!(a.truncation_sum <= a.energy * (1.0 + 1e-14));
        // only vertex 3 is above 2λ for λ = 1, and it has no interior
        let lvl = a.levels.iter().find(|l| l.lambda == 1.0).unwrap();
        assert_eq!((lvl.level_set, lvl.cutoff_mass), (1, 0.0));
    }

    #[test]
    fn rejects_g_outside_omega() {
        let g = path(3);
        let omega = VertexSet::from_members(4, [1]);
        let err = mazya_truncation_audit(&g, &[1.0, 1.0, 0.0, 0.0], &[0.0, 1.0, 1.0, 0.0], &omega, 2.0).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }
}
