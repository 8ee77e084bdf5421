//! Whitney blending of two functions across an annulus, discrete
//! convolutions and the Poincaré-type membership check.

use serde::Serialize;

use crate::energy::{check_exponent, energy_measure};
use crate::error::{Error, Result};
use crate::graph::{build_net, Ball, MetricSpace, VertexSet};
use crate::partition::{sobolev_partition, BallOrdering, SobolevPartition};
use crate::scale::ScaleFunction;
use crate::scalar::{lit, Scalar};
use crate::solver::SolveOptions;
use crate::whitney::{whitney_cover, WhitneyCover};

/// Output of [`whitney_blend`].
#[derive(Clone, Debug)]
pub struct BlendResult<T> {
    pub h: Vec<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub b0: Ball<T>,
    pub eta: T,
    pub p: T,
    pub lambda: T,
    /// `{d(x_{B0}, ·) <= rad B0}`.
    pub closure: VertexSet,
    /// Members of `(1+η)B0`.
    pub outer: VertexSet,
    /// `(1+η)B0 ∖ closure(B0)`.
    pub omega: VertexSet,
    pub cover: Option<WhitneyCover<T>>,
    pub partition: Option<SobolevPartition<T>>,
    /// `c_B` per cover ball.
    pub coefficients: Vec<T>,
    /// Cover balls with `d(x_B, B0) <= (η/2) rad B0`.
    pub near: Vec<bool>,
    /// `X ∖ (1+η)B0` is empty and `h = f`.
    pub degenerate: bool,
}

impl<T: Scalar> BlendResult<T> {
    /// `h = f` on `closure(B0)` and `h = g` off `(1+η)B0`, compared bitwise.
    pub fn boundary_agreement(&self) -> bool {
        let n = self.h.len();
        (0..n).all(|x| {
            if self.closure.contains(x) {
                self.h[x] == self.f[x]
            } else if !self.outer.contains(x) {
                self.degenerate || self.h[x] == self.g[x]
            } else {
                self.h[x].is_finite()
            }
        })
    }
}

/// Builds `h` with `h = f` on `closure(B0)`, `h = g` off `(1+η)B0` and
/// `h = g + Σ_B φ_B c_B` on the annulus, where `c_B` is the μ-average of
/// `f - g` on near balls and `0` on the others.
pub fn whitney_blend<T: Scalar>(
    space: &MetricSpace<T>,
    f: &[T],
    g: &[T],
    b0: &Ball<T>,
    eta: T,
    p: T,
    lambda: T,
    options: &SolveOptions,
) -> Result<BlendResult<T>> {
    check_exponent(p)?;
    if !(eta > T::zero() && eta < T::one()) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    let n = space.n();
    if f.len() != n || g.len() != n {
        return Err(Error::InvalidArgument("f and g need one value per vertex".into()));
    }
    let closure = space.closed_ball_members(b0);
    let outer = space.ball_members(&b0.scaled(T::one() + eta));
    let inner = space.ball_members(b0);
    let mut result = BlendResult {
        h: f.to_vec(),
        f: f.to_vec(),
        g: g.to_vec(),
        b0: *b0,
        eta,
        p,
        lambda,
        omega: outer.difference(&closure),
        closure: closure.clone(),
        outer: outer.clone(),
        cover: None,
        partition: None,
        coefficients: Vec::new(),
        near: Vec::new(),
        degenerate: outer.is_full(),
    };
    if result.degenerate {
        return Ok(result);
    }
    let diff: Vec<T> = f.iter().zip(g).map(|(&a, &b)| a - b).collect();
    let omega = result.omega.clone();
    for x in 0..n {
        if !closure.contains(x) {
            result.h[x] = g[x];
        }
    }
    if omega.is_empty() {
        return Ok(result);
    }
    let cover = whitney_cover(space, &omega, lambda).map_err(Error::stage("whitney cover"))?;
    let balls = cover.plain_balls();
    let part = sobolev_partition(space, &balls, p, BallOrdering::DecreasingRadius, None, options)
        .map_err(Error::stage("partition of unity"))?;
    let reach = eta / lit(2.0) * b0.radius;
    let near: Vec<bool> = balls.iter().map(|b| space.dist_to_set(b.center, &inner) <= reach).collect();
    let coefficients: Vec<T> = balls
        .iter()
        .zip(&near)
        .map(|(b, &is_near)| if is_near { space.graph().average(&diff, &space.ball_members(b)) } else { T::zero() })
        .collect();
    for x in omega.iter() {
        let s: T = part.phi.iter().zip(&coefficients).map(|(phi, &c)| phi[x] * c).sum();
        result.h[x] = s + g[x];
    }
    result.cover = Some(cover);
    result.partition = Some(part);
    result.coefficients = coefficients;
    result.near = near;
    Ok(result)
}

/// Both sides of the blending energy bound.
#[derive(Clone, Debug, Serialize)]
pub struct BlendEnergy {
    /// `Γ⟨h⟩(2B0)`.
    pub lhs: f64,
    /// `μ(B0)/Ψ(B0) · avg_{(1+η)B0}|f-g|^p`.
    pub oscillation: f64,
    /// `Γ⟨f⟩(2B0) + Γ⟨g⟩(2B0)`.
    pub energies: f64,
    /// `lhs / (oscillation + energies)`; the empirical blending constant.
    pub ratio: f64,
    /// `∫|h-g|^p dμ / ∫_{(1+η)B0}|f-g|^p dμ`.
    pub lp_ratio: f64,
    /// Bound on `lp_ratio` from the partition overlap and doubling of the cover.
    pub lp_bound: f64,
}

impl BlendEnergy {
    pub fn finite(&self) -> bool {
        self.ratio.is_finite() && self.lhs.is_finite()
    }
}

pub fn blend_energy_report<T: Scalar>(space: &MetricSpace<T>, res: &BlendResult<T>, psi: &ScaleFunction<T>) -> Result<BlendEnergy> {
    let g = space.graph();
    let p = res.p;
    let double = space.ball_members(&res.b0.scaled(lit(2.0)));
    let lhs = energy_measure(g, &res.h, p)?.on(&double);
    let dev: Vec<T> = res.f.iter().zip(&res.g).map(|(&a, &b)| (a - b).abs().powf(p)).collect();
    let osc = space.ball_measure(&res.b0) / psi.of_ball(&res.b0) * g.average(&dev, &res.outer);
    let en = energy_measure(g, &res.f, p)?.on(&double) + energy_measure(g, &res.g, p)?.on(&double);
    let rhs = osc + en;
    let ratio = if lhs == T::zero() {
        T::zero()
    } else if rhs == T::zero() {
        T::infinity()
    } else {
        lhs / rhs
    };

    let hg: T = (0..space.n()).map(|x| g.mu()[x] * (res.h[x] - res.g[x]).abs().powf(p)).sum();
    let fg: T = res.outer.iter().map(|x| g.mu()[x] * dev[x]).sum();
    let lp_ratio = if hg == T::zero() { T::zero() } else { hg / fg };
    let mut lp_bound = T::one();
    if let Some(cover) = &res.cover {
        let mut overlap = vec![0usize; space.n()];
        let mut doubling = T::one();
        for b in cover.plain_balls() {
            for x in space.ball_members(&b).iter() {
                overlap[x] += 1;
            }
            doubling = doubling.max(space.ball_measure(&b.scaled(lit(2.0))) / space.ball_measure(&b));
        }
        let k = overlap.into_iter().max().unwrap_or(0);
        lp_bound += doubling * lit::<T>(k as f64);
    }
    Ok(BlendEnergy {
        lhs: lhs.to_f64_lossy(),
        oscillation: osc.to_f64_lossy(),
        energies: en.to_f64_lossy(),
        ratio: ratio.to_f64_lossy(),
        lp_ratio: lp_ratio.to_f64_lossy(),
        lp_bound: lp_bound.to_f64_lossy(),
    })
}

/// `h_k = Σ_B h_B φ_B` over a `2^{-k}`-net.
#[derive(Clone, Debug)]
pub struct Convolution<T> {
    pub h_k: Vec<T>,
    /// `‖h_k - h‖_p`.
    pub lp_distance: T,
    /// Set when `2^{-k}` is below the smallest edge length and `h_k = h`.
    pub below_resolution: bool,
    pub balls: Vec<Ball<T>>,
}

pub fn discrete_convolution<T: Scalar>(space: &MetricSpace<T>, h: &[T], k: i32, p: T, options: &SolveOptions) -> Result<Convolution<T>> {
    check_exponent(p)?;
    let g = space.graph();
    let r = lit::<T>(2.0).powi(-k);
    let min_len = g.edges().iter().map(|e| e.len).fold(T::infinity(), T::min);
    if g.n() > 1 && r < min_len {
        return Ok(Convolution { h_k: h.to_vec(), lp_distance: T::zero(), below_resolution: true, balls: Vec::new() });
    }
    let net = build_net(space, &VertexSet::full(space.n()), r);
    let balls: Vec<Ball<T>> = net.points.iter().map(|&c| Ball::new(c, r)).collect();
    let part = sobolev_partition(space, &balls, p, BallOrdering::DecreasingRadius, None, options)?;
    let avgs: Vec<T> = balls.iter().map(|b| g.average(h, &space.ball_members(b))).collect();
    let h_k: Vec<T> = (0..space.n()).map(|x| part.phi.iter().zip(&avgs).map(|(phi, &a)| phi[x] * a).sum()).collect();
    let dist: T = (0..space.n()).map(|x| g.mu()[x] * (h_k[x] - h[x]).abs().powf(p)).sum::<T>().powf(T::one() / p);
    Ok(Convolution { h_k, lp_distance: dist, below_resolution: false, balls })
}

/// The auxiliary measure `ν` of a blend (in the reduction `g = 0`):
/// `Σ_B Ψ(B)/μ(B) Γ⟨f̃⟩(2Λ²B) Γ⟨φ_B⟩ + Γ⟨f̃⟩ + avg_{(1+η)B0}|f̃|^p Σ_{B large} Γ⟨φ_B⟩`.
pub fn blend_nu<T: Scalar>(space: &MetricSpace<T>, res: &BlendResult<T>, psi: &ScaleFunction<T>) -> Result<Vec<T>> {
    let g = space.graph();
    let p = res.p;
    let diff: Vec<T> = res.f.iter().zip(&res.g).map(|(&a, &b)| a - b).collect();
    let gf = energy_measure(g, &diff, p)?;
    let mut nu = gf.mass.clone();
    let (Some(cover), Some(part)) = (&res.cover, &res.partition) else {
        return Ok(nu);
    };
    let dev: Vec<T> = diff.iter().map(|v| v.abs().powf(p)).collect();
    let avg = g.average(&dev, &res.outer);
    let lam = res.lambda;
    let gate = res.eta / (lit::<T>(12.0) * lam.powi(3)) * res.b0.radius;
    for (k, wb) in cover.balls.iter().enumerate() {
        let b = &wb.ball;
        let gphi = energy_measure(g, &part.phi[k], p)?;
        let mut w = psi.of_ball(b) / space.ball_measure(b) * gf.on(&space.ball_members(&b.scaled(lit::<T>(2.0) * lam * lam)));
        if b.radius >= gate {
            w += avg;
        }
        for x in 0..space.n() {
            nu[x] += w * gphi.mass[x];
        }
    }
    Ok(nu)
}

/// Which case of the blending argument a test ball falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CaseClass {
    /// Inside `B0` or outside `(1+η)B0`.
    A,
    /// Meets the annulus but no near cover ball.
    BEmpty,
    /// Meets a near cover ball no larger than itself.
    B1,
    /// Every near cover ball it meets is larger.
    B2,
    /// Meets `closure(B0) ∖ B0` but not the annulus; not covered by the cases.
    Straddle,
}

/// Classifies `ball` against a blend. The reference near ball is the
/// smallest near ball meeting `ball`.
pub fn classify_ball<T: Scalar>(space: &MetricSpace<T>, res: &BlendResult<T>, ball: &Ball<T>) -> CaseClass {
    let members = space.ball_members(ball);
    let inner = space.ball_members(&res.b0);
    if members.is_subset(&inner) || !members.intersects(&res.outer) {
        return CaseClass::A;
    }
    if !members.intersects(&res.omega) {
        return CaseClass::Straddle;
    }
    let Some(cover) = &res.cover else {
        return CaseClass::BEmpty;
    };
    let smallest = cover
        .balls
        .iter()
        .zip(&res.near)
        .filter(|(wb, &near)| near && space.ball_members(&wb.ball).intersects(&members))
        .map(|(wb, _)| wb.ball.radius)
        .fold(T::infinity(), T::min);
    if !smallest.is_finite() {
        CaseClass::BEmpty
    } else if smallest <= ball.radius {
        CaseClass::B1
    } else {
        CaseClass::B2
    }
}

/// Sweep outcome of the membership check.
#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub balls_checked: usize,
    /// `max avg_B|h-h_B|^p / (Ψ(B)/μ(B) ν(ΛB))`: the constant achieved.
    pub hypothesis_constant: f64,
    pub worst_ball: Option<(usize, f64)>,
    /// `max Γ⟨h⟩(A) / ν(A ∪ ∂A)` over `A = X` and the swept balls.
    pub conclusion_constant: f64,
    pub case_counts: Vec<(CaseClass, usize)>,
    /// No ball with radius at most `δ` exists above the graph's resolution,
    /// so every swept ball is a single vertex.
    pub vacuous: bool,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.hypothesis_constant.is_finite() && self.conclusion_constant.is_finite()
    }

    pub fn count(&self, case: CaseClass) -> usize {
        self.case_counts.iter().find(|(c, _)| *c == case).map(|(_, n)| *n).unwrap_or(0)
    }
}

/// Checks `avg_B|h-h_B|^p <= C Ψ(B)/μ(B) ν(ΛB)` on every ball with center
/// a vertex and radius at most `delta` (grid midpoints plus `delta`), and
/// reports the smallest `C` that works.
pub fn pi_membership_check<T: Scalar>(
    space: &MetricSpace<T>,
    h: &[T],
    nu: &[T],
    lambda: T,
    delta: T,
    p: T,
    psi: &ScaleFunction<T>,
    blend: Option<&BlendResult<T>>,
) -> Result<MembershipReport> {
    check_exponent(p)?;
    if nu.iter().any(|v| *v < T::zero()) {
        return Err(Error::InvalidArgument("nu must be non-negative".into()));
    }
    let g = space.graph();
    let gh = energy_measure(g, h, p)?;
    let mass = |s: &VertexSet| -> T { s.iter().map(|x| nu[x]).sum() };
    let ratio = |num: T, den: T| -> T {
        if num <= T::zero() {
            T::zero()
        } else if den <= T::zero() {
            T::infinity()
        } else {
            num / den
        }
    };
    let mut counts: Vec<(CaseClass, usize)> = Vec::new();
    let mut hyp = T::zero();
    let mut worst = None;
    let mut concl = ratio(gh.total(), nu.iter().copied().sum());
    let mut checked = 0;
    let mut vacuous = true;
    for x in 0..space.n() {
        let mut radii: Vec<T> = space.radius_grid(x).into_iter().filter(|&r| r <= delta).collect();
        radii.push(delta);
        for r in radii {
            let b = Ball::new(x, r);
            let members = space.ball_members(&b);
            if members.len() > 1 {
                vacuous = false;
            }
            let avg = g.average(h, &members);
            let dev: Vec<T> = h.iter().map(|&v| (v - avg).abs().powf(p)).collect();
            let lhs = g.average(&dev, &members);
            let rhs = psi.of_ball(&b) / g.measure(&members) * mass(&space.ball_members(&b.scaled(lambda)));
            let c = ratio(lhs, rhs);
            if c > hyp {
                hyp = c;
                worst = Some((x, r.to_f64_lossy()));
            }
            concl = concl.max(ratio(gh.on(&members), mass(&g.inflate(&members))));
            if let Some(res) = blend {
                let case = classify_ball(space, res, &b);
                match counts.iter_mut().find(|(c, _)| *c == case) {
                    Some(e) => e.1 += 1,
                    None => counts.push((case, 1)),
                }
            }
            checked += 1;
        }
    }
    Ok(MembershipReport {
        balls_checked: checked,
        hypothesis_constant: hyp.to_f64_lossy(),
        worst_ball: worst,
        conclusion_constant: concl.to_f64_lossy(),
        case_counts: counts,
        vacuous,
    })
}

/// `C_δ = η / (2(12 + 6Λ³))`.
pub fn c_delta<T: Scalar>(eta: T, lambda: T) -> T {
    eta / (lit::<T>(2.0) * (lit::<T>(12.0) + lit::<T>(6.0) * lambda.powi(3)))
}
