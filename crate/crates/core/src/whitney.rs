//! Whitney covers of open vertex sets.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{build_net, Ball, MetricSpace, VertexSet};
use crate::scalar::{lit, Scalar};

/// A cover ball with its dyadic scale index.
#[derive(Clone, Debug, PartialEq)]
pub struct WhitneyBall<T> {
    pub ball: Ball<T>,
    pub scale_index: i32,
    /// `d(x_B, X \ Ω)`.
    pub dist_to_complement: T,
}

/// Geometric certificate of a cover.
#[derive(Clone, Debug, Serialize)]
pub struct CoverCertificate {
    /// Balls with `Λ³r/2 <= d(x_B, X∖Ω) <= Λ³r` failing.
    pub property1_violations: usize,
    /// Largest number of `Λ²`-inflated balls containing a single vertex.
    pub overlap: usize,
    pub union_is_omega: bool,
    /// Largest scale-index difference between two balls sharing a vertex.
    pub max_scale_gap: i32,
}

impl CoverCertificate {
    pub fn passed(&self) -> bool {
        self.property1_violations == 0 && self.union_is_omega && self.max_scale_gap <= 2
    }
}

#[derive(Clone, Debug)]
pub struct WhitneyCover<T> {
    pub omega: VertexSet,
    pub lambda: T,
    pub balls: Vec<WhitneyBall<T>>,
    pub certificate: CoverCertificate,
}

impl<T: Scalar> WhitneyCover<T> {
    pub fn plain_balls(&self) -> Vec<Ball<T>> {
        self.balls.iter().map(|b| b.ball).collect()
    }
}

fn dyadic<T: Scalar>(i: i32) -> T {
    lit::<T>(2.0).powi(i)
}

/// Whitney cover of `Ω`: for every dyadic `i`, a `2^{i-3}Λ^{-3}`-net of
/// `Ω_i = {x ∈ Ω : 2^{i-1} <= d(x, X∖Ω) <= 2^i}` carrying balls of radius
/// `2^iΛ^{-3}`. Balls are ordered by `(i, center)`.
pub fn whitney_cover<T: Scalar>(space: &MetricSpace<T>, omega: &VertexSet, lambda: T) -> Result<WhitneyCover<T>> {
    if lambda < lit(8.0) {
        return Err(Error::LambdaTooSmall(lambda.to_f64_lossy()));
    }
    let complement = omega.complement();
    if complement.is_empty() {
        return Err(Error::ComplementEmpty);
    }
    let dist: Vec<T> = (0..space.n()).map(|x| space.dist_to_set(x, &complement)).collect();
    let lam3 = lambda.powi(3);
    let members = omega.members();
    let mut balls = Vec::new();
    if !members.is_empty() {
        let dmin = members.iter().map(|&x| dist[x]).fold(T::infinity(), T::min);
        let dmax = members.iter().map(|&x| dist[x]).fold(T::zero(), T::max);
        let lo = dmin.log2().floor().to_i32().unwrap();
        let hi = dmax.log2().ceil().to_i32().unwrap() + 1;
        let per_scale: Vec<Vec<WhitneyBall<T>>> = (lo..=hi)
            .into_par_iter()
            .map(|i| {
                let (a, b) = (dyadic::<T>(i - 1), dyadic::<T>(i));
                let level = VertexSet::from_members(space.n(), members.iter().copied().filter(|&x| a <= dist[x] && dist[x] <= b));
                if level.is_empty() {
                    return Vec::new();
                }
                let net = build_net(space, &level, dyadic::<T>(i - 3) / lam3);
                let r = b / lam3;
                net.points
                    .into_iter()
                    .map(|c| WhitneyBall { ball: Ball::new(c, r), scale_index: i, dist_to_complement: dist[c] })
                    .collect()
            })
            .collect();
        balls = per_scale.into_iter().flatten().collect();
    }
    let certificate = certify_cover(space, omega, lambda, &balls);
    Ok(WhitneyCover { omega: omega.clone(), lambda, balls, certificate })
}

fn certify_cover<T: Scalar>(space: &MetricSpace<T>, omega: &VertexSet, lambda: T, balls: &[WhitneyBall<T>]) -> CoverCertificate {
    let n = space.n();
    let lam3 = lambda.powi(3);
    let two = lit::<T>(2.0);
    let property1_violations = balls
        .iter()
        .filter(|b| {
            let r = b.ball.radius;
            !(lam3 * r / two <= b.dist_to_complement && b.dist_to_complement <= lam3 * r)
        })
        .count();
    let mut union = VertexSet::empty(n);
    let mut lo = vec![i32::MAX; n];
    let mut hi = vec![i32::MIN; n];
    let mut overlap = vec![0usize; n];
    let lam2 = lambda * lambda;
    for b in balls {
        for x in space.ball_members(&b.ball).iter() {
            union.insert(x);
            lo[x] = lo[x].min(b.scale_index);
            hi[x] = hi[x].max(b.scale_index);
        }
        for x in space.ball_members(&b.ball.scaled(lam2)).iter() {
            overlap[x] += 1;
        }
    }
    let max_scale_gap = (0..n).filter(|&x| lo[x] <= hi[x]).map(|x| hi[x] - lo[x]).max().unwrap_or(0);
    CoverCertificate {
        property1_violations,
        overlap: overlap.into_iter().max().unwrap_or(0),
        union_is_omega: union == *omega,
        max_scale_gap,
    }
}

/// A failed neighbor-geometry check.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryViolation {
    pub first: usize,
    pub second: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighborCheck {
    pub pairs_checked: usize,
    pub violations: Vec<GeometryViolation>,
}

impl NeighborCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For every ordered pair with `d(B, B') <= 2 rad(B')`, checks `B ⊂ 16B'`,
/// `B' ⊂ 16B` and that the radii are within a factor 3.
pub fn neighbor_geometry_check<T: Scalar>(space: &MetricSpace<T>, cover: &WhitneyCover<T>) -> NeighborCheck {
    let sets: Vec<VertexSet> = cover.balls.iter().map(|b| space.ball_members(&b.ball)).collect();
    let big: Vec<VertexSet> = cover.balls.iter().map(|b| space.ball_members(&b.ball.scaled(lit(16.0)))).collect();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let mut pairs = 0;
    let mut violations = Vec::new();
    for (i, bi) in cover.balls.iter().enumerate() {
        for (j, bj) in cover.balls.iter().enumerate() {
            if i == j {
                continue;
            }
            let (b, bp) = (&bi.ball, &bj.ball);
            // cheap lower bound before the exact set distance
            if space.d(b.center, bp.center) - b.radius - bp.radius > two * bp.radius {
                continue;
            }
            if space.set_distance(&sets[i], &sets[j]) > two * bp.radius {
                continue;
            }
            pairs += 1;
            let mut fail = |reason: &str| violations.push(GeometryViolation { first: i, second: j, reason: reason.into() });
            if !sets[i].is_subset(&big[j]) {
                fail("B not inside 16B'");
            }
            if !sets[j].is_subset(&big[i]) {
                fail("B' not inside 16B");
            }
            if b.radius > three * bp.radius || bp.radius > three * b.radius {
                fail("radius ratio above 3");
            }
        }
    }
    NeighborCheck { pairs_checked: pairs, violations }
}
