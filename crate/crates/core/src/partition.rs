//! Sobolev partitions of unity subordinate to ball collections.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{energy_measure, check_exponent};
use crate::error::{Error, Result};
use crate::graph::{Ball, MetricSpace, VertexSet};
use crate::scale::ScaleFunction;
use crate::scalar::{lit, Scalar};
use crate::solver::{capacity_minimizer, SolveOptions};

/// Order in which the inductive construction visits the balls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum BallOrdering {
    /// Largest radius first, ties by center id.
    #[default]
    DecreasingRadius,
    AsGiven,
}

#[derive(Clone, Debug)]
pub struct SobolevPartition<T> {
    pub balls: Vec<Ball<T>>,
    /// Construction order as indices into `balls`.
    pub order: Vec<usize>,
    /// `φ_B`, indexed like `balls`.
    pub phi: Vec<Vec<T>>,
    /// Cutoffs `ψ_B` used by the construction.
    pub psi: Vec<Vec<T>>,
    pub p: T,
    /// Largest number of balls meeting a single `2B`.
    pub local_finiteness: usize,
    pub certificate: PartitionCertificate,
}

/// Pointwise checks of the construction.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionCertificate {
    /// `max |Σφ - 1|` over the union of the balls.
    pub unity_defect: f64,
    /// Every prefix sum lies in `[0, 1]`.
    pub prefix_in_unit_interval: bool,
    /// Where a prefix sum is `< 1`, every earlier `φ` equals its `ψ`.
    pub prefix_implication: bool,
    /// Every `φ_B` vanishes off `2B`.
    pub supported_in_double: bool,
}

impl PartitionCertificate {
    pub fn passed(&self, tol: f64) -> bool {
        self.unity_defect <= tol && self.prefix_in_unit_interval && self.prefix_implication && self.supported_in_double
    }
}

/// Checks that `ψ` is a valid cutoff for ball `index`.
fn validate_cutoff<T: Scalar>(space: &MetricSpace<T>, ball: &Ball<T>, psi: &[T], index: usize) -> Result<()> {
    let bad = |reason: String| Error::InvalidCutoff { index, reason };
    if psi.len() != space.n() {
        return Err(bad("wrong length".into()));
    }
    if let Some(x) = (0..psi.len()).find(|&x| !(psi[x] >= T::zero() && psi[x] <= T::one())) {
        return Err(bad(format!("value {} at vertex {x} outside [0, 1]", psi[x])));
    }
    if let Some(x) = space.ball_members(ball).iter().find(|&x| psi[x] != T::one()) {
        return Err(bad(format!("not 1 on the ball (vertex {x})")));
    }
    let double = space.ball_members(&ball.scaled(lit(2.0)));
    if let Some(x) = double.complement().iter().find(|&x| psi[x] != T::zero()) {
        return Err(bad(format!("not 0 off the doubled ball (vertex {x})")));
    }
    Ok(())
}

/// `C_N`: the most balls whose member sets meet a single `2B`.
pub fn local_finiteness<T: Scalar>(space: &MetricSpace<T>, balls: &[Ball<T>]) -> usize {
    let sets: Vec<VertexSet> = balls.iter().map(|b| space.ball_members(b)).collect();
    balls
        .iter()
        .map(|b| {
            let double = space.ball_members(&b.scaled(lit(2.0)));
            sets.iter().filter(|s| s.intersects(&double)).count()
        })
        .max()
        .unwrap_or(0)
}

/// Construction order for a ball list.
pub fn ball_order<T: Scalar>(balls: &[Ball<T>], ordering: BallOrdering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    if ordering == BallOrdering::DecreasingRadius {
        order.sort_by(|&a, &b| {
            balls[b]
                .radius
                .partial_cmp(&balls[a].radius)
                .unwrap()
                .then(balls[a].center.cmp(&balls[b].center))
                .then(a.cmp(&b))
        });
    }
    order
}

/// `φ_{B_n} = min(ψ_{B_n}, 1 - Σ_{i<n} φ_{B_i})` in the chosen order.
///
/// Cutoffs default to the capacity minimizers of the balls.
pub fn sobolev_partition<T: Scalar>(
    space: &MetricSpace<T>,
    balls: &[Ball<T>],
    p: T,
    ordering: BallOrdering,
    cutoffs: Option<Vec<Vec<T>>>,
    options: &SolveOptions,
) -> Result<SobolevPartition<T>> {
    check_exponent(p)?;
    let n = space.n();
    let psi: Vec<Vec<T>> = match cutoffs {
        Some(c) => {
            if c.len() != balls.len() {
                return Err(Error::InvalidArgument("one cutoff per ball is required".into()));
            }
            c
        }
        None => balls
            .par_iter()
            .map(|b| capacity_minimizer(space, b, p, options).map(|c| c.values))
            .collect::<Result<_>>()?,
    };
    for (i, (b, s)) in balls.iter().zip(&psi).enumerate() {
        validate_cutoff(space, b, s, i)?;
    }

    let order = ball_order(balls, ordering);
    let mut phi = vec![vec![T::zero(); n]; balls.len()];
    let mut sum = vec![T::zero(); n];
    let mut prefix_ok = true;
    let mut implication = true;
    let mut done: Vec<usize> = Vec::new();
    for &k in &order {
        for x in 0..n {
            let rest = T::one() - sum[x];
            let mut v = psi[k][x].min(rest);
            // keep the running sum at most 1 despite rounding
            while sum[x] + v > T::one() {
                v = v - v * T::epsilon() - T::min_positive_value();
                if v < T::zero() {
                    v = T::zero();
                }
            }
            phi[k][x] = v;
            sum[x] += v;
            if !(sum[x] >= T::zero() && sum[x] <= T::one()) {
                prefix_ok = false;
            }
        }
        done.push(k);
        for x in 0..n {
            if sum[x] < T::one() && done.iter().any(|&j| phi[j][x] != psi[j][x]) {
                implication = false;
            }
        }
    }

    let mut union = VertexSet::empty(n);
    let mut supported = true;
    for (k, b) in balls.iter().enumerate() {
        union = union.union(&space.ball_members(b));
        let double = space.ball_members(&b.scaled(lit(2.0)));
        if double.complement().iter().any(|x| phi[k][x] != T::zero()) {
            supported = false;
        }
    }
    let unity_defect = union.iter().map(|x| (sum[x] - T::one()).abs().to_f64_lossy()).fold(0.0, f64::max);
    Ok(SobolevPartition {
        balls: balls.to_vec(),
        order,
        phi,
        psi,
        p,
        local_finiteness: local_finiteness(space, balls),
        certificate: PartitionCertificate {
            unity_defect,
            prefix_in_unit_interval: prefix_ok,
            prefix_implication: implication,
            supported_in_double: supported,
        },
    })
}

/// Energy decomposition of one `φ_{B_n}`.
#[derive(Clone, Debug, Serialize)]
pub struct BallAudit {
    pub index: usize,
    /// `Γ⟨φ⟩(X) · Ψ(B)/μ(B)`.
    pub c_b: f64,
    /// `Γ⟨ψ⟩(X) · Ψ(B)/μ(B)`.
    pub c_cap: f64,
    /// `Γ⟨φ⟩` on `E = {φ = ψ}`, `F_<` and `F_=`.
    pub mass_e: f64,
    pub mass_f_less: f64,
    pub mass_f_equal: f64,
    /// `Γ⟨φ⟩(int F_=)`, zero by locality.
    pub interior_f_equal: f64,
    /// `Γ⟨φ⟩(int E) - Γ⟨ψ⟩(int E)`, zero since the functions agree there.
    pub interior_e_gap: f64,
    /// `Γ⟨φ⟩(int F_<)^{1/p}` against `Σ_{j∈J_n} Γ⟨ψ_j⟩(X)^{1/p}`.
    pub f_less_root: f64,
    pub neighbor_bound: f64,
    /// Earlier balls whose doubles meet `2B_n`.
    pub neighbors: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionAudit {
    pub balls: Vec<BallAudit>,
    /// Largest per-ball `C_B`.
    pub c_b: f64,
    /// Largest per-ball `C_cap`.
    pub c_cap: f64,
    pub local_finiteness: usize,
}

impl PartitionAudit {
    pub fn passed(&self) -> bool {
        self.balls.iter().all(|b| b.passed)
    }
}

/// Reproduces the three-set energy decomposition for every ball.
pub fn partition_energy_audit<T: Scalar>(
    space: &MetricSpace<T>,
    part: &SobolevPartition<T>,
    psi_scale: &ScaleFunction<T>,
    tol: f64,
) -> Result<PartitionAudit> {
    let g = space.graph();
    let n = space.n();
    let p = part.p;
    let inv_p = T::one() / p;
    let doubles: Vec<VertexSet> = part.balls.iter().map(|b| space.ball_members(&b.scaled(lit(2.0)))).collect();
    let psi_energy: Vec<T> = part
        .psi
        .iter()
        .map(|s| energy_measure(g, s, p).map(|m| m.total()))
        .collect::<Result<_>>()?;
    let mut prefix = vec![T::zero(); n];
    let mut out = Vec::with_capacity(part.balls.len());
    for (pos, &k) in part.order.iter().enumerate() {
        let b = &part.balls[k];
        let gphi = energy_measure(g, &part.phi[k], p)?;
        let gpsi = energy_measure(g, &part.psi[k], p)?;
        let e = VertexSet::from_mask((0..n).map(|x| part.phi[k][x] == part.psi[k][x]).collect());
        let f = e.complement();
        let f_less = VertexSet::from_mask((0..n).map(|x| f.contains(x) && prefix[x] < T::one()).collect());
        let f_equal = f.difference(&f_less);
        let int_e = g.interior(&e);
        let int_fl = g.interior(&f_less);
        let int_fe = g.interior(&f_equal);
        let neighbors: Vec<usize> = part.order[..pos].iter().copied().filter(|&j| doubles[j].intersects(&doubles[k])).collect();
        let bound: T = neighbors.iter().map(|&j| psi_energy[j].powf(inv_p)).sum();
        let root = gphi.on(&int_fl).powf(inv_p);
        let gap = gphi.on(&int_e) - gpsi.on(&int_e);
        let fe = gphi.on(&int_fe);
        let weight = psi_scale.of_ball(b) / space.ball_measure(b);
        let scale = gphi.total().max(gpsi.total()).max(T::min_positive_value());
        let rel_tol = lit::<T>(tol);
        let passed = fe <= rel_tol * scale && gap.abs() <= rel_tol * scale && root <= bound * (T::one() + rel_tol) + rel_tol * scale.powf(inv_p);
        out.push(BallAudit {
            index: k,
            c_b: (gphi.total() * weight).to_f64_lossy(),
            c_cap: (psi_energy[k] * weight).to_f64_lossy(),
            mass_e: gphi.on(&e).to_f64_lossy(),
            mass_f_less: gphi.on(&f_less).to_f64_lossy(),
            mass_f_equal: gphi.on(&f_equal).to_f64_lossy(),
            interior_f_equal: fe.to_f64_lossy(),
            interior_e_gap: gap.to_f64_lossy(),
            f_less_root: root.to_f64_lossy(),
            neighbor_bound: bound.to_f64_lossy(),
            neighbors: neighbors.len(),
            passed,
        });
        for x in 0..n {
            prefix[x] += part.phi[k][x];
        }
    }
    Ok(PartitionAudit {
        c_b: out.iter().map(|a| a.c_b).fold(0.0, f64::max),
        c_cap: out.iter().map(|a| a.c_cap).fold(0.0, f64::max),
        local_finiteness: part.local_finiteness,
        balls: out,
    })
}
