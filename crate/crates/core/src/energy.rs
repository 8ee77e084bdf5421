//! Discrete p-energies and their energy measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{VertexSet, WeightedGraph};
use crate::scalar::{lit, Scalar};

/// Rejects exponents outside `(1, ∞)`.
pub fn check_exponent<T: Scalar>(p: T) -> Result<()> {
    if p > T::one() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(p.to_f64_lossy()))
    }
}

/// Per-vertex energy measure `Γ_p⟨f⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyMeasure<T> {
    pub mass: Vec<T>,
    pub p: T,
}

impl<T: Scalar> EnergyMeasure<T> {
    /// Total mass, i.e. `E_p(f)`.
    pub fn total(&self) -> T {
        self.mass.iter().copied().sum()
    }

    /// Mass of a vertex set.
    pub fn on(&self, set: &VertexSet) -> T {
        set.iter().map(|x| self.mass[x]).sum()
    }

    /// `∫ g dΓ` over a vertex set.
    pub fn integrate_on(&self, g: &[T], set: &VertexSet) -> T {
        set.iter().map(|x| self.mass[x] * g[x]).sum()
    }

    /// `∫ g dΓ` over all vertices.
    pub fn integrate(&self, g: &[T]) -> T {
        self.mass.iter().zip(g).map(|(&m, &v)| m * v).sum()
    }
}

/// `w_e |f(u) - f(v)|^p` for every edge.
pub fn edge_energies<T: Scalar>(graph: &WeightedGraph<T>, f: &[T], p: T) -> Vec<T> {
    graph
        .edges()
        .iter()
        .map(|e| e.w * (f[e.u] - f[e.v]).abs().powf(p))
        .collect()
}

/// `Γ_p⟨f⟩(x) = ½ Σ_{y∼x} w_xy |f(x) - f(y)|^p`.
pub fn energy_measure<T: Scalar>(graph: &WeightedGraph<T>, f: &[T], p: T) -> Result<EnergyMeasure<T>> {
    check_exponent(p)?;
    if f.len() != graph.n() {
        return Err(Error::InvalidArgument(format!(
            "function has {} values for {} vertices",
            f.len(),
            graph.n()
        )));
    }
    let half = lit::<T>(0.5);
    let mut mass = vec![T::zero(); graph.n()];
    for (e, en) in graph.edges().iter().zip(edge_energies(graph, f, p)) {
        mass[e.u] += half * en;
        mass[e.v] += half * en;
    }
    Ok(EnergyMeasure { mass, p })
}

/// `E_p(f) = Σ_e w_e |Δ_e f|^p`.
pub fn energy<T: Scalar>(graph: &WeightedGraph<T>, f: &[T], p: T) -> T {
    edge_energies(graph, f, p).into_iter().sum()
}

/// One line of an axiom report.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomEntry {
    pub axiom: &'static str,
    pub checks: usize,
    /// Smallest relative slack observed; non-negative means the property held.
    pub worst_slack: f64,
    pub passed: bool,
}

/// Results of randomized property checks of the energy axioms.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub p: f64,
    pub trials: usize,
    pub tolerance: f64,
    pub entries: Vec<AxiomEntry>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, axiom: &str) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.axiom == axiom)
    }
}

struct Tally {
    axiom: &'static str,
    checks: usize,
    worst: f64,
}

impl Tally {
    fn new(axiom: &'static str) -> Self {
        Self { axiom, checks: 0, worst: f64::INFINITY }
    }

    fn record<T: Scalar>(&mut self, slack: T) {
        self.checks += 1;
        self.worst = self.worst.min(slack.to_f64_lossy());
    }

    fn finish(self, tol: f64) -> AxiomEntry {
        let worst = if self.checks == 0 { 0.0 } else { self.worst };
        AxiomEntry { axiom: self.axiom, checks: self.checks, worst_slack: worst, passed: worst >= -tol }
    }
}

fn normal_vec<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    (0..n).map(|_| lit(rng.sample::<f64, _>(StandardNormal))).collect()
}

fn random_set(rng: &mut ChaCha8Rng, n: usize) -> VertexSet {
    VertexSet::from_mask((0..n).map(|_| rng.random_bool(0.5)).collect())
}

/// A random piecewise-linear map with slopes in `[-1, 1]`.
struct PiecewiseLinear<T> {
    knots: Vec<T>,
    slopes: Vec<T>,
    offset: T,
}

impl<T: Scalar> PiecewiseLinear<T> {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let k = rng.random_range(1..6);
        let mut knots: Vec<T> = (0..k).map(|_| lit(rng.random_range(-2.0..2.0))).collect();
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let slopes = (0..=k).map(|_| lit(rng.random_range(-1.0..=1.0))).collect();
        Self { knots, slopes, offset: lit(rng.random_range(-1.0..1.0)) }
    }

    fn eval(&self, t: T) -> T {
        // integrate the slope from the first knot
        let x0 = self.knots[0];
        let mut v = self.offset;
        if t <= x0 {
            return v + self.slopes[0] * (t - x0);
        }
        let mut prev = x0;
        for (i, &k) in self.knots.iter().enumerate().skip(1) {
            if t <= k {
                return v + self.slopes[i] * (t - prev);
            }
            v += self.slopes[i] * (k - prev);
            prev = k;
        }
        v + self.slopes[self.knots.len()] * (t - prev)
    }
}

fn rel<T: Scalar>(num: T, scale: T) -> T {
    let floor = lit::<T>(1e-300).max(T::min_positive_value());
    num / scale.abs().max(floor)
}

/// Randomized checks of triangle inequality, homogeneity, Lipschitz
/// contraction, interior locality and continuity.
///
/// Slacks are relative to the size of the quantities compared, so a report
/// passes when every worst slack is `>= -tol`.
pub fn axioms_report<T: Scalar>(graph: &WeightedGraph<T>, p: T, trials: usize, seed: u64, tol: f64) -> Result<AxiomReport> {
    check_exponent(p)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = graph.n();
    let inv_p = T::one() / p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triangle = Tally::new("triangle");
    let mut homogeneity = Tally::new("homogeneity");
    let mut contraction = Tally::new("contraction");
    let mut locality = Tally::new("locality");
    let mut continuity = Tally::new("continuity");

    for trial in 0..trials {
        let f: Vec<T> = normal_vec(&mut rng, n);
        let g: Vec<T> = if trial == 0 {
            f.iter().map(|&v| -v).collect()
        } else {
            normal_vec(&mut rng, n)
        };
        let fg: Vec<T> = f.iter().zip(&g).map(|(&a, &b)| a + b).collect();
        let gf = energy_measure(graph, &f, p)?;
        let gg = energy_measure(graph, &g, p)?;
        let gfg = energy_measure(graph, &fg, p)?;
        let tri = |a: &VertexSet| {
            let r = gf.on(a).powf(inv_p) + gg.on(a).powf(inv_p);
            rel(r - gfg.on(a).powf(inv_p), r)
        };
        for x in 0..n {
            triangle.record(tri(&VertexSet::from_members(n, [x])));
        }
        triangle.record(tri(&random_set(&mut rng, n)));
        triangle.record(tri(&VertexSet::full(n)));

        let lambda: T = lit(rng.random_range(-4.0..4.0));
        let lf: Vec<T> = f.iter().map(|&v| lambda * v).collect();
        let glf = energy_measure(graph, &lf, p)?;
        let factor = lambda.abs().powf(p);
        for x in 0..n {
            let want = factor * gf.mass[x];
            homogeneity.record(-rel((glf.mass[x] - want).abs(), want));
        }

        let phi = if trial == 0 {
            PiecewiseLinear { knots: vec![T::zero()], slopes: vec![T::one(), T::one()], offset: T::zero() }
        } else {
            PiecewiseLinear::random(&mut rng)
        };
        let cf: Vec<T> = f.iter().map(|&v| phi.eval(v)).collect();
        let gcf = energy_measure(graph, &cf, p)?;
        for x in 0..n {
            contraction.record(rel(gf.mass[x] - gcf.mass[x], gf.mass[x]));
        }

        let a = random_set(&mut rng, n);
        let closure = graph.inflate(&a);
        let c: T = lit(rng.random_range(-3.0..3.0));
        let loc: Vec<T> = (0..n).map(|x| if closure.contains(x) { c } else { f[x] }).collect();
        let gl = energy_measure(graph, &loc, p)?;
        locality.record(-rel(gl.on(&a), gl.total().max(T::one())));

        let delta: T = lit(1e-7);
        let pert: Vec<T> = f.iter().map(|&v| v + delta * lit::<T>(rng.random_range(-1.0..1.0))).collect();
        let e0 = gf.total();
        let e1 = energy(graph, &pert, p);
        let two = lit::<T>(2.0);
        let bound: T = graph
            .edges()
            .iter()
            .map(|e| e.w * p * ((f[e.u] - f[e.v]).abs() + two * delta).powf(p - T::one()) * two * delta)
            .sum();
        continuity.record(rel(bound - (e1 - e0).abs(), e0.max(bound)));
    }

    Ok(AxiomReport {
        p: p.to_f64_lossy(),
        trials,
        tolerance: tol,
        entries: vec![
            triangle.finish(tol),
            homogeneity.finish(tol),
            contraction.finish(tol),
            locality.finish(tol),
            continuity.finish(tol),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn path3() -> WeightedGraph<f64> {
        let e = |u, v| Edge { u, v, w: 1.0, len: 1.0 };
        WeightedGraph::new(vec![1.0; 3], vec![e(0, 1), e(1, 2)]).unwrap()
    }

    #[test]
    fn hand_computed_measure() {
        let m = energy_measure(&path3(), &[0.0, 1.0, 3.0], 2.0).unwrap();
        assert_eq!(m.mass, vec![0.5, 2.5, 2.0]);
        assert_eq!(m.total(), 5.0);
    }

    #[test]
    fn constants_have_no_energy() {
        let m = energy_measure(&path3(), &[4.0; 3], 1.5).unwrap();
        assert!(m.mass.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exponent_validated() {
        let err = energy_measure(&path3(), &[0.0; 3], 1.0).unwrap_err();
        assert!(err.to_string().contains("exponent out of range"));
    }

    #[test]
    fn piecewise_map_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = PiecewiseLinear::<f64>::random(&mut rng);
            for &k in &g.knots {
                assert!((g.eval(k - 1e-12) - g.eval(k + 1e-12)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn report_passes_on_path() {
        let r = axioms_report(&path3(), 1.5, 20, 1, 1e-9).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert_eq!(r.entries.len(), 5);
    }
}
