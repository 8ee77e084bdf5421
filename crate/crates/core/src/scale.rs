//! Regular scale functions `Ψ(x, r)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Ball, MetricSpace};
use crate::scalar::{lit, Scalar};

type Evaluator<T> = Arc<dyn Fn(usize, T) -> T + Send + Sync>;

/// How `Ψ` is evaluated.
#[derive(Clone)]
pub enum ScaleKind<T> {
    /// `r^β`.
    Power { beta: T },
    /// Log-log interpolation of a table in `r`, the same at every center.
    Tabulated { radii: Vec<T>, values: Vec<T> },
    Custom(Evaluator<T>),
}

impl<T: fmt::Debug> fmt::Debug for ScaleKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power { beta } => write!(f, "Power {{ beta: {beta:?} }}"),
            Self::Tabulated { radii, .. } => write!(f, "Tabulated({} points)", radii.len()),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// `Ψ` together with its declared regularity exponents and constant.
#[derive(Clone, Debug)]
pub struct ScaleFunction<T> {
    pub kind: ScaleKind<T>,
    pub beta_minus: T,
    pub beta_plus: T,
    pub c_psi: T,
    /// Overall multiplier applied to every value.
    pub factor: T,
}

/// On-disk form of a tabulated scale function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaleTable {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl<T: Scalar> ScaleFunction<T> {
    pub fn power(beta: T) -> Self {
        Self { kind: ScaleKind::Power { beta }, beta_minus: beta, beta_plus: beta, c_psi: T::one(), factor: T::one() }
    }

    /// Table of `(r, Ψ(r))` pairs with strictly increasing radii.
    pub fn tabulated(radii: Vec<T>, values: Vec<T>) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return Err(Error::InvalidArgument("scale table needs at least two (radius, value) pairs".into()));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] <= T::zero() {
            return Err(Error::InvalidArgument("scale table radii must be positive and increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > T::zero())) {
            return Err(Error::InvalidArgument(format!("scale table value {v} is not positive")));
        }
        // declared exponents: extreme log-slopes of the table
        let slopes: Vec<T> = radii
            .windows(2)
            .zip(values.windows(2))
            .map(|(r, v)| (v[1] / v[0]).ln() / (r[1] / r[0]).ln())
            .collect();
        let bm = slopes.iter().copied().fold(T::infinity(), T::min);
        let bp = slopes.iter().copied().fold(T::neg_infinity(), T::max);
        Ok(Self { kind: ScaleKind::Tabulated { radii, values }, beta_minus: bm, beta_plus: bp, c_psi: T::one(), factor: T::one() })
    }

    pub fn from_table(table: &ScaleTable) -> Result<Self> {
        Self::tabulated(table.radii.iter().map(|&r| lit(r)).collect(), table.values.iter().map(|&v| lit(v)).collect())
    }

    pub fn custom(f: impl Fn(usize, T) -> T + Send + Sync + 'static, beta_minus: T, beta_plus: T, c_psi: T) -> Self {
        Self { kind: ScaleKind::Custom(Arc::new(f)), beta_minus, beta_plus, c_psi, factor: T::one() }
    }

    /// Same function multiplied by `t`.
    pub fn scaled(&self, t: T) -> Self {
        let mut s = self.clone();
        s.factor *= t;
        s
    }

    /// `β` of a power law, if this is one.
    pub fn beta(&self) -> Option<T> {
        match &self.kind {
            ScaleKind::Power { beta } => Some(*beta),
            _ => None,
        }
    }

    pub fn eval(&self, x: usize, r: T) -> T {
        let v = match &self.kind {
            ScaleKind::Power { beta } => r.powf(*beta),
            ScaleKind::Tabulated { radii, values } => interpolate(radii, values, r),
            ScaleKind::Custom(f) => f(x, r),
        };
        v * self.factor
    }

    /// `Ψ(B) = Ψ(x_B, rad B)`.
    pub fn of_ball(&self, b: &Ball<T>) -> T {
        self.eval(b.center, b.radius)
    }

    /// Like [`eval`](Self::eval) but rejects non-positive values.
    pub fn eval_checked(&self, x: usize, r: T) -> Result<T> {
        let v = self.eval(x, r);
        if v > T::zero() && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonPositiveScale { vertex: x, radius: r.to_f64_lossy(), value: v.to_f64_lossy() })
        }
    }
}

fn interpolate<T: Scalar>(radii: &[T], values: &[T], r: T) -> T {
    if r <= T::zero() {
        return T::zero();
    }
    let k = match radii.iter().position(|&q| q >= r) {
        Some(0) => 0,
        Some(k) => k - 1,
        None => radii.len() - 2,
    };
    let (r0, r1, v0, v1) = (radii[k], radii[k + 1], values[k], values[k + 1]);
    let slope = (v1 / v0).ln() / (r1 / r0).ln();
    v0 * (r / r0).powf(slope)
}

/// Outcome of sampling the two-sided regularity bound.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub samples: usize,
    /// Largest `log` excess of `Ψ(x,r)/Ψ(y,s)` over either bound, using the
    /// declared constant; `<= 0` means every sample passed.
    pub worst_log_violation: f64,
    /// Smallest constant for which every sample passes, with the declared
    /// exponents.
    pub minimal_c_psi: f64,
}

/// Evaluates `C⁻¹((s∨R)/r)^{β+}(s/(r∨R))^{β-} <= Ψ(x,r)/Ψ(y,s) <= C(r/(r∨R))^{β-}((r∨R)/s)^{β+}`
/// with `R = d(x, y)` on every sample `(x, r, y, s)`.
pub fn check_regularity<T: Scalar>(
    psi: &ScaleFunction<T>,
    space: &MetricSpace<T>,
    samples: &[(usize, T, usize, T)],
) -> Result<RegularityReport> {
    let cap = lit::<T>(2.0) * space.diameter();
    let (bm, bp) = (psi.beta_minus, psi.beta_plus);
    let log_c = psi.c_psi.ln();
    let mut worst = f64::NEG_INFINITY;
    let mut needed = f64::NEG_INFINITY;
    for &(x, r, y, s) in samples {
        if !(s > T::zero() && s <= r && r <= cap) {
            return Err(Error::InvalidArgument(format!(
                "regularity sample needs 0 < s <= r <= 2 diam, got s = {s}, r = {r}"
            )));
        }
        let big_r = space.d(x, y);
        let ratio = psi.eval_checked(x, r)?.ln() - psi.eval_checked(y, s)?.ln();
        let lower = bp * (s.max(big_r) / r).ln() + bm * (s / r.max(big_r)).ln();
        let upper = bm * (r / r.max(big_r)).ln() + bp * (r.max(big_r) / s).ln();
        let excess = (ratio - upper).max(lower - ratio);
        worst = worst.max((excess - log_c).to_f64_lossy());
        needed = needed.max(excess.to_f64_lossy());
    }
    Ok(RegularityReport {
        samples: samples.len(),
        worst_log_violation: if samples.is_empty() { 0.0 } else { worst },
        minimal_c_psi: if samples.is_empty() { 0.0 } else { needed.exp() },
    })
}

/// All `(x, r, y, s)` with `x, y` among `centers` and `s <= r` drawn from
/// each center's radius grid.
pub fn regularity_samples<T: Scalar>(space: &MetricSpace<T>, centers: &[usize]) -> Vec<(usize, T, usize, T)> {
    let mut out = Vec::new();
    for &x in centers {
        let rx = space.radius_grid(x);
        for &y in centers {
            let ry = space.radius_grid(y);
            for &r in &rx {
                for &s in ry.iter().filter(|&&s| s <= r) {
                    out.push((x, r, y, s));
                }
            }
        }
    }
    out
}

/// `Ψ(x, ·)` is non-decreasing along `radii` (assumed sorted).
pub fn is_monotone<T: Scalar>(psi: &ScaleFunction<T>, x: usize, radii: &[T]) -> bool {
    radii.windows(2).all(|w| psi.eval(x, w[0]) <= psi.eval(x, w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, WeightedGraph};

    fn path_space(n: usize) -> MetricSpace<f64> {
        let edges = (0..n).map(|i| Edge { u: i, v: i + 1, w: 1.0, len: 1.0 }).collect();
        MetricSpace::new(WeightedGraph::new(vec![1.0; n + 1], edges).unwrap()).unwrap()
    }

    #[test]
    fn power_law_is_regular() {
        let s = path_space(6);
        let psi = ScaleFunction::power(2.0);
        let samples = regularity_samples(&s, &[0, 3, 6]);
        let rep = check_regularity(&psi, &s, &samples).unwrap();
        assert!(rep.worst_log_violation <= 1e-12, "{rep:?}");
        assert!(rep.minimal_c_psi <= 1.0 + 1e-12);
    }

    #[test]
    fn same_center_ratio_is_exact() {
        let s = path_space(4);
        let psi = ScaleFunction::power(2.5);
        let rep = check_regularity(&psi, &s, &[(1, 3.0, 1, 0.5)]).unwrap();
        // upper bound is attained: (r/s)^β with C = 1
        assert!((rep.minimal_c_psi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_sample() {
        let s = path_space(2);
        let psi = ScaleFunction::power(2.0);
        assert!(check_regularity(&psi, &s, &[(0, 1.0, 1, 2.0)]).is_err());
        assert!(check_regularity(&psi, &s, &[(0, 5.0, 1, 2.0)]).is_err());
    }

    #[test]
    fn nonpositive_values_rejected() {
        let s = path_space(2);
        let psi = ScaleFunction::custom(|_, _| 0.0, 1.0, 1.0, 1.0);
        let err = check_regularity(&psi, &s, &[(0, 1.0, 1, 0.5)]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveScale { .. }));
    }

    #[test]
    fn table_interpolates_power_law() {
        let radii = vec![0.5, 1.0, 2.0, 4.0];
        let values: Vec<f64> = radii.iter().map(|r: &f64| r.powf(2.0)).collect();
        let psi = ScaleFunction::tabulated(radii, values).unwrap();
        assert!((psi.eval(0, 3.0) - 9.0).abs() < 1e-12);
        assert!((psi.eval(0, 8.0) - 64.0).abs() < 1e-10);
        assert!((psi.beta_minus - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_power() {
        let psi = ScaleFunction::power(1.5);
        assert!(is_monotone(&psi, 0, &[0.5, 1.0, 2.0]));
    }
}
