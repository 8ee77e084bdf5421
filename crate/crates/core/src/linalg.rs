//! Small dense and matrix-free linear algebra used by the solvers.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quad(&self, x: &[T]) -> T {
        self.mul_vec(x).iter().zip(x).map(|(&a, &b)| a * b).sum()
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky<T: Scalar>(a: &Dense<T>) -> Result<Dense<T>> {
    let n = a.dim();
    let mut l = Dense::zeros(n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > T::zero()) {
            return Err(Error::InvalidArgument(format!("matrix is not positive definite at pivot {j}")));
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

/// Solves `L y = b`.
pub fn solve_lower<T: Scalar>(l: &Dense<T>, b: &[T]) -> Vec<T> {
    let n = l.dim();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// Solves `Lᵀ x = y`.
pub fn solve_upper_t<T: Scalar>(l: &Dense<T>, y: &[T]) -> Vec<T> {
    let n = l.dim();
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as columns (`vecs[k]` is the k-th eigenvector).
pub fn symmetric_eigen<T: Scalar>(a: &Dense<T>) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = Dense::zeros(n);
    for i in 0..n {
        v.set(i, i, T::one());
    }
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += m.get(i, i) * m.get(i, i);
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for pi in 0..n {
            for q in (pi + 1)..n {
                let apq = m.get(pi, q);
                if apq == T::zero() {
                    continue;
                }
                let app = m.get(pi, pi);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (lit::<T>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, pi);
                    let mkq = m.get(k, q);
                    m.set(k, pi, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(pi, k);
                    let mqk = m.get(q, k);
                    m.set(pi, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, pi);
                    let vkq = v.get(k, q);
                    v.set(k, pi, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let vals = order.iter().map(|&i| m.get(i, i)).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|k| v.get(k, i)).collect()).collect();
    (vals, vecs)
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
///
/// `x` holds the initial guess on entry and the solution on exit.
pub fn pcg<T: Scalar>(
    apply: impl Fn(&[T], &mut [T]),
    diag: &[T],
    b: &[T],
    x: &mut [T],
    rel_tol: T,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let dot = |a: &[T], c: &[T]| -> T { a.iter().zip(c).map(|(&u, &v)| u * v).sum() };
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return CgOutcome { iterations: 0, relative_residual: 0.0 };
    }
    let mut ax = vec![T::zero(); n];
    apply(x, &mut ax);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut z: Vec<T> = r.iter().zip(diag).map(|(&ri, &di)| ri / di).collect();
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut ad = vec![T::zero(); n];
    let mut it = 0;
    let mut res = dot(&r, &r).sqrt() / bnorm;
    while it < max_iter && res > rel_tol {
        apply(&d, &mut ad);
        let dad = dot(&d, &ad);
        if !(dad > T::zero()) {
            break;
        }
        let alpha = rz / dad;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        it += 1;
        res = dot(&r, &r).sqrt() / bnorm;
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    CgOutcome { iterations: it, relative_residual: res.to_f64_lossy() }
}
