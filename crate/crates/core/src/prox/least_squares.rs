use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use super::ProxFunction;
use crate::linops::DenseMatrix;
use crate::vector;

/// `f(x) = ||A x - z||^2 / 2`.
///
/// The prox `(I + gamma A^T A)^{-1} (x + gamma A^T z)` uses an explicit
/// inverse, factored once per distinct `gamma` and cached.
pub struct LeastSquares {
    a: DenseMatrix,
    z: Vec<f64>,
    atz: Vec<f64>,
    // (gamma, row-major inverse of I + gamma A^T A)
    resolvent: Mutex<Option<(f64, Arc<Vec<f64>>)>>,
}

impl std::fmt::Debug for LeastSquares {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LeastSquares")
            .field("rows", &self.a.rows())
            .field("cols", &self.a.cols())
            .finish()
    }
}

impl LeastSquares {
    pub fn new(a: DenseMatrix, z: Vec<f64>) -> Self {
        assert_eq!(a.rows(), z.len(), "observation length must match A");
        let atz = a.matvec_transpose(&z);
        Self {
            a,
            z,
            atz,
            resolvent: Mutex::new(None),
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn observation(&self) -> &[f64] {
        &self.z
    }

    /// `A^T (A x - z)`
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = vector::sub(&self.a.matvec(x), &self.z);
        self.a.matvec_transpose(&r)
    }

    fn resolvent(&self, gamma: f64) -> Arc<Vec<f64>> {
        let mut guard = self.resolvent.lock().expect("resolvent cache poisoned");
        if let Some((g, inv)) = guard.as_ref() {
            if *g == gamma {
                return inv.clone();
            }
        }
        let n = self.a.cols();
        let a = DMatrix::from_row_slice(self.a.rows(), n, self.a.data());
        let mut k = a.tr_mul(&a);
        k *= gamma;
        for i in 0..n {
            k[(i, i)] += 1.0;
        }
        let inv = k
            .cholesky()
            .expect("I + gamma A^T A is positive definite")
            .inverse();
        // symmetric, so column-major storage doubles as row-major
        let inv = Arc::new(inv.as_slice().to_vec());
        *guard = Some((gamma, inv.clone()));
        inv
    }
}

impl ProxFunction for LeastSquares {
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        let inv = self.resolvent(gamma);
        let rhs: Vec<f64> = x.iter().zip(&self.atz).map(|(v, b)| v + gamma * b).collect();
        inv.chunks_exact(x.len())
            .map(|row| vector::dot(row, &rhs))
            .collect()
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(0.5 * vector::distance(&self.a.matvec(x), &self.z).powi(2))
    }

    fn label(&self) -> String {
        "0.5*||A. - z||^2".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prox_satisfies_optimality() {
        let a = DenseMatrix::from_row_major(2, 3, vec![1.0, 0.5, 0.0, -0.3, 0.2, 0.9]);
        let f = LeastSquares::new(a, vec![1.0, -2.0]);
        let x = [0.4, -0.1, 2.0];
        for gamma in [0.3, 1.7] {
            let p = f.prox(&x, gamma);
            // gamma * grad f(p) + p - x = 0
            let g = f.gradient(&p);
            for i in 0..3 {
                assert!((gamma * g[i] + p[i] - x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 0.0, 1.0]);
        let f = LeastSquares::new(a, vec![0.5, 1.0]);
        let x = [0.3, -0.7];
        let g = f.gradient(&x);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6);
        }
    }
}
