use super::Operator;
use crate::vector;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has the wrong length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| vector::dot(self.row(i), x)).collect()
    }

    /// `A^T y`
    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        self.transpose_add(y, 1.0, &mut out);
        out
    }

    fn transpose_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                vector::axpy(alpha * yi, self.row(i), out);
            }
        }
    }
}

impl Operator for DenseMatrix {
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = vector::dot(self.row(i), x);
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.transpose_add(y, 1.0, out);
    }

    fn adjoint_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        self.transpose_add(y, alpha, out);
    }
}
