//! Bounded linear operators with adjoints and norm bounds.
//!
//! Every concrete operator used by the experiments lives here: periodic box
//! blurs, periodic finite differences, contiguous coordinate selectors and
//! dense matrices. Image operators act on row-major vectors.

mod dense;
mod fourier;
mod image_ops;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::vector;

pub use dense::DenseMatrix;
pub use fourier::{dft2, idft2, Dft2, Spectrum2D};
pub use image_ops::{Convolution, FiniteDifference};

/// Iteration cap used by [`operator_norm_estimate`].
pub const POWER_ITERATION_CAP: usize = 1000;
/// Default relative tolerance for [`operator_norm_estimate`].
pub const POWER_ITERATION_TOL: f64 = 1e-6;
const POWER_ITERATION_SEED: u64 = 0x5eed_0f_c0ffee;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel {kernel_rows}x{kernel_cols} does not fit image {rows}x{cols}")]
    KernelTooLarge {
        kernel_rows: usize,
        kernel_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("image dimensions {rows}x{cols} are degenerate for this operator")]
    DegenerateDims { rows: usize, cols: usize },
    #[error("coordinate block [{start}, {start}+{length}) exceeds ambient dimension {ambient}")]
    BlockOutOfRange {
        start: usize,
        length: usize,
        ambient: usize,
    },
    #[error("spectrum is not conjugate symmetric (imaginary residue {residue:e})")]
    SymmetryViolation { residue: f64 },
}

/// Shape of a row-major grayscale image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageDims {
    pub rows: usize,
    pub cols: usize,
}

impl ImageDims {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub const fn square(side: usize) -> Self {
        Self::new(side, side)
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    /// Frequency (or pixel) paired with `(r, c)` by `k -> -k mod dims`.
    #[inline]
    pub const fn mirror(&self, r: usize, c: usize) -> (usize, usize) {
        ((self.rows - r) % self.rows, (self.cols - c) % self.cols)
    }
}

/// The action of a linear operator. Implementations write into
/// preallocated buffers of the right size.
pub trait Operator: Send + Sync {
    fn forward_into(&self, x: &[f64], out: &mut [f64]);
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    /// `out += alpha * adjoint(y)`.
    fn adjoint_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.adjoint_into(y, &mut tmp);
        vector::axpy(alpha, &tmp, out);
    }
}

/// A bounded linear map `R^in_dim -> R^out_dim` with its adjoint.
///
/// `norm_bound`, when present, is a certified upper bound on the operator
/// norm. Maps built from arbitrary closures or dense matrices carry no bound
/// unless the caller supplies one.
#[derive(Clone)]
pub struct LinearMap {
    op: Arc<dyn Operator>,
    in_dim: usize,
    out_dim: usize,
    norm_bound: Option<f64>,
    label: String,
}

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearMap")
            .field("label", &self.label)
            .field("in_dim", &self.in_dim)
            .field("out_dim", &self.out_dim)
            .field("norm_bound", &self.norm_bound)
            .finish()
    }
}

impl LinearMap {
    pub fn new(
        op: impl Operator + 'static,
        in_dim: usize,
        out_dim: usize,
        norm_bound: Option<f64>,
        label: impl Into<String>,
    ) -> Self {
        Self {
            op: Arc::new(op),
            in_dim,
            out_dim,
            norm_bound,
            label: label.into(),
        }
    }

    /// Builds a map from a pair of closures.
    pub fn from_fns<F, A>(
        in_dim: usize,
        out_dim: usize,
        forward: F,
        adjoint: A,
        norm_bound: Option<f64>,
        label: impl Into<String>,
    ) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        A: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::new(
            FnOperator { forward, adjoint },
            in_dim,
            out_dim,
            norm_bound,
            label,
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Identity, n, n, Some(1.0), "Id")
    }

    /// `s * map`.
    pub fn scaled(map: &LinearMap, s: f64) -> Self {
        Self {
            op: Arc::new(Scaled {
                inner: map.op.clone(),
                factor: s,
                out_dim: map.out_dim,
            }),
            in_dim: map.in_dim,
            out_dim: map.out_dim,
            norm_bound: map.norm_bound.map(|b| b * s.abs()),
            label: format!("{s}*{}", map.label),
        }
    }

    /// Periodic convolution with the normalized constant kernel of the given
    /// size. The kernel is centered, with the extra tap on the positive side
    /// for even sizes.
    pub fn convolution(
        kernel_rows: usize,
        kernel_cols: usize,
        dims: ImageDims,
    ) -> Result<Self, LinopError> {
        let conv = Convolution::new(kernel_rows, kernel_cols, dims)?;
        Ok(Self::new(
            conv,
            dims.len(),
            dims.len(),
            Some(1.0),
            format!("blur{kernel_rows}x{kernel_cols}"),
        ))
    }

    /// The scaled periodic difference map `D / sqrt(8)`, stacking horizontal
    /// then vertical differences.
    pub fn finite_difference(dims: ImageDims) -> Result<Self, LinopError> {
        let d = FiniteDifference::new(dims, 1.0 / 8f64.sqrt())?;
        Ok(Self::new(d, dims.len(), 2 * dims.len(), Some(1.0), "D/sqrt8"))
    }

    /// The unscaled periodic difference map `D`, with `||D|| <= sqrt(8)`.
    pub fn finite_difference_unscaled(dims: ImageDims) -> Result<Self, LinopError> {
        let d = FiniteDifference::new(dims, 1.0)?;
        Ok(Self::new(
            d,
            dims.len(),
            2 * dims.len(),
            Some(8f64.sqrt()),
            "D",
        ))
    }

    /// Extracts coordinates `start..start + length` (zero-based) of a vector
    /// in `R^ambient`. The adjoint zero-pads.
    pub fn coordinate_selector(
        start: usize,
        length: usize,
        ambient: usize,
    ) -> Result<Self, LinopError> {
        if length == 0 || start + length > ambient {
            return Err(LinopError::BlockOutOfRange {
                start,
                length,
                ambient,
            });
        }
        Ok(Self::new(
            Selector { start, length },
            ambient,
            length,
            Some(1.0),
            format!("select[{start}..{})", start + length),
        ))
    }

    /// Wraps a dense matrix. No norm bound is attached; supply one with
    /// [`LinearMap::with_norm_bound`] if known.
    pub fn dense(matrix: DenseMatrix) -> Self {
        let (rows, cols) = (matrix.rows(), matrix.cols());
        Self::new(matrix, cols, rows, None, format!("dense{rows}x{cols}"))
    }

    pub fn with_norm_bound(mut self, bound: f64) -> Self {
        self.norm_bound = Some(bound);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn norm_bound(&self) -> Option<f64> {
        self.norm_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinopError> {
        check_dim(self.in_dim, x.len())?;
        Ok(self.forward(x))
    }

    pub fn adjoint_apply(&self, y: &[f64]) -> Result<Vec<f64>, LinopError> {
        check_dim(self.out_dim, y.len())?;
        Ok(self.adjoint(y))
    }

    /// Unchecked forward application; callers guarantee `x.len() == in_dim`.
    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = vec![0.0; self.out_dim];
        self.op.forward_into(x, &mut out);
        out
    }

    pub(crate) fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.out_dim);
        let mut out = vec![0.0; self.in_dim];
        self.op.adjoint_into(y, &mut out);
        out
    }

    /// `out += alpha * adjoint(y)`, unchecked.
    pub(crate) fn adjoint_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.out_dim);
        debug_assert_eq!(out.len(), self.in_dim);
        self.op.adjoint_add(y, alpha, out);
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), LinopError> {
    if expected == got {
        Ok(())
    } else {
        Err(LinopError::DimensionMismatch { expected, got })
    }
}

/// Estimates the largest singular value of `op` by power iteration on
/// `op* op`, from a fixed pseudo-random start vector.
///
/// Stops when successive estimates of `||op||^2` agree to relative `tol`, or
/// after [`POWER_ITERATION_CAP`] iterations. The zero operator yields 0.
pub fn operator_norm_estimate(op: &LinearMap, tol: f64) -> f64 {
    let n = op.in_dim();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = vector::norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let w = op.adjoint(&op.forward(&v));
        let nw = vector::norm(&w);
        if nw == 0.0 || !nw.is_finite() {
            return 0.0;
        }
        let done = (nw - lambda).abs() <= tol * nw;
        lambda = nw;
        v = vector::scale(&w, 1.0 / nw);
        if done {
            break;
        }
    }
    // Rayleigh quotient of the final unit vector refines the estimate.
    let rq = vector::norm(&op.forward(&v)).powi(2);
    lambda.max(rq).sqrt()
}

struct Identity;

impl Operator for Identity {
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }

    fn adjoint_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        vector::axpy(alpha, y, out);
    }
}

struct Scaled {
    inner: Arc<dyn Operator>,
    factor: f64,
    out_dim: usize,
}

impl Operator for Scaled {
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.out_dim);
        self.inner.forward_into(x, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.inner.adjoint_into(y, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }

    fn adjoint_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        self.inner.adjoint_add(y, alpha * self.factor, out);
    }
}

struct Selector {
    start: usize,
    length: usize,
}

impl Operator for Selector {
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&x[self.start..self.start + self.length]);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[self.start..self.start + self.length].copy_from_slice(y);
    }

    fn adjoint_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        vector::axpy(alpha, y, &mut out[self.start..self.start + self.length]);
    }
}

struct FnOperator<F, A> {
    forward: F,
    adjoint: A,
}

impl<F, A> Operator for FnOperator<F, A>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
    A: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&(self.forward)(x));
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&(self.adjoint)(y));
    }
}
