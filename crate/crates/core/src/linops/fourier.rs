use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{ImageDims, LinopError};

/// Residue above which an inverse transform is not considered real.
const REAL_RESIDUE_TOL: f64 = 1e-9;

/// Unitary 2-D spectrum of an image: both directions carry `1/sqrt(rows*cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    dims: ImageDims,
    coeffs: Vec<Complex64>,
}

impl Spectrum2D {
    pub fn new(dims: ImageDims, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), dims.len());
        Self { dims, coeffs }
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.coeffs[self.dims.index(r, c)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|coeff(k) - conj(coeff(-k))|`.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dims;
        let mut worst = 0.0f64;
        for r in 0..d.rows {
            for c in 0..d.cols {
                let (mr, mc) = d.mirror(r, c);
                worst = worst.max((self.get(r, c) - self.get(mr, mc).conj()).norm());
            }
        }
        worst
    }
}

/// Planned unitary 2-D DFT for one image shape.
#[derive(Clone)]
pub struct Dft2 {
    dims: ImageDims,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft2").field("dims", &self.dims).finish()
    }
}

impl Dft2 {
    pub fn new(dims: ImageDims) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims,
            row_fwd: planner.plan_fft_forward(dims.cols),
            row_inv: planner.plan_fft_inverse(dims.cols),
            col_fwd: planner.plan_fft_forward(dims.rows),
            col_inv: planner.plan_fft_inverse(dims.rows),
            scale: 1.0 / (dims.len() as f64).sqrt(),
        }
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn forward(&self, image: &[f64]) -> Result<Spectrum2D, LinopError> {
        self.check(image.len())?;
        let mut buf: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        Ok(Spectrum2D::new(self.dims, buf))
    }

    /// Complex inverse transform.
    pub fn inverse_complex(&self, spec: &Spectrum2D) -> Result<Vec<Complex64>, LinopError> {
        self.check(spec.coeffs.len())?;
        let mut buf = spec.coeffs.clone();
        self.transform(&mut buf, false);
        Ok(buf)
    }

    /// Inverse transform of a spectrum that must come from a real image.
    pub fn inverse(&self, spec: &Spectrum2D) -> Result<Vec<f64>, LinopError> {
        let buf = self.inverse_complex(spec)?;
        let scale = buf.iter().map(|z| z.re.abs()).fold(1.0, f64::max);
        let residue = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if residue > REAL_RESIDUE_TOL * scale {
            return Err(LinopError::SymmetryViolation { residue });
        }
        Ok(buf.into_iter().map(|z| z.re).collect())
    }

    /// In-place transform of a complex buffer; the inverse keeps only the
    /// real part. Used on hot paths where symmetry is known by construction.
    pub(crate) fn inverse_real_part(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut buf, false);
        buf.into_iter().map(|z| z.re).collect()
    }

    fn check(&self, len: usize) -> Result<(), LinopError> {
        if len == self.dims.len() {
            Ok(())
        } else {
            Err(LinopError::DimensionMismatch {
                expected: self.dims.len(),
                got: len,
            })
        }
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let ImageDims { rows, cols } = self.dims;
        let (row_plan, col_plan) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row_plan.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = buf[r * cols + c];
            }
            col_plan.process(&mut column);
            for r in 0..rows {
                buf[r * cols + c] = column[r] * self.scale;
            }
        }
    }
}

/// Unitary DFT of a row-major image.
pub fn dft2(dims: ImageDims, image: &[f64]) -> Result<Spectrum2D, LinopError> {
    Dft2::new(dims).forward(image)
}

/// Inverse unitary DFT, rejecting spectra that are not conjugate symmetric.
pub fn idft2(spec: &Spectrum2D) -> Result<Vec<f64>, LinopError> {
    Dft2::new(spec.dims()).inverse(spec)
}
