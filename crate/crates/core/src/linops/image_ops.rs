use super::{ImageDims, LinopError, Operator};

/// Periodic convolution with a normalized constant (box) kernel.
#[derive(Debug, Clone)]
pub struct Convolution {
    dims: ImageDims,
    // tap offsets are lo..=hi along each axis
    row_lo: isize,
    row_hi: isize,
    col_lo: isize,
    col_hi: isize,
    weight: f64,
}

impl Convolution {
    pub fn new(kernel_rows: usize, kernel_cols: usize, dims: ImageDims) -> Result<Self, LinopError> {
        if kernel_rows == 0
            || kernel_cols == 0
            || kernel_rows > dims.rows
            || kernel_cols > dims.cols
        {
            return Err(LinopError::KernelTooLarge {
                kernel_rows,
                kernel_cols,
                rows: dims.rows,
                cols: dims.cols,
            });
        }
        let (row_lo, row_hi) = centered_taps(kernel_rows);
        let (col_lo, col_hi) = centered_taps(kernel_cols);
        Ok(Self {
            dims,
            row_lo,
            row_hi,
            col_lo,
            col_hi,
            weight: 1.0 / (kernel_rows * kernel_cols) as f64,
        })
    }

    // y[i,j] = w * sum_{a,b} x[i - sign*a, j - sign*b]; sign = 1 convolves,
    // sign = -1 correlates (the adjoint).
    fn filter(&self, x: &[f64], out: &mut [f64], sign: isize) {
        let ImageDims { rows, cols } = self.dims;
        let mut tmp = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &x[r * cols..(r + 1) * cols];
            for c in 0..cols {
                let mut acc = 0.0;
                for b in self.col_lo..=self.col_hi {
                    acc += row[wrap(c as isize - sign * b, cols)];
                }
                tmp[r * cols + c] = acc;
            }
        }
        for r in 0..rows {
            let dst = &mut out[r * cols..(r + 1) * cols];
            dst.fill(0.0);
            for a in self.row_lo..=self.row_hi {
                let src = wrap(r as isize - sign * a, rows);
                for (d, s) in dst.iter_mut().zip(&tmp[src * cols..(src + 1) * cols]) {
                    *d += s;
                }
            }
            dst.iter_mut().for_each(|v| *v *= self.weight);
        }
    }
}

impl Operator for Convolution {
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.filter(x, out, 1);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.filter(y, out, -1);
    }
}

/// Periodic first differences, horizontal block followed by vertical block,
/// multiplied by `scale`.
#[derive(Debug, Clone)]
pub struct FiniteDifference {
    dims: ImageDims,
    scale: f64,
}

impl FiniteDifference {
    pub fn new(dims: ImageDims, scale: f64) -> Result<Self, LinopError> {
        if dims.rows < 2 || dims.cols < 2 {
            return Err(LinopError::DegenerateDims {
                rows: dims.rows,
                cols: dims.cols,
            });
        }
        Ok(Self { dims, scale })
    }
}

impl Operator for FiniteDifference {
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let ImageDims { rows, cols } = self.dims;
        let n = rows * cols;
        let (h, v) = out.split_at_mut(n);
        for r in 0..rows {
            let down = (r + 1) % rows;
            for c in 0..cols {
                let right = (c + 1) % cols;
                let here = x[r * cols + c];
                h[r * cols + c] = self.scale * (x[r * cols + right] - here);
                v[r * cols + c] = self.scale * (x[down * cols + c] - here);
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let ImageDims { rows, cols } = self.dims;
        let n = rows * cols;
        let (h, v) = y.split_at(n);
        for r in 0..rows {
            let up = (r + rows - 1) % rows;
            for c in 0..cols {
                let left = (c + cols - 1) % cols;
                let k = r * cols + c;
                out[k] = self.scale
                    * ((h[r * cols + left] - h[k]) + (v[up * cols + c] - v[k]));
            }
        }
    }
}

fn centered_taps(size: usize) -> (isize, isize) {
    let lo = -(((size - 1) / 2) as isize);
    (lo, lo + size as isize - 1)
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}
