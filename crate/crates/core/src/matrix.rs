//! Dense 2-D `f64` matrix — the carrier for single-channel images, wavelet
//! sub-bands, and metric windows.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-major `[h][w]` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(h: usize, w: usize) -> Self {
        Matrix {
            h,
            w,
            data: vec![0.0; h * w],
        }
    }

    pub fn filled(h: usize, w: usize, value: f64) -> Self {
        Matrix {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::dimension(format!(
                "matrix data length {} does not match extents {h}×{w}",
                data.len()
            )));
        }
        Ok(Matrix { h, w, data })
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                m.data[r * w + c] = f(r, c);
            }
        }
        m
    }

    pub fn h(&self) -> usize {
        self.h
    }
    pub fn w(&self) -> usize {
        self.w
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.w + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.w + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.w..(r + 1) * self.w]
    }

    /// Copies one `[h, w]` channel plane out of a rank-4 tensor.
    pub fn from_tensor_channel(t: &Tensor, n: usize, c: usize) -> Self {
        let (h, w) = (t.h(), t.w());
        let base = t.offset(n, c, 0, 0);
        Matrix {
            h,
            w,
            data: t.data()[base..base + h * w].to_vec(),
        }
    }

    /// Writes this matrix into one channel plane of a rank-4 tensor.
    pub fn copy_into_channel(&self, t: &mut Tensor, n: usize, c: usize) {
        assert_eq!((self.h, self.w), (t.h(), t.w()), "channel extent mismatch");
        let base = t.offset(n, c, 0, 0);
        let len = self.data.len();
        t.data_mut()[base..base + len].copy_from_slice(&self.data);
    }

    /// Σ x² over all elements.
    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Arithmetic mean of all elements.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
