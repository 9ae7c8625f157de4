//! Dense rank-4 `[n, c, h, w]` tensors and the small fixed set of operations
//! the networks need, each paired with an exact analytic backward pass.
//!
//! Conventions, fixed here once:
//! - storage is row-major `[n][c][h][w]` (`w` fastest) in `f64`;
//! - `conv2d` is cross-correlation (no kernel flip);
//! - no broadcasting — every shape adaptation is explicit;
//! - every public operation leaves only finite values behind, or errors.

use crate::error::{Error, Result};
use crate::par;

/// Dense rank-4 array with an optional same-shape gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    /// All-zero tensor of the given shape.
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.iter().product()],
            grad: None,
        }
    }

    /// Tensor filled with a constant.
    pub fn filled(shape: [usize; 4], value: f64) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.iter().product()],
            grad: None,
        }
    }

    /// Wraps an existing buffer; the length must match the shape product.
    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::dimension(format!(
                "data length {} does not match shape {:?} (= {} elements)",
                data.len(),
                shape,
                expect
            )));
        }
        let t = Tensor {
            shape,
            data,
            grad: None,
        };
        t.check_finite("from_vec")?;
        Ok(t)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }
    pub fn n(&self) -> usize {
        self.shape[0]
    }
    pub fn c(&self) -> usize {
        self.shape[1]
    }
    pub fn h(&self) -> usize {
        self.shape[2]
    }
    pub fn w(&self) -> usize {
        self.shape[3]
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

    /// Flat offset of `[n][c][h][w]`.
    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.offset(n, c, h, w)]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, h: usize, w: usize) -> &mut f64 {
        let i = self.offset(n, c, h, w);
        &mut self.data[i]
    }

    /// Allocates the gradient buffer (zeroed) if absent.
    pub fn ensure_grad(&mut self) {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Mutable gradient buffer, allocating it on first use.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        self.ensure_grad();
        self.grad.as_deref_mut().unwrap()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_deref_mut() {
            g.fill(0.0);
        }
    }

    /// Simultaneous mutable access to values and gradient (allocating the
    /// gradient buffer on first use) — the parameter-visitor building block.
    pub fn value_and_grad_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        (&mut self.data, self.grad.as_deref_mut().unwrap())
    }

    /// Errors with the first offending index if any value is NaN/Inf.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        check_finite_slice(&self.data, context)
    }

    /// Σ x² over all elements (fixed sequential order; used by energy tests).
    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Element-wise sum; shapes must match exactly.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    /// Element-wise difference; shapes must match exactly.
    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Hadamard product; shapes must match exactly.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    /// Multiplies every element by a scalar.
    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        let out = Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| v * factor).collect(),
            grad: None,
        };
        out.check_finite("scale")?;
        Ok(out)
    }

    fn zip_with(&self, other: &Tensor, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::dimension(format!(
                "{op}: shape {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let out = Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            grad: None,
        };
        out.check_finite(op)?;
        Ok(out)
    }
}

/// Errors with the first offending index if any value is NaN/Inf.
pub fn check_finite_slice(data: &[f64], context: &str) -> Result<()> {
    for (i, &v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: context.to_string(),
                details: format!("value {v} at flat index {i} of {}", data.len()),
            });
        }
    }
    Ok(())
}

fn conv_out_extent(name: &str, input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < k {
        return Err(Error::config(format!(
            "conv2d: kernel {name} {k} exceeds padded input {name} {padded} \
             (no integer output extent)"
        )));
    }
    // Floor division: trailing rows/columns that cannot host a full kernel
    // placement are unused.
    Ok((padded - k) / stride + 1)
}

fn conv_check(input: &Tensor, kernel: &Tensor, stride: usize) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::config("conv2d: stride must be positive"));
    }
    if input.c() != kernel.c() {
        return Err(Error::dimension(format!(
            "conv2d: input shape {:?} has {} channels but kernel shape {:?} expects {}",
            input.shape(),
            input.c(),
            kernel.shape(),
            kernel.c()
        )));
    }
    Ok((kernel.h(), kernel.w()))
}

/// 2-D cross-correlation of `input [n, inC, h, w]` with `kernel
/// [outC, inC, kh, kw]` plus a per-output-channel bias.
///
/// Output extents are `⌊(h + 2*pad - kh)/stride⌋ + 1` (similarly for width);
/// a kernel larger than the padded input is a configuration error.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (kh, kw) = conv_check(input, kernel, stride)?;
    let out_c = kernel.n();
    if bias.len() != out_c {
        return Err(Error::dimension(format!(
            "conv2d: bias length {} but kernel shape {:?} has {} output channels",
            bias.len(),
            kernel.shape(),
            out_c
        )));
    }
    let (n, in_c, h, w) = (input.n(), input.c(), input.h(), input.w());
    let out_h = conv_out_extent("height", h, kh, stride, pad)?;
    let out_w = conv_out_extent("width", w, kw, stride, pad)?;

    let mut out = Tensor::zeros([n, out_c, out_h, out_w]);
    let in_data = input.data();
    let k_data = kernel.data();
    let plane = out_h * out_w;
    par::for_each_chunk_mut(out.data_mut(), plane, |idx, chunk| {
        let (ni, oc) = (idx / out_c, idx % out_c);
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut acc = bias[oc];
                for ic in 0..in_c {
                    let in_base = (ni * in_c + ic) * h * w;
                    let k_base = ((oc * in_c + ic) * kh) * kw;
                    for dh in 0..kh {
                        let ih = (oh * stride + dh) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let row = in_base + ih as usize * w;
                        let k_row = k_base + dh * kw;
                        for dw in 0..kw {
                            let iw = (ow * stride + dw) as isize - pad as isize;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            acc += in_data[row + iw as usize] * k_data[k_row + dw];
                        }
                    }
                }
                chunk[oh * out_w + ow] = acc;
            }
        }
    });
    out.check_finite("conv2d")?;
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, kernel, and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Vec<f64>,
}

/// Analytic backward pass of [`conv2d`]; `grad_out` must have the forward
/// call's output shape.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads> {
    let (kh, kw) = conv_check(input, kernel, stride)?;
    let (n, in_c, h, w) = (input.n(), input.c(), input.h(), input.w());
    let out_c = kernel.n();
    let out_h = conv_out_extent("height", h, kh, stride, pad)?;
    let out_w = conv_out_extent("width", w, kw, stride, pad)?;
    if grad_out.shape() != [n, out_c, out_h, out_w] {
        return Err(Error::dimension(format!(
            "conv2d_backward: grad_out shape {:?} but forward output is {:?}",
            grad_out.shape(),
            [n, out_c, out_h, out_w]
        )));
    }

    let in_data = input.data();
    let k_data = kernel.data();
    let go = grad_out.data();

    // grad_input[n,ic,ih,iw] = Σ_{oc,dh,dw} k[oc,ic,dh,dw]·go[n,oc,oh,ow]
    // where (oh,ow) is the unique output position mapping (ih,iw) through
    // (dh,dw); gather form so each element is written once.
    let mut grad_input = Tensor::zeros([n, in_c, h, w]);
    par::for_each_chunk_mut(grad_input.data_mut(), h * w, |idx, chunk| {
        let (ni, ic) = (idx / in_c, idx % in_c);
        for ih in 0..h {
            for iw in 0..w {
                let mut acc = 0.0;
                for oc in 0..out_c {
                    let go_base = (ni * out_c + oc) * out_h * out_w;
                    let k_base = ((oc * in_c + ic) * kh) * kw;
                    for dh in 0..kh {
                        let oh_num = ih as isize + pad as isize - dh as isize;
                        if oh_num < 0 || oh_num % stride as isize != 0 {
                            continue;
                        }
                        let oh = oh_num as usize / stride;
                        if oh >= out_h {
                            continue;
                        }
                        for dw in 0..kw {
                            let ow_num = iw as isize + pad as isize - dw as isize;
                            if ow_num < 0 || ow_num % stride as isize != 0 {
                                continue;
                            }
                            let ow = ow_num as usize / stride;
                            if ow >= out_w {
                                continue;
                            }
                            acc += k_data[k_base + dh * kw + dw] * go[go_base + oh * out_w + ow];
                        }
                    }
                }
                chunk[ih * w + iw] = acc;
            }
        }
    });

    // grad_kernel[oc,ic,dh,dw] = Σ_{n,oh,ow} go[n,oc,oh,ow]·in[n,ic,ih,iw].
    let mut grad_kernel = Tensor::zeros(kernel.shape());
    par::for_each_chunk_mut(grad_kernel.data_mut(), in_c * kh * kw, |oc, chunk| {
        for ic in 0..in_c {
            for dh in 0..kh {
                for dw in 0..kw {
                    let mut acc = 0.0;
                    for ni in 0..n {
                        let go_base = (ni * out_c + oc) * out_h * out_w;
                        let in_base = (ni * in_c + ic) * h * w;
                        for oh in 0..out_h {
                            let ih = (oh * stride + dh) as isize - pad as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            let row = in_base + ih as usize * w;
                            for ow in 0..out_w {
                                let iw = (ow * stride + dw) as isize - pad as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                acc += go[go_base + oh * out_w + ow] * in_data[row + iw as usize];
                            }
                        }
                    }
                    chunk[(ic * kh + dh) * kw + dw] = acc;
                }
            }
        }
    });

    let mut grad_bias = vec![0.0; out_c];
    for ni in 0..n {
        for (oc, gb) in grad_bias.iter_mut().enumerate() {
            let base = (ni * out_c + oc) * out_h * out_w;
            for v in &go[base..base + out_h * out_w] {
                *gb += v;
            }
        }
    }

    grad_input.check_finite("conv2d_backward grad_input")?;
    grad_kernel.check_finite("conv2d_backward grad_kernel")?;
    check_finite_slice(&grad_bias, "conv2d_backward grad_bias")?;
    Ok(ConvGrads {
        input: grad_input,
        kernel: grad_kernel,
        bias: grad_bias,
    })
}

/// Backward of `add`: the upstream gradient flows unchanged to both inputs.
pub fn add_backward(grad_out: &Tensor) -> (Tensor, Tensor) {
    (grad_out.clone(), grad_out.clone())
}

/// Backward of `sub`: unchanged to the left input, negated to the right.
pub fn sub_backward(grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    Ok((grad_out.clone(), grad_out.scale(-1.0)?))
}

/// Backward of `mul`: each side receives the gradient times the other side.
pub fn mul_backward(a: &Tensor, b: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    Ok((grad_out.mul(b)?, grad_out.mul(a)?))
}

/// Backward of `scale`.
pub fn scale_backward(factor: f64, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.scale(factor)
}

/// Mean squared error over all elements: `(1/len)·Σ (a−b)²`.
pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dimension(format!(
            "mse: shape {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let len = a.len() as f64;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    let v = sum / len;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            context: "mse".to_string(),
            details: format!("value {v}"),
        });
    }
    Ok(v)
}

/// Gradient of [`mse`] with respect to `a`: `2(a−b)/len` (the gradient with
/// respect to `b` is its negation).
pub fn mse_backward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let diff = a.sub(b)?;
    diff.scale(2.0 / a.len() as f64)
}
