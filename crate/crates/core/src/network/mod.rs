//! Network building blocks: activations with analytic backwards, a
//! convolution layer with gradient accumulation, He initialization, and the
//! parameter-visitor protocol shared by the optimizer, the checkpoint codec,
//! and the update-isolation audit.

mod discriminator;
mod generator;

pub use discriminator::{Discriminator, DiscriminatorConfig, DiscriminatorTape};
pub use generator::{Generator, GeneratorConfig, GeneratorTape, InputMode};

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

/// Visitor invoked once per parameter in a fixed structural order with
/// `(name, extents, values, gradients)`.
pub type ParamVisitor<'a> = dyn FnMut(&str, &[usize], &mut [f64], &mut [f64]) + 'a;

/// Anything that exposes its trainable parameters to the visitor.
pub trait HasParams {
    fn for_each_param(&mut self, f: &mut ParamVisitor);

    /// Names in visit order.
    fn param_names(&mut self) -> Vec<String> {
        let mut names = Vec::new();
        self.for_each_param(&mut |name, _, _, _| names.push(name.to_string()));
        names
    }

    /// Total scalar parameter count.
    fn param_count(&mut self) -> usize {
        let mut count = 0;
        self.for_each_param(&mut |_, _, v, _| count += v.len());
        count
    }

    fn zero_grad(&mut self) {
        self.for_each_param(&mut |_, _, _, g| g.fill(0.0));
    }

    /// Flat copy of all parameter values in visit order.
    fn snapshot(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_param(&mut |_, _, v, _| out.extend_from_slice(v));
        out
    }
}

/// Parametric ReLU: `x` where `x ≥ 0`, `slope[c]·x` where `x < 0`.
pub fn prelu(x: &Tensor, slope: &[f64]) -> Result<Tensor> {
    if slope.len() != x.c() {
        return Err(Error::dimension(format!(
            "prelu: slope length {} but input shape {:?} has {} channels",
            slope.len(),
            x.shape(),
            x.c()
        )));
    }
    let mut out = x.clone();
    let (c, plane) = (x.c(), x.h() * x.w());
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if *v < 0.0 {
            *v *= slope[(i / plane) % c];
        }
    }
    out.check_finite("prelu")?;
    Ok(out)
}

/// Backward of [`prelu`]: gradients with respect to the input and the
/// per-channel slopes.
pub fn prelu_backward(x: &Tensor, slope: &[f64], grad_out: &Tensor) -> Result<(Tensor, Vec<f64>)> {
    if x.shape() != grad_out.shape() {
        return Err(Error::dimension(format!(
            "prelu_backward: input shape {:?} vs grad shape {:?}",
            x.shape(),
            grad_out.shape()
        )));
    }
    if slope.len() != x.c() {
        return Err(Error::dimension(format!(
            "prelu_backward: slope length {} vs {} channels",
            slope.len(),
            x.c()
        )));
    }
    let (c, plane) = (x.c(), x.h() * x.w());
    let mut grad_x = grad_out.clone();
    let mut grad_slope = vec![0.0; slope.len()];
    for (i, gx) in grad_x.data_mut().iter_mut().enumerate() {
        let xv = x.data()[i];
        if xv < 0.0 {
            let ch = (i / plane) % c;
            grad_slope[ch] += *gx * xv;
            *gx *= slope[ch];
        }
    }
    Ok((grad_x, grad_slope))
}

/// Leaky ReLU with a fixed negative-side slope.
pub fn leaky_relu(x: &Tensor, alpha: f64) -> Result<Tensor> {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v *= alpha;
        }
    }
    out.check_finite("leaky_relu")?;
    Ok(out)
}

/// Backward of [`leaky_relu`].
pub fn leaky_relu_backward(x: &Tensor, alpha: f64, grad_out: &Tensor) -> Result<Tensor> {
    if x.shape() != grad_out.shape() {
        return Err(Error::dimension(format!(
            "leaky_relu_backward: input shape {:?} vs grad shape {:?}",
            x.shape(),
            grad_out.shape()
        )));
    }
    let mut grad_x = grad_out.clone();
    for (gx, &xv) in grad_x.data_mut().iter_mut().zip(x.data()) {
        if xv < 0.0 {
            *gx *= alpha;
        }
    }
    Ok(grad_x)
}

/// Plain ReLU (leaky with slope 0).
pub fn relu(x: &Tensor) -> Result<Tensor> {
    leaky_relu(x, 0.0)
}

/// Backward of [`relu`].
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    leaky_relu_backward(x, 0.0, grad_out)
}

/// Element-wise logistic sigmoid.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
    out.check_finite("sigmoid")?;
    Ok(out)
}

/// Backward of [`sigmoid`] given its OUTPUT `y`: `grad · y · (1 − y)`.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if y.shape() != grad_out.shape() {
        return Err(Error::dimension(format!(
            "sigmoid_backward: output shape {:?} vs grad shape {:?}",
            y.shape(),
            grad_out.shape()
        )));
    }
    let mut grad_x = grad_out.clone();
    for (gx, &yv) in grad_x.data_mut().iter_mut().zip(y.data()) {
        *gx *= yv * (1.0 - yv);
    }
    Ok(grad_x)
}

/// Mean over each `[h, w]` plane: `[n, c, h, w]` → `[n, c, 1, 1]`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = x.shape();
    let plane = h * w;
    let mut out = Tensor::zeros([n, c, 1, 1]);
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        let base = i * plane;
        *o = x.data()[base..base + plane].iter().sum::<f64>() / plane as f64;
    }
    out.check_finite("global_avg_pool")?;
    Ok(out)
}

/// Backward of [`global_avg_pool`]: the gradient spreads uniformly over each
/// pooled plane.
pub fn global_avg_pool_backward(input_shape: [usize; 4], grad_out: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = input_shape;
    if grad_out.shape() != [n, c, 1, 1] {
        return Err(Error::dimension(format!(
            "global_avg_pool_backward: grad shape {:?} vs pooled shape {:?}",
            grad_out.shape(),
            [n, c, 1, 1]
        )));
    }
    let plane = (h * w) as f64;
    let mut grad_x = Tensor::zeros(input_shape);
    crate::par::for_each_chunk_mut(grad_x.data_mut(), h * w, |idx, chunk| {
        chunk.fill(grad_out.data()[idx] / plane);
    });
    Ok(grad_x)
}

/// A convolution layer: kernel + bias with gradient accumulators and fixed
/// stride/pad.
#[derive(Debug, Clone)]
pub struct Conv {
    pub kernel: Tensor,
    pub bias: Vec<f64>,
    pub bias_grad: Vec<f64>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    /// He-initialized layer: kernel ~ N(0, √(2/fan_in)), zero bias.
    pub fn he_init(
        rng: &mut ChaCha12Rng,
        out_c: usize,
        in_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let fan_in = (in_c * k * k) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        let data: Vec<f64> = (0..out_c * in_c * k * k)
            .map(|_| normal.sample(rng))
            .collect();
        let mut kernel = Tensor::from_vec([out_c, in_c, k, k], data).expect("length matches");
        kernel.ensure_grad();
        Conv {
            kernel,
            bias: vec![0.0; out_c],
            bias_grad: vec![0.0; out_c],
            stride,
            pad,
        }
    }

    /// All-zero layer (useful for debug models and tests).
    pub fn zeros(out_c: usize, in_c: usize, k: usize, stride: usize, pad: usize) -> Self {
        let mut kernel = Tensor::zeros([out_c, in_c, k, k]);
        kernel.ensure_grad();
        Conv {
            kernel,
            bias: vec![0.0; out_c],
            bias_grad: vec![0.0; out_c],
            stride,
            pad,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        tensor::conv2d(x, &self.kernel, &self.bias, self.stride, self.pad)
    }

    /// Accumulates kernel/bias gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let grads = tensor::conv2d_backward(x, &self.kernel, grad_out, self.stride, self.pad)?;
        for (acc, g) in self.kernel.grad_mut().iter_mut().zip(grads.kernel.data()) {
            *acc += g;
        }
        for (acc, g) in self.bias_grad.iter_mut().zip(&grads.bias) {
            *acc += g;
        }
        Ok(grads.input)
    }

    /// Input gradient only; parameter accumulators stay untouched.
    pub fn backward_input_only(&self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let grads = tensor::conv2d_backward(x, &self.kernel, grad_out, self.stride, self.pad)?;
        Ok(grads.input)
    }

    pub fn visit(&mut self, prefix: &str, f: &mut ParamVisitor) {
        let extents = self.kernel.shape().to_vec();
        let (v, g) = self.kernel.value_and_grad_mut();
        f(&format!("{prefix}.kernel"), &extents, v, g);
        let blen = self.bias.len();
        f(
            &format!("{prefix}.bias"),
            &[blen],
            &mut self.bias,
            &mut self.bias_grad,
        );
    }
}

/// Deterministic RNG for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
