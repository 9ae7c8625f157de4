//! Wavelet-domain single-image super-resolution.
//!
//! The crate trains a residual convolutional generator to predict the 2-level
//! Haar wavelet packet coefficients of a high-resolution image from its
//! low-resolution counterpart, then inverts the packet transform to obtain the
//! upscaled result. Everything is f64 end to end, with hand-written backward
//! passes and a deterministic, seed-driven training loop.
//!
//! Module map:
//! - [`tensor`]: rank-4 `[n, c, h, w]` tensors and the conv/activation ops.
//! - [`wavelet`]: 1-D/2-D Haar DWT and the 16-band packet transform.
//! - [`network`]: generator and discriminator definitions.
//! - [`loss`]: content, adversarial, and wavelet-domain loss terms.
//! - [`metrics`]: PSNR, SSIM, FSIM, UIQ, and LBP-histogram distance.
//! - [`data`]: image I/O, bicubic resampling, and crop sampling.
//! - [`trainer`]: Adam, the alternating training loop, and checkpoints.

pub mod data;
pub mod error;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod par;
pub mod tensor;
pub mod trainer;
pub mod wavelet;

pub use error::{Error, Result};
pub use tensor::Tensor;
