//! Shared helpers for the integration-test targets: deterministic random
//! tensors, a central-difference gradient harness, and a synthetic texture
//! with enough high-frequency content to make ×4 upscaling non-trivial.

#![allow(dead_code)] // each test target uses a different subset

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsr_core::loss::{
    adversarial_loss_g, adversarial_loss_g_backward, content_loss, content_loss_backward,
    wavelet_loss, wavelet_loss_backward, FeatureExtractor,
};
use wsr_core::network::{
    Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, HasParams, InputMode,
};
use wsr_core::wavelet::{iwpt2_packed, iwpt2_packed_backward, wpt2_packed};
use wsr_core::Tensor;

/// Central-difference step used by every gradient check.
pub const FD_EPS: f64 = 1e-5;

/// Uniform values in `[-1, 1)`.
pub fn random_tensor(seed: u64, shape: [usize; 4]) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.iter().product())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Uniform values in `[0, 1)` — image-like data.
pub fn random_image(seed: u64, shape: [usize; 4]) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.iter().product())
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Push every value at least `margin` away from zero, preserving sign, so a
/// finite-difference probe cannot cross a rectifier kink.
pub fn nudge_from_zero(t: &mut Tensor, margin: f64) {
    for v in t.data_mut() {
        if v.abs() < margin {
            *v = if *v < 0.0 { -margin } else { margin };
        }
    }
}

/// Relative error with an absolute floor: `|a−b| / max(|a|, |b|, 1)`.
/// Behaves as absolute error below magnitude 1 so that near-zero gradients
/// are not compared against finite-difference noise in relative terms.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of `loss` at `x`, one coordinate at a time.
pub fn fd_grad(x: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let saved = probe[i];
        probe[i] = saved + FD_EPS;
        let up = loss(&probe);
        probe[i] = saved - FD_EPS;
        let down = loss(&probe);
        probe[i] = saved;
        grad.push((up - down) / (2.0 * FD_EPS));
    }
    grad
}

/// Flat copy of a model's parameters in visit order.
pub fn params_to_vec(model: &mut dyn HasParams) -> Vec<f64> {
    model.snapshot()
}

/// Overwrite a model's parameters from a flat vector in visit order.
pub fn set_params(model: &mut dyn HasParams, values: &[f64]) {
    let mut offset = 0;
    model.for_each_param(&mut |_, _, v, _| {
        v.copy_from_slice(&values[offset..offset + v.len()]);
        offset += v.len();
    });
    assert_eq!(offset, values.len(), "parameter length mismatch");
}

/// Flat copy of a model's accumulated gradients in visit order.
pub fn grads_to_vec(model: &mut dyn HasParams) -> Vec<f64> {
    let mut out = Vec::new();
    model.for_each_param(&mut |_, _, _, g| out.extend_from_slice(g));
    out
}

/// Deterministic 3-channel texture in `[0, 1]` built around a pixel-level
/// checkerboard plus a gentle low-frequency wave. The period-2 pattern sits
/// above the Nyquist limit of a ×4 downscale, so a bicubic round trip
/// flattens it almost completely — the worst case for the upsampling
/// baseline and a sharp target for a super-resolver to learn.
pub fn texture(h: usize, w: usize) -> Tensor {
    let mut t = Tensor::zeros([1, 3, h, w]);
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let board = if (x + y) % 2 == 0 { 0.28 } else { -0.28 };
                let wave = 0.02 * ((x as f64 * 0.35).sin() + (y as f64 * 0.22).cos());
                *t.at_mut(0, c, y, x) = (0.30 + board + wave).clamp(0.0, 1.0);
            }
        }
    }
    t
}

/// Worst-case relative error between the analytic gradient of the full
/// generator objective (content + adversarial + wavelet, assembled exactly
/// as the training step does) and central finite differences over every
/// generator parameter, on a tiny model.
pub fn generator_objective_e2e_error() -> f64 {
    let gen_config = GeneratorConfig {
        features: 4,
        blocks: 1,
        input_mode: InputMode::Pixels,
    };
    let mut generator = Generator::init(gen_config, 3);
    let mut disc = Discriminator::init(DiscriminatorConfig { base_channels: 2 }, 4);
    let extractor = FeatureExtractor::fixed(5);
    let (lambda_adv, lambda_wavelet) = (1e-3, 1.0);
    let alpha = vec![1.0; 16];

    let lr = random_image(140, [1, 3, 4, 4]);
    let hr = random_image(141, [1, 3, 16, 16]);
    let coeff_hr = wpt2_packed(&hr).unwrap();

    // Analytic gradient assembled exactly as the training step does it.
    let (tape, coeffs) = generator.forward_tape(&lr).unwrap();
    let sr = iwpt2_packed(&coeffs).unwrap();
    let g_content = content_loss_backward(&sr, &hr, &extractor).unwrap();
    let (d_tape, probs) = disc.forward_tape(&sr).unwrap();
    let g_probs = adversarial_loss_g_backward(&probs);
    let g_adv = disc.backward_input_only(&d_tape, &g_probs).unwrap();
    let g_image = g_content.add(&g_adv.scale(lambda_adv).unwrap()).unwrap();
    let g_coeffs = iwpt2_packed_backward(&g_image)
        .unwrap()
        .add(
            &wavelet_loss_backward(&coeffs, &coeff_hr, &alpha)
                .unwrap()
                .scale(lambda_wavelet)
                .unwrap(),
        )
        .unwrap();
    generator.zero_grad();
    generator.backward(&tape, &g_coeffs).unwrap();
    let analytic = grads_to_vec(&mut generator);

    let objective = |generator: &Generator| -> f64 {
        let coeffs = generator.forward(&lr).unwrap();
        let sr = iwpt2_packed(&coeffs).unwrap();
        let content = content_loss(&sr, &hr, &extractor).unwrap();
        let adv = adversarial_loss_g(&disc.forward(&sr).unwrap());
        let wav = wavelet_loss(&coeffs, &coeff_hr, &alpha).unwrap();
        content + lambda_adv * adv + lambda_wavelet * wav
    };

    let start = generator.snapshot();
    let numeric = fd_grad(&start, |v| {
        set_params(&mut generator, v);
        objective(&generator)
    });
    set_params(&mut generator, &start);

    max_rel_err(&analytic, &numeric)
}

/// A deterministic "natural" grayscale plane: smooth gradients plus edges
/// and oscillation, values inside [0, 1]. Structured enough for the
/// similarity metrics to have meaningful local statistics.
pub fn natural_plane(h: usize, w: usize) -> wsr_core::matrix::Matrix {
    wsr_core::matrix::Matrix::from_fn(h, w, |y, x| {
        let fy = y as f64 / h as f64;
        let fx = x as f64 / w as f64;
        let wave = ((x as f64 * 0.7).sin() + (y as f64 * 0.4).cos()) * 0.15;
        let blob = (-((fy - 0.4).powi(2) + (fx - 0.6).powi(2)) * 18.0).exp() * 0.3;
        let edge = if fx > 0.5 { 0.2 } else { 0.0 };
        (0.35 + 0.25 * fy + wave + blob + edge).clamp(0.0, 1.0)
    })
}

/// PSNR over all channels of a `[0, 1]` tensor pair (peak 1.0).
pub fn tensor_psnr(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return wsr_core::metrics::PSNR_CAP;
    }
    10.0 * (1.0 / mse).log10()
}
