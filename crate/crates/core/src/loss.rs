//! The composite training objective: content loss over frozen feature maps,
//! adversarial loss from discriminator probabilities, and the band-weighted
//! wavelet-coefficient loss, plus the discriminator's own binary
//! cross-entropy. All terms are means (batch- and size-invariant) and every
//! term ships its analytic backward pass.

use crate::error::{Error, Result};
use crate::network::{relu, relu_backward, Conv};
use crate::tensor::{self, Tensor};
use crate::trainer::checkpoint::{self, NamedTensor};
use crate::wavelet::BAND_COUNT;
use std::path::Path;

/// Probabilities are clamped to `[EPS, 1−EPS]` before any logarithm.
pub const CLAMP_EPS: f64 = 1e-7;

/// Weights of the three generator loss terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    /// Multiplier on the adversarial term (default 1e-3; 1.0 recovers the
    /// plain unweighted sum).
    pub lambda_adv: f64,
    /// Multiplier on the wavelet term (default 1.0).
    pub lambda_wavelet: f64,
    /// Per-band weights α, one per packet band.
    pub alpha: Vec<f64>,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_adv: 1e-3,
            lambda_wavelet: 1.0,
            alpha: vec![1.0; BAND_COUNT],
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_adv < 0.0 || self.lambda_wavelet < 0.0 {
            return Err(Error::config(format!(
                "loss weights must be non-negative: lambda_adv {}, lambda_wavelet {}",
                self.lambda_adv, self.lambda_wavelet
            )));
        }
        if self.alpha.len() != BAND_COUNT {
            return Err(Error::config(format!(
                "alpha needs exactly {BAND_COUNT} entries, got {}",
                self.alpha.len()
            )));
        }
        if self.alpha.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::config("alpha entries must be non-negative"));
        }
        Ok(())
    }
}

/// A frozen feature map for the content loss: either the identity (plain
/// pixel MSE) or a fixed stack of stride-2 convolutions with ReLU whose
/// parameters are drawn once from a named seed (or loaded from a tensor
/// file) and never trained.
#[derive(Debug, Clone)]
pub enum FeatureExtractor {
    Identity,
    Stack(Vec<Conv>),
}

impl FeatureExtractor {
    /// The identity extractor: content loss degenerates to pixel MSE.
    pub fn identity() -> Self {
        FeatureExtractor::Identity
    }

    /// The fixed random stack: 3→16→32→64 channels, 3×3 stride 2 pad 1,
    /// ReLU after each, drawn from `seed`.
    pub fn fixed(seed: u64) -> Self {
        let mut rng = crate::network::init_rng(seed);
        let widths = [3usize, 16, 32, 64];
        let stack = widths
            .windows(2)
            .map(|w| Conv::he_init(&mut rng, w[1], w[0], 3, 2, 1))
            .collect();
        FeatureExtractor::Stack(stack)
    }

    /// Loads externally supplied weights (entries `extractor.conv{i}.kernel`
    /// / `.bias` in a WSR1 tensor file). Channel widths may differ from the
    /// built-in stack; strides stay 2 and the input must be 3-channel.
    pub fn from_file(path: &Path) -> Result<Self> {
        let entries = checkpoint::read_tensor_file(path)?;
        let find = |name: &str| -> Result<&NamedTensor> {
            entries
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::file(path, format!("missing entry {name:?}")))
        };
        let mut stack = Vec::new();
        let mut in_c = 3usize;
        for i in 0.. {
            let kname = format!("extractor.conv{i}.kernel");
            if !entries.iter().any(|e| e.name == kname) {
                break;
            }
            let kernel = find(&kname)?;
            let bias = find(&format!("extractor.conv{i}.bias"))?;
            if kernel.extents.len() != 4 || kernel.extents[1] != in_c {
                return Err(Error::file(
                    path,
                    format!(
                        "entry {kname:?} has extents {:?}, expected [out, {in_c}, k, k]",
                        kernel.extents
                    ),
                ));
            }
            let out_c = kernel.extents[0];
            if bias.extents != [out_c] {
                return Err(Error::file(
                    path,
                    format!("extractor.conv{i}.bias extents {:?} vs out {out_c}", bias.extents),
                ));
            }
            let k = kernel.extents[2];
            let mut conv = Conv::zeros(out_c, in_c, k, 2, 1);
            conv.kernel = Tensor::from_vec(
                [out_c, in_c, k, kernel.extents[3]],
                kernel.to_f64(),
            )?;
            conv.bias = bias.to_f64();
            stack.push(conv);
            in_c = out_c;
        }
        if stack.is_empty() {
            return Err(Error::file(path, "no extractor.conv{i} entries found"));
        }
        Ok(FeatureExtractor::Stack(stack))
    }

    /// Serializes the stack for external storage (identity has no weights).
    pub fn to_named_tensors(&self) -> Vec<NamedTensor> {
        match self {
            FeatureExtractor::Identity => Vec::new(),
            FeatureExtractor::Stack(stack) => stack
                .iter()
                .enumerate()
                .flat_map(|(i, conv)| {
                    [
                        NamedTensor::from_f64(
                            format!("extractor.conv{i}.kernel"),
                            conv.kernel.shape().to_vec(),
                            conv.kernel.data(),
                        ),
                        NamedTensor::from_f64(
                            format!("extractor.conv{i}.bias"),
                            vec![conv.bias.len()],
                            &conv.bias,
                        ),
                    ]
                })
                .collect(),
        }
    }

    /// Feature map of `x`.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            FeatureExtractor::Identity => Ok(x.clone()),
            FeatureExtractor::Stack(stack) => {
                let mut t = x.clone();
                for conv in stack {
                    t = relu(&conv.forward(&t)?)?;
                }
                Ok(t)
            }
        }
    }

    // Forward with per-layer (input, pre-activation) tape.
    fn features_tape(&self, x: &Tensor) -> Result<(Vec<(Tensor, Tensor)>, Tensor)> {
        match self {
            FeatureExtractor::Identity => Ok((Vec::new(), x.clone())),
            FeatureExtractor::Stack(stack) => {
                let mut tape = Vec::with_capacity(stack.len());
                let mut t = x.clone();
                for conv in stack {
                    let pre = conv.forward(&t)?;
                    let act = relu(&pre)?;
                    tape.push((t, pre));
                    t = act;
                }
                Ok((tape, t))
            }
        }
    }

    // Propagates a feature-space gradient back to the input. Extractor
    // parameters are frozen, so only the input gradient exists.
    fn backward_to_input(&self, tape: &[(Tensor, Tensor)], grad_feat: &Tensor) -> Result<Tensor> {
        match self {
            FeatureExtractor::Identity => Ok(grad_feat.clone()),
            FeatureExtractor::Stack(stack) => {
                let mut g = grad_feat.clone();
                for (conv, (input, pre)) in stack.iter().zip(tape).rev() {
                    let g_pre = relu_backward(pre, &g)?;
                    g = conv.backward_input_only(input, &g_pre)?;
                }
                Ok(g)
            }
        }
    }
}

/// Content loss: MSE between extractor features of `sr` and `hr`.
pub fn content_loss(sr: &Tensor, hr: &Tensor, extractor: &FeatureExtractor) -> Result<f64> {
    if sr.shape() != hr.shape() {
        return Err(Error::dimension(format!(
            "content_loss: sr shape {:?} vs hr shape {:?}",
            sr.shape(),
            hr.shape()
        )));
    }
    tensor::mse(&extractor.features(sr)?, &extractor.features(hr)?)
}

/// Gradient of [`content_loss`] with respect to `sr`.
pub fn content_loss_backward(
    sr: &Tensor,
    hr: &Tensor,
    extractor: &FeatureExtractor,
) -> Result<Tensor> {
    if sr.shape() != hr.shape() {
        return Err(Error::dimension(format!(
            "content_loss: sr shape {:?} vs hr shape {:?}",
            sr.shape(),
            hr.shape()
        )));
    }
    let (tape, feat_sr) = extractor.features_tape(sr)?;
    let feat_hr = extractor.features(hr)?;
    let grad_feat = tensor::mse_backward(&feat_sr, &feat_hr)?;
    extractor.backward_to_input(&tape, &grad_feat)
}

fn check_coeff_shapes(coeff_sr: &Tensor, coeff_hr: &Tensor, alpha: &[f64]) -> Result<()> {
    if coeff_sr.shape() != coeff_hr.shape() {
        return Err(Error::dimension(format!(
            "wavelet_loss: coefficient shapes {:?} vs {:?}",
            coeff_sr.shape(),
            coeff_hr.shape()
        )));
    }
    if coeff_sr.c() % BAND_COUNT != 0 {
        return Err(Error::dimension(format!(
            "wavelet_loss: channel count {} is not a multiple of {BAND_COUNT}",
            coeff_sr.c()
        )));
    }
    if alpha.len() != BAND_COUNT {
        return Err(Error::dimension(format!(
            "wavelet_loss: alpha has {} entries, needs {BAND_COUNT}",
            alpha.len()
        )));
    }
    Ok(())
}

/// Band-weighted coefficient loss over packed `[n, 16·C, h, w]` tensors
/// (channel = 16·color + band): `Σ_b α_b · mean((hr_b − sr_b)²)`, averaged
/// over color channels and batch.
pub fn wavelet_loss(coeff_sr: &Tensor, coeff_hr: &Tensor, alpha: &[f64]) -> Result<f64> {
    check_coeff_shapes(coeff_sr, coeff_hr, alpha)?;
    let [n, c, h, w] = coeff_sr.shape();
    let plane = h * w;
    let colors = c / BAND_COUNT;
    let mut total = 0.0;
    for (i, (s, t)) in coeff_sr.data().iter().zip(coeff_hr.data()).enumerate() {
        let band = (i / plane) % BAND_COUNT;
        let d = t - s;
        total += alpha[band] * d * d;
    }
    let v = total / (plane * colors * n) as f64;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            context: "wavelet_loss".to_string(),
            details: format!("value {v}"),
        });
    }
    Ok(v)
}

/// Gradient of [`wavelet_loss`] with respect to `coeff_sr`.
pub fn wavelet_loss_backward(
    coeff_sr: &Tensor,
    coeff_hr: &Tensor,
    alpha: &[f64],
) -> Result<Tensor> {
    check_coeff_shapes(coeff_sr, coeff_hr, alpha)?;
    let [n, c, h, w] = coeff_sr.shape();
    let plane = h * w;
    let colors = c / BAND_COUNT;
    let norm = (plane * colors * n) as f64;
    let mut grad = coeff_sr.sub(coeff_hr)?;
    for (i, g) in grad.data_mut().iter_mut().enumerate() {
        let band = (i / plane) % BAND_COUNT;
        *g *= 2.0 * alpha[band] / norm;
    }
    Ok(grad)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
}

/// Generator-side adversarial loss: mean over the batch of `−log D(G(x))`.
pub fn adversarial_loss_g(d_out: &[f64]) -> f64 {
    let n = d_out.len().max(1) as f64;
    d_out.iter().map(|&p| -clamp_prob(p).ln()).sum::<f64>() / n
}

/// Gradient of [`adversarial_loss_g`] with respect to each probability
/// (zero where the clamp is active).
pub fn adversarial_loss_g_backward(d_out: &[f64]) -> Vec<f64> {
    let n = d_out.len().max(1) as f64;
    d_out
        .iter()
        .map(|&p| {
            if (CLAMP_EPS..=1.0 - CLAMP_EPS).contains(&p) {
                -1.0 / (p * n)
            } else {
                0.0
            }
        })
        .collect()
}

/// Discriminator loss: mean of `−log D(real) − log(1 − D(fake))`.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.len() != d_fake.len() {
        return Err(Error::dimension(format!(
            "discriminator_loss: {} real vs {} fake probabilities",
            d_real.len(),
            d_fake.len()
        )));
    }
    let n = d_real.len().max(1) as f64;
    let sum: f64 = d_real
        .iter()
        .zip(d_fake)
        .map(|(&r, &f)| -clamp_prob(r).ln() - (1.0 - clamp_prob(f)).ln())
        .sum();
    Ok(sum / n)
}

/// Gradients of [`discriminator_loss`] with respect to the real and fake
/// probabilities.
pub fn discriminator_loss_backward(d_real: &[f64], d_fake: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if d_real.len() != d_fake.len() {
        return Err(Error::dimension(format!(
            "discriminator_loss: {} real vs {} fake probabilities",
            d_real.len(),
            d_fake.len()
        )));
    }
    let n = d_real.len().max(1) as f64;
    let g_real = d_real
        .iter()
        .map(|&r| {
            if (CLAMP_EPS..=1.0 - CLAMP_EPS).contains(&r) {
                -1.0 / (r * n)
            } else {
                0.0
            }
        })
        .collect();
    let g_fake = d_fake
        .iter()
        .map(|&f| {
            if (CLAMP_EPS..=1.0 - CLAMP_EPS).contains(&f) {
                1.0 / ((1.0 - f) * n)
            } else {
                0.0
            }
        })
        .collect();
    Ok((g_real, g_fake))
}

/// Per-component values of one generator loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub content: f64,
    pub adversarial: f64,
    pub wavelet: f64,
    /// `content + λ_adv·adversarial + λ_wavelet·wavelet`.
    pub total: f64,
}

/// The full generator objective with its component breakdown.
pub fn generator_total_loss(
    sr: &Tensor,
    hr: &Tensor,
    d_fake: &[f64],
    coeff_sr: &Tensor,
    coeff_hr: &Tensor,
    weights: &LossWeights,
    extractor: &FeatureExtractor,
) -> Result<LossBreakdown> {
    weights.validate()?;
    let content = content_loss(sr, hr, extractor)?;
    let adversarial = adversarial_loss_g(d_fake);
    let wavelet = wavelet_loss(coeff_sr, coeff_hr, &weights.alpha)?;
    Ok(LossBreakdown {
        content,
        adversarial,
        wavelet,
        total: content + weights.lambda_adv * adversarial + weights.lambda_wavelet * wavelet,
    })
}
