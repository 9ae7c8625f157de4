//! The generator: an embedding conv + PReLU, a chain of identity-skip
//! residual blocks (no normalization layers anywhere), a trunk conv closed by
//! a global skip from the embedding, and a linear head that predicts the 48
//! wavelet-packet coefficient channels (16 bands × 3 colors) at LR extent.
//! Inverting the packet transform on the prediction yields the ×4 SR image.

use super::{prelu, prelu_backward, Conv, HasParams, ParamVisitor};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::Tensor;
use crate::wavelet;

/// What the embedding network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// LR pixels, 3 channels (the default).
    Pixels,
    /// LR pixels concatenated with their own 1-level 4-band DWT,
    /// nearest-upsampled back to LR extent: 3 + 3·4 = 15 channels.
    Wavelet,
}

impl InputMode {
    pub fn channels(self) -> usize {
        match self {
            InputMode::Pixels => 3,
            InputMode::Wavelet => 15,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Pixels => "pixels",
            InputMode::Wavelet => "wavelet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pixels" => Ok(InputMode::Pixels),
            "wavelet" => Ok(InputMode::Wavelet),
            other => Err(Error::config(format!(
                "unknown input mode {other:?} (expected \"pixels\" or \"wavelet\")"
            ))),
        }
    }
}

/// Generator sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    /// Trunk width F.
    pub features: usize,
    /// Residual block count B.
    pub blocks: usize,
    pub input_mode: InputMode,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            features: 64,
            blocks: 8,
            input_mode: InputMode::Pixels,
        }
    }
}

/// Coefficient channels produced by the head: 3 colors × 16 bands.
pub const HEAD_CHANNELS: usize = 3 * wavelet::BAND_COUNT;

// One residual block: x + conv2(prelu(conv1(x))). Exactly conv1, conv2, and
// the PReLU slope — no normalization parameters exist.
#[derive(Debug, Clone)]
struct ResidualBlock {
    conv1: Conv,
    slope: Vec<f64>,
    slope_grad: Vec<f64>,
    conv2: Conv,
}

impl ResidualBlock {
    fn visit(&mut self, prefix: &str, f: &mut ParamVisitor) {
        self.conv1.visit(&format!("{prefix}.conv1"), f);
        let len = self.slope.len();
        f(
            &format!("{prefix}.prelu"),
            &[len],
            &mut self.slope,
            &mut self.slope_grad,
        );
        self.conv2.visit(&format!("{prefix}.conv2"), f);
    }
}

/// The full generator.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    embed: Conv,
    embed_slope: Vec<f64>,
    embed_slope_grad: Vec<f64>,
    blocks: Vec<ResidualBlock>,
    trunk: Conv,
    head: Conv,
}

/// Intermediate activations of one forward pass, consumed by `backward`.
#[derive(Debug)]
pub struct GeneratorTape {
    input: Tensor,
    embed_pre: Tensor,
    // Per block: (input, conv1 output, PReLU output).
    blocks: Vec<(Tensor, Tensor, Tensor)>,
    trunk_in: Tensor,
    head_in: Tensor,
}

impl Generator {
    /// He-initialized generator, reproducible from the seed.
    pub fn init(config: GeneratorConfig, seed: u64) -> Self {
        let mut rng = super::init_rng(seed);
        let f = config.features;
        let embed = Conv::he_init(&mut rng, f, config.input_mode.channels(), 3, 1, 1);
        let blocks = (0..config.blocks)
            .map(|_| ResidualBlock {
                conv1: Conv::he_init(&mut rng, f, f, 3, 1, 1),
                slope: vec![0.25; f],
                slope_grad: vec![0.0; f],
                conv2: Conv::he_init(&mut rng, f, f, 3, 1, 1),
            })
            .collect();
        let trunk = Conv::he_init(&mut rng, f, f, 3, 1, 1);
        let head = Conv::he_init(&mut rng, HEAD_CHANNELS, f, 3, 1, 1);
        Generator {
            config,
            embed,
            embed_slope: vec![0.25; f],
            embed_slope_grad: vec![0.0; f],
            blocks,
            trunk,
            head,
        }
    }

    /// All-zero generator (debug aid: predicts all-zero coefficients).
    pub fn zeros(config: GeneratorConfig) -> Self {
        let f = config.features;
        Generator {
            config,
            embed: Conv::zeros(f, config.input_mode.channels(), 3, 1, 1),
            embed_slope: vec![0.25; f],
            embed_slope_grad: vec![0.0; f],
            blocks: (0..config.blocks)
                .map(|_| ResidualBlock {
                    conv1: Conv::zeros(f, f, 3, 1, 1),
                    slope: vec![0.25; f],
                    slope_grad: vec![0.0; f],
                    conv2: Conv::zeros(f, f, 3, 1, 1),
                })
                .collect(),
            trunk: Conv::zeros(f, f, 3, 1, 1),
            head: Conv::zeros(HEAD_CHANNELS, f, 3, 1, 1),
        }
    }

    pub fn config(&self) -> GeneratorConfig {
        self.config
    }

    /// Direct mutable access to the head layer (debug/test constructions).
    pub fn head_mut(&mut self) -> &mut Conv {
        &mut self.head
    }

    fn check_input(&self, lr: &Tensor) -> Result<()> {
        if lr.c() != 3 {
            return Err(Error::dimension(format!(
                "generator input shape {:?} must have 3 channels",
                lr.shape()
            )));
        }
        if self.config.input_mode == InputMode::Wavelet && (lr.h() % 2 != 0 || lr.w() % 2 != 0) {
            return Err(Error::dimension(format!(
                "wavelet input mode needs even LR extents, got {}×{}",
                lr.h(),
                lr.w()
            )));
        }
        Ok(())
    }

    // Builds the tensor the embedding conv actually sees.
    fn augment_input(&self, lr: &Tensor) -> Result<Tensor> {
        match self.config.input_mode {
            InputMode::Pixels => Ok(lr.clone()),
            InputMode::Wavelet => {
                let [n, _, h, w] = lr.shape();
                let mut out = Tensor::zeros([n, 15, h, w]);
                for ni in 0..n {
                    for c in 0..3 {
                        let m = Matrix::from_tensor_channel(lr, ni, c);
                        m.copy_into_channel(&mut out, ni, c);
                        let bands = wavelet::dwt2d(&m)?;
                        for (bi, band) in [&bands.ll, &bands.lh, &bands.hl, &bands.hh]
                            .into_iter()
                            .enumerate()
                        {
                            nearest_x2(band).copy_into_channel(&mut out, ni, 3 + 4 * c + bi);
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Predicted HR wavelet coefficients `[n, 48, h, w]` plus the tape needed
    /// for `backward`.
    pub fn forward_tape(&self, lr: &Tensor) -> Result<(GeneratorTape, Tensor)> {
        self.check_input(lr)?;
        let input = self.augment_input(lr)?;
        let embed_pre = self.embed.forward(&input)?;
        let embed_act = prelu(&embed_pre, &self.embed_slope)?;

        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut x = embed_act.clone();
        for block in &self.blocks {
            let pre = block.conv1.forward(&x)?;
            let act = prelu(&pre, &block.slope)?;
            let out = x.add(&block.conv2.forward(&act)?)?;
            blocks.push((x, pre, act));
            x = out;
        }
        let trunk_in = x;
        let head_in = self.trunk.forward(&trunk_in)?.add(&embed_act)?;
        let pred = self.head.forward(&head_in)?;
        let tape = GeneratorTape {
            input,
            embed_pre,
            blocks,
            trunk_in,
            head_in,
        };
        Ok((tape, pred))
    }

    /// Predicted HR wavelet coefficients `[n, 48, h, w]`.
    pub fn forward(&self, lr: &Tensor) -> Result<Tensor> {
        Ok(self.forward_tape(lr)?.1)
    }

    /// Full SR image `[n, 3, 4h, 4w]`: forward, then invert the packet
    /// transform. Values are NOT clamped here — clamping to [0,1] happens
    /// only at image-export time.
    pub fn sr_reconstruct(&self, lr: &Tensor) -> Result<Tensor> {
        wavelet::iwpt2_packed(&self.forward(lr)?)
    }

    /// Accumulates parameter gradients from `grad_pred` (the gradient of the
    /// loss with respect to the predicted coefficients).
    pub fn backward(&mut self, tape: &GeneratorTape, grad_pred: &Tensor) -> Result<()> {
        let g_head_in = self.head.backward(&tape.head_in, grad_pred)?;
        // head_in = trunk(trunk_in) + embed_act: the gradient splits.
        let g_trunk_in = self.trunk.backward(&tape.trunk_in, &g_head_in)?;

        let mut g = g_trunk_in;
        for (block, (x, pre, act)) in self.blocks.iter_mut().zip(&tape.blocks).rev() {
            // out = x + conv2(act): identity skip adds g to the branch input.
            let g_act = block.conv2.backward(act, &g)?;
            let (g_pre, g_slope) = prelu_backward(pre, &block.slope, &g_act)?;
            for (acc, gs) in block.slope_grad.iter_mut().zip(&g_slope) {
                *acc += gs;
            }
            let g_branch_in = block.conv1.backward(x, &g_pre)?;
            g = g.add(&g_branch_in)?;
        }

        let g_embed_act = g.add(&g_head_in)?;
        let (g_embed_pre, g_slope) =
            prelu_backward(&tape.embed_pre, &self.embed_slope, &g_embed_act)?;
        for (acc, gs) in self.embed_slope_grad.iter_mut().zip(&g_slope) {
            *acc += gs;
        }
        // The input is data, not a parameter; its gradient is discarded.
        self.embed.backward(&tape.input, &g_embed_pre)?;
        Ok(())
    }
}

impl HasParams for Generator {
    fn for_each_param(&mut self, f: &mut ParamVisitor) {
        self.embed.visit("gen.embed", f);
        let len = self.embed_slope.len();
        f(
            "gen.embed.prelu",
            &[len],
            &mut self.embed_slope,
            &mut self.embed_slope_grad,
        );
        for (i, block) in self.blocks.iter_mut().enumerate() {
            block.visit(&format!("gen.block{i}"), f);
        }
        self.trunk.visit("gen.trunk", f);
        self.head.visit("gen.head", f);
    }
}

// Nearest-neighbor ×2 upsample of a matrix.
fn nearest_x2(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.h() * 2, m.w() * 2, |r, c| m.at(r / 2, c / 2))
}
