//! The discriminator: a LeakyReLU conv stack that doubles channels while
//! halving extent, closed by global average pooling (extent-agnostic), a
//! dense 1×1 projection to one logit, and a sigmoid.

use super::{
    global_avg_pool, global_avg_pool_backward, leaky_relu, leaky_relu_backward, sigmoid,
    sigmoid_backward, Conv, HasParams, ParamVisitor,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const LEAK: f64 = 0.2;
const LAYER_NAMES: [&str; 5] = ["conv0", "pair0.a", "pair0.b", "pair1.a", "pair1.b"];

/// Discriminator sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscriminatorConfig {
    /// First conv's channel count; doubled by each pair (base → 4·base).
    pub base_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { base_channels: 32 }
    }
}

/// The full discriminator.
#[derive(Debug, Clone)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    // conv0 (s1), then two (s1 doubling, s2) pairs: base → 2·base → 4·base.
    convs: Vec<Conv>,
    dense: Conv,
}

/// Intermediate activations of one forward pass.
#[derive(Debug)]
pub struct DiscriminatorTape {
    input: Tensor,
    pres: Vec<Tensor>,
    acts: Vec<Tensor>,
    pooled: Tensor,
    probs: Tensor,
}

// (out_c multiplier, in_c multiplier, stride) per conv layer.
const PLAN: [(usize, usize, usize); 5] = [(1, 0, 1), (2, 1, 1), (2, 2, 2), (4, 2, 1), (4, 4, 2)];

impl Discriminator {
    /// He-initialized discriminator, reproducible from the seed.
    pub fn init(config: DiscriminatorConfig, seed: u64) -> Self {
        let mut rng = super::init_rng(seed);
        let b = config.base_channels;
        let convs = PLAN
            .iter()
            .map(|&(out_m, in_m, stride)| {
                let in_c = if in_m == 0 { 3 } else { in_m * b };
                Conv::he_init(&mut rng, out_m * b, in_c, 3, stride, 1)
            })
            .collect();
        let dense = Conv::he_init(&mut rng, 1, 4 * b, 1, 1, 0);
        Discriminator {
            config,
            convs,
            dense,
        }
    }

    /// All-zero discriminator: outputs sigmoid(0) = 0.5 for any input.
    pub fn zeros(config: DiscriminatorConfig) -> Self {
        let b = config.base_channels;
        let convs = PLAN
            .iter()
            .map(|&(out_m, in_m, stride)| {
                let in_c = if in_m == 0 { 3 } else { in_m * b };
                Conv::zeros(out_m * b, in_c, 3, stride, 1)
            })
            .collect();
        Discriminator {
            config,
            convs,
            dense: Conv::zeros(1, 4 * b, 1, 1, 0),
        }
    }

    pub fn config(&self) -> DiscriminatorConfig {
        self.config
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        if image.c() != 3 {
            return Err(Error::dimension(format!(
                "discriminator input shape {:?} must have 3 channels",
                image.shape()
            )));
        }
        if image.h() < 16 || image.w() < 16 {
            return Err(Error::dimension(format!(
                "discriminator input {}×{} is undersized (needs at least 16×16)",
                image.h(),
                image.w()
            )));
        }
        Ok(())
    }

    /// Per-item probabilities plus the tape for `backward`.
    pub fn forward_tape(&self, image: &Tensor) -> Result<(DiscriminatorTape, Vec<f64>)> {
        self.check_input(image)?;
        let mut pres = Vec::with_capacity(self.convs.len());
        let mut acts = Vec::with_capacity(self.convs.len());
        let mut x = image.clone();
        for conv in &self.convs {
            let pre = conv.forward(&x)?;
            let act = leaky_relu(&pre, LEAK)?;
            pres.push(pre);
            x = act.clone();
            acts.push(act);
        }
        let pooled = global_avg_pool(&x)?;
        let logits = self.dense.forward(&pooled)?;
        let probs = sigmoid(&logits)?;
        let out = probs.data().to_vec();
        Ok((
            DiscriminatorTape {
                input: image.clone(),
                pres,
                acts,
                pooled,
                probs,
            },
            out,
        ))
    }

    /// Per-item probabilities in (0,1).
    pub fn forward(&self, image: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward_tape(image)?.1)
    }

    fn backward_impl(
        &mut self,
        tape: &DiscriminatorTape,
        grad_probs: &[f64],
        accumulate: bool,
    ) -> Result<Tensor> {
        let n = tape.input.n();
        if grad_probs.len() != n {
            return Err(Error::dimension(format!(
                "discriminator backward: {} gradients for batch of {n}",
                grad_probs.len()
            )));
        }
        let g_probs = Tensor::from_vec([n, 1, 1, 1], grad_probs.to_vec())?;
        let g_logits = sigmoid_backward(&tape.probs, &g_probs)?;
        let g_pooled = if accumulate {
            self.dense.backward(&tape.pooled, &g_logits)?
        } else {
            self.dense.backward_input_only(&tape.pooled, &g_logits)?
        };
        let last = self.convs.len() - 1;
        let mut g = global_avg_pool_backward(tape.acts[last].shape(), &g_pooled)?;
        for i in (0..self.convs.len()).rev() {
            let g_pre = leaky_relu_backward(&tape.pres[i], LEAK, &g)?;
            let input = if i == 0 { &tape.input } else { &tape.acts[i - 1] };
            g = if accumulate {
                self.convs[i].backward(input, &g_pre)?
            } else {
                self.convs[i].backward_input_only(input, &g_pre)?
            };
        }
        Ok(g)
    }

    /// Accumulates parameter gradients and returns the input-image gradient.
    pub fn backward(&mut self, tape: &DiscriminatorTape, grad_probs: &[f64]) -> Result<Tensor> {
        self.backward_impl(tape, grad_probs, true)
    }

    /// Input-image gradient only — used during the generator step, where the
    /// discriminator is a frozen function of the fake image.
    pub fn backward_input_only(
        &mut self,
        tape: &DiscriminatorTape,
        grad_probs: &[f64],
    ) -> Result<Tensor> {
        self.backward_impl(tape, grad_probs, false)
    }
}

impl HasParams for Discriminator {
    fn for_each_param(&mut self, f: &mut ParamVisitor) {
        for (conv, name) in self.convs.iter_mut().zip(LAYER_NAMES) {
            conv.visit(&format!("disc.{name}"), f);
        }
        self.dense.visit("disc.dense", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny() -> DiscriminatorConfig {
        DiscriminatorConfig { base_channels: 2 }
    }

    fn random_image(seed: u64, n: usize, h: usize, w: usize) -> Tensor {
        let mut rng = super::super::init_rng(seed);
        let data = (0..n * 3 * h * w)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        Tensor::from_vec([n, 3, h, w], data).unwrap()
    }

    #[test]
    fn zero_params_give_half_for_any_input() {
        let disc = Discriminator::zeros(tiny());
        for seed in 0..3 {
            let probs = disc.forward(&random_image(seed, 2, 16, 16)).unwrap();
            assert_eq!(probs, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn outputs_stay_in_open_unit_interval() {
        let disc = Discriminator::init(tiny(), 1);
        for seed in 0..100 {
            let probs = disc.forward(&random_image(seed, 1, 16, 16)).unwrap();
            assert!(probs[0] > 0.0 && probs[0] < 1.0, "{}", probs[0]);
        }
    }

    #[test]
    fn pooling_makes_extent_agnostic() {
        let disc = Discriminator::init(tiny(), 2);
        assert_eq!(disc.forward(&random_image(1, 1, 16, 16)).unwrap().len(), 1);
        assert_eq!(disc.forward(&random_image(1, 1, 22, 34)).unwrap().len(), 1);
    }

    #[test]
    fn rejects_undersized_and_non_rgb_input() {
        let disc = Discriminator::init(tiny(), 3);
        assert!(disc.forward(&Tensor::zeros([1, 3, 8, 16])).is_err());
        assert!(disc.forward(&Tensor::zeros([1, 1, 16, 16])).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let mut a = Discriminator::init(tiny(), 5);
        let mut b = Discriminator::init(tiny(), 5);
        assert_eq!(a.snapshot(), b.snapshot());
        let mut c = Discriminator::init(tiny(), 6);
        assert_ne!(a.snapshot(), c.snapshot());
    }

    #[test]
    fn parameter_names_are_structured() {
        let mut disc = Discriminator::init(tiny(), 1);
        let names = disc.param_names();
        assert_eq!(names[0], "disc.conv0.kernel");
        assert!(names.contains(&"disc.pair1.b.bias".to_string()));
        assert_eq!(*names.last().unwrap(), "disc.dense.bias");
        assert_eq!(names.len(), 12);
    }

    fn set_flat(disc: &mut Discriminator, flat: &[f64]) {
        let mut off = 0;
        disc.for_each_param(&mut |_, _, v, _| {
            v.copy_from_slice(&flat[off..off + v.len()]);
            off += v.len();
        });
    }

    #[test]
    fn full_stack_gradients_match_finite_differences() {
        let mut disc = Discriminator::init(tiny(), 4);
        let image = random_image(9, 1, 16, 16);
        // Scalar objective: the probability itself.
        let (tape, _) = disc.forward_tape(&image).unwrap();
        disc.zero_grad();
        let g_input = disc.backward(&tape, &[1.0]).unwrap();

        let mut analytic = Vec::new();
        disc.for_each_param(&mut |_, _, _, g| analytic.extend_from_slice(g));

        let eps = 1e-5;
        let flat = disc.snapshot();
        for i in (0..flat.len()).step_by(11) {
            let mut plus = flat.clone();
            plus[i] += eps;
            set_flat(&mut disc, &plus);
            let fp = disc.forward(&image).unwrap()[0];
            let mut minus = flat.clone();
            minus[i] -= eps;
            set_flat(&mut disc, &minus);
            let fm = disc.forward(&image).unwrap()[0];
            let fd = (fp - fm) / (2.0 * eps);
            let a = analytic[i];
            assert!((a - fd).abs() <= 1e-4 * fd.abs().max(1.0), "param[{i}]: {a} vs {fd}");
        }
        set_flat(&mut disc, &flat);

        // Input gradient, sampled.
        for i in (0..image.len()).step_by(37) {
            let mut p = image.clone();
            p.data_mut()[i] += eps;
            let mut m = image.clone();
            m.data_mut()[i] -= eps;
            let fd = (disc.forward(&p).unwrap()[0] - disc.forward(&m).unwrap()[0]) / (2.0 * eps);
            let a = g_input.data()[i];
            assert!((a - fd).abs() <= 1e-4 * fd.abs().max(1.0), "input[{i}]: {a} vs {fd}");
        }
    }
}
