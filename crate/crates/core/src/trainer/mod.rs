//! Alternating adversarial training.
//!
//! Each iteration runs the two updates in a fixed order:
//!
//! 1. **Discriminator step** — the generator reconstructs SR images from the
//!    LR batch (detached: no generator tape is kept), the discriminator
//!    scores real HR crops against them, and only discriminator parameters
//!    move.
//! 2. **Generator step** — a fresh generator forward predicts HR wavelet
//!    coefficients; the three-term loss (content on the reconstructed image,
//!    adversarial through a fresh discriminator forward, wavelet on the
//!    coefficients) backpropagates into generator parameters only.
//!
//! The audit variant of the step proves that isolation: it snapshots the
//! frozen network around each update and reports bit-identity.

pub mod adam;
pub mod checkpoint;
pub mod config;

pub use adam::{AdamParams, AdamState};
pub use config::{ExtractorChoice, TrainConfig};

use crate::data::{CropSampler, Dataset};
use crate::error::{Error, Result};
use crate::loss::{
    adversarial_loss_g, adversarial_loss_g_backward, content_loss, content_loss_backward,
    discriminator_loss, discriminator_loss_backward, wavelet_loss, wavelet_loss_backward,
    FeatureExtractor,
};
use crate::network::{Discriminator, Generator, HasParams, InputMode};
use crate::wavelet;
use checkpoint::{decode_u64, encode_u64, NamedTensor};
use std::collections::BTreeMap;
use std::path::Path;

/// Model-shape metadata stored in every checkpoint so inference can rebuild
/// the networks without the training config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelMeta {
    pub features: usize,
    pub blocks: usize,
    pub input_mode: InputMode,
    pub disc_base_channels: usize,
}

const META_MODEL: &str = "meta.model";
const META_SEED: &str = "meta.seed";
const META_ITERATION: &str = "meta.iteration";

impl ModelMeta {
    pub fn generator_config(&self) -> crate::network::GeneratorConfig {
        crate::network::GeneratorConfig {
            features: self.features,
            blocks: self.blocks,
            input_mode: self.input_mode,
        }
    }

    pub fn discriminator_config(&self) -> crate::network::DiscriminatorConfig {
        crate::network::DiscriminatorConfig {
            base_channels: self.disc_base_channels,
        }
    }

    fn to_named(self) -> NamedTensor {
        let mode = match self.input_mode {
            InputMode::Pixels => 0.0,
            InputMode::Wavelet => 1.0,
        };
        NamedTensor::new(
            META_MODEL,
            vec![4],
            vec![
                self.features as f32,
                self.blocks as f32,
                mode,
                self.disc_base_channels as f32,
            ],
        )
    }

    fn from_entries(entries: &[NamedTensor]) -> Result<ModelMeta> {
        let e = find_entry(entries, META_MODEL)?;
        if e.data.len() != 4 {
            return Err(Error::dimension(format!(
                "{META_MODEL:?} needs 4 values, got {}",
                e.data.len()
            )));
        }
        let input_mode = match e.data[2] {
            v if v == 0.0 => InputMode::Pixels,
            v if v == 1.0 => InputMode::Wavelet,
            v => {
                return Err(Error::dimension(format!(
                    "{META_MODEL:?} has unknown input mode code {v}"
                )))
            }
        };
        Ok(ModelMeta {
            features: e.data[0] as usize,
            blocks: e.data[1] as usize,
            input_mode,
            disc_base_channels: e.data[3] as usize,
        })
    }
}

fn find_entry<'a>(entries: &'a [NamedTensor], name: &str) -> Result<&'a NamedTensor> {
    entries
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::dimension(format!("checkpoint is missing tensor {name:?}")))
}

/// Loss record of one completed iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// 1-based index of the completed iteration.
    pub iteration: u64,
    pub l_d: f64,
    pub l_content: f64,
    pub l_adv: f64,
    pub l_wavelet: f64,
    pub l_total: f64,
}

impl StepStats {
    pub fn csv_header() -> &'static str {
        "iter,l_d,l_c,l_a,l_wavelet,l_total"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.l_d, self.l_content, self.l_adv, self.l_wavelet, self.l_total
        )
    }

    fn check_finite(&self) -> Result<()> {
        let vals = [
            ("l_d", self.l_d),
            ("l_c", self.l_content),
            ("l_a", self.l_adv),
            ("l_wavelet", self.l_wavelet),
            ("l_total", self.l_total),
        ];
        if vals.iter().all(|(_, v)| v.is_finite()) {
            return Ok(());
        }
        let details = vals
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ");
        Err(Error::non_finite(
            format!("training iteration {}", self.iteration),
            details,
        ))
    }
}

/// Result of an audited step: proof that the alternating updates stayed in
/// their lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditReport {
    /// Generator parameters were bit-identical across the discriminator
    /// update.
    pub generator_unchanged_by_d_step: bool,
    /// Discriminator parameters were bit-identical across the generator
    /// update (including its discriminator forward/backward pass).
    pub discriminator_unchanged_by_g_step: bool,
    /// Wavelet bands per color channel in the HR coefficient target.
    pub hr_bands_per_color: usize,
}

/// Alternating trainer: owns both networks, their optimizer states, the
/// content-loss extractor, and the batch sampler.
pub struct Trainer {
    config: TrainConfig,
    generator: Generator,
    discriminator: Discriminator,
    extractor: FeatureExtractor,
    opt_g: AdamState,
    opt_d: AdamState,
    sampler: CropSampler,
    iteration: u64,
}

impl Trainer {
    /// Fresh trainer with He-initialized networks derived from the config
    /// seed.
    pub fn new(config: TrainConfig, dataset: Dataset) -> Result<Trainer> {
        config.validate()?;
        let generator = Generator::init(config.generator_config(), config.seed);
        let discriminator =
            Discriminator::init(config.discriminator_config(), config.seed.wrapping_add(1));
        let extractor = build_extractor(&config)?;
        let sampler = CropSampler::new(dataset, config.crop_size, config.seed)?;
        Ok(Trainer {
            config,
            generator,
            discriminator,
            extractor,
            opt_g: AdamState::new(),
            opt_d: AdamState::new(),
            sampler,
            iteration: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    /// Completed iterations so far.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Total iterations this run should reach: the iteration budget, or the
    /// epoch budget converted at ⌈dataset/batch⌉ steps per epoch.
    pub fn target_iterations(&self) -> u64 {
        if self.config.iterations > 0 {
            self.config.iterations
        } else {
            let steps =
                (self.sampler.dataset().len() as u64).div_ceil(self.config.batch_size as u64);
            self.config.epochs * steps.max(1)
        }
    }

    fn adam_hp(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.config.learning_rate,
            beta1: self.config.adam_beta1,
            beta2: self.config.adam_beta2,
            eps: self.config.adam_eps,
        }
    }

    /// Runs one alternating iteration (discriminator step, then generator
    /// step) on batch `self.iteration`.
    pub fn train_step(&mut self) -> Result<StepStats> {
        Ok(self.step_impl(false)?.0)
    }

    /// Like `train_step`, but also verifies update isolation.
    pub fn train_step_audited(&mut self) -> Result<(StepStats, AuditReport)> {
        let (stats, report) = self.step_impl(true)?;
        Ok((stats, report.expect("audit requested")))
    }

    fn step_impl(&mut self, audit: bool) -> Result<(StepStats, Option<AuditReport>)> {
        let hp = self.adam_hp();
        let weights = self.config.loss_weights();
        let (lr, hr) = self
            .sampler
            .batch(self.iteration, self.config.batch_size)?;

        // --- Discriminator step (generator frozen) ---
        let gen_snap = audit.then(|| self.generator.snapshot());
        let fake = self.generator.sr_reconstruct(&lr)?;
        self.discriminator.zero_grad();
        let (tape_real, p_real) = self.discriminator.forward_tape(&hr)?;
        let (tape_fake, p_fake) = self.discriminator.forward_tape(&fake)?;
        let l_d = discriminator_loss(&p_real, &p_fake)?;
        let (g_real, g_fake) = discriminator_loss_backward(&p_real, &p_fake)?;
        self.discriminator.backward(&tape_real, &g_real)?;
        self.discriminator.backward(&tape_fake, &g_fake)?;
        self.opt_d.update(&mut self.discriminator, &hp)?;
        let generator_unchanged =
            gen_snap.map(|snap| snap == self.generator.snapshot());

        // --- Generator step (discriminator frozen) ---
        let disc_snap = audit.then(|| self.discriminator.snapshot());
        let hr_coeffs = wavelet::wpt2_packed(&hr)?;
        self.generator.zero_grad();
        let (tape_g, coeffs) = self.generator.forward_tape(&lr)?;
        let sr = wavelet::iwpt2_packed(&coeffs)?;

        let l_content = content_loss(&sr, &hr, &self.extractor)?;
        let g_sr_content = content_loss_backward(&sr, &hr, &self.extractor)?;

        let (tape_d, p_sr) = self.discriminator.forward_tape(&sr)?;
        let l_adv = adversarial_loss_g(&p_sr);
        let g_probs = adversarial_loss_g_backward(&p_sr);
        let g_sr_adv = self.discriminator.backward_input_only(&tape_d, &g_probs)?;

        let l_wavelet = wavelet_loss(&coeffs, &hr_coeffs, &weights.alpha)?;
        let g_coeff_wavelet = wavelet_loss_backward(&coeffs, &hr_coeffs, &weights.alpha)?;

        let l_total =
            l_content + weights.lambda_adv * l_adv + weights.lambda_wavelet * l_wavelet;
        let stats = StepStats {
            iteration: self.iteration + 1,
            l_d,
            l_content,
            l_adv,
            l_wavelet,
            l_total,
        };
        stats.check_finite()?;

        // Pull the image-space gradient back through the inverse transform
        // and add the coefficient-space wavelet gradient.
        let g_sr = g_sr_content.add(&g_sr_adv.scale(weights.lambda_adv)?)?;
        let g_coeffs = wavelet::iwpt2_packed_backward(&g_sr)?
            .add(&g_coeff_wavelet.scale(weights.lambda_wavelet)?)?;
        self.generator.backward(&tape_g, &g_coeffs)?;
        self.opt_g.update(&mut self.generator, &hp)?;
        let discriminator_unchanged =
            disc_snap.map(|snap| snap == self.discriminator.snapshot());

        self.iteration += 1;
        let report = audit.then(|| AuditReport {
            generator_unchanged_by_d_step: generator_unchanged.unwrap_or(false),
            discriminator_unchanged_by_g_step: discriminator_unchanged.unwrap_or(false),
            hr_bands_per_color: hr_coeffs.shape()[1] / hr.shape()[1],
        });
        Ok((stats, report))
    }

    fn model_meta(&self) -> ModelMeta {
        ModelMeta {
            features: self.config.features,
            blocks: self.config.blocks,
            input_mode: self.config.input_mode,
            disc_base_channels: self.config.disc_base_channels,
        }
    }

    /// Writes the full training state: metadata, both networks, and both
    /// optimizer states.
    pub fn save_checkpoint(&mut self, path: &Path) -> Result<()> {
        let mut entries = vec![
            NamedTensor::new(META_SEED, vec![4], encode_u64(self.config.seed)),
            NamedTensor::new(META_ITERATION, vec![4], encode_u64(self.iteration)),
            self.model_meta().to_named(),
        ];
        collect_params(&mut self.generator, &mut entries);
        collect_params(&mut self.discriminator, &mut entries);
        entries.extend(self.opt_g.to_named_tensors("opt_g"));
        entries.extend(self.opt_d.to_named_tensors("opt_d"));
        checkpoint::write_tensor_file(path, &entries)
    }

    /// Rebuilds a trainer from a checkpoint plus the original config.
    /// Model shape and seed must match what the checkpoint records.
    pub fn resume(config: TrainConfig, dataset: Dataset, path: &Path) -> Result<Trainer> {
        config.validate()?;
        let entries = checkpoint::read_tensor_file(path)?;
        let meta = ModelMeta::from_entries(&entries)?;
        let expected = ModelMeta {
            features: config.features,
            blocks: config.blocks,
            input_mode: config.input_mode,
            disc_base_channels: config.disc_base_channels,
        };
        if meta != expected {
            return Err(Error::config(format!(
                "checkpoint model {meta:?} does not match config model {expected:?}"
            )));
        }
        let seed = decode_u64(&find_entry(&entries, META_SEED)?.data)?;
        if seed != config.seed {
            return Err(Error::config(format!(
                "checkpoint was trained with seed {seed}, config says {}",
                config.seed
            )));
        }
        let iteration = decode_u64(&find_entry(&entries, META_ITERATION)?.data)?;

        let mut generator = Generator::zeros(meta.generator_config());
        apply_params(&mut generator, &entries)?;
        let mut discriminator = Discriminator::zeros(meta.discriminator_config());
        apply_params(&mut discriminator, &entries)?;
        let extractor = build_extractor(&config)?;
        let sampler = CropSampler::new(dataset, config.crop_size, config.seed)?;
        Ok(Trainer {
            config,
            generator,
            discriminator,
            extractor,
            opt_g: AdamState::from_named_tensors("opt_g", &entries)?,
            opt_d: AdamState::from_named_tensors("opt_d", &entries)?,
            sampler,
            iteration,
        })
    }
}

fn build_extractor(config: &TrainConfig) -> Result<FeatureExtractor> {
    match &config.extractor {
        ExtractorChoice::Fixed => Ok(FeatureExtractor::fixed(config.extractor_seed)),
        ExtractorChoice::Identity => Ok(FeatureExtractor::identity()),
        ExtractorChoice::File(path) => FeatureExtractor::from_file(path),
    }
}

fn collect_params(model: &mut dyn HasParams, entries: &mut Vec<NamedTensor>) {
    model.for_each_param(&mut |name, extents, values, _| {
        entries.push(NamedTensor::from_f64(name, extents.to_vec(), values));
    });
}

fn apply_params(model: &mut dyn HasParams, entries: &[NamedTensor]) -> Result<()> {
    let by_name: BTreeMap<&str, &NamedTensor> =
        entries.iter().map(|e| (e.name.as_str(), e)).collect();
    let mut failure: Option<Error> = None;
    model.for_each_param(&mut |name, extents, values, _| {
        if failure.is_some() {
            return;
        }
        let Some(e) = by_name.get(name) else {
            failure = Some(Error::dimension(format!(
                "checkpoint is missing tensor {name:?}"
            )));
            return;
        };
        if e.extents != extents || e.data.len() != values.len() {
            failure = Some(Error::dimension(format!(
                "checkpoint tensor {name:?} has extents {:?}, model expects {extents:?}",
                e.extents
            )));
            return;
        }
        for (dst, &src) in values.iter_mut().zip(&e.data) {
            *dst = src as f64;
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Loads just the generator (plus metadata) from a checkpoint — everything
/// inference needs.
pub fn load_generator(path: &Path) -> Result<(Generator, ModelMeta, u64)> {
    let entries = checkpoint::read_tensor_file(path)?;
    let meta = ModelMeta::from_entries(&entries)?;
    let iteration = decode_u64(&find_entry(&entries, META_ITERATION)?.data)?;
    let mut generator = Generator::zeros(meta.generator_config());
    apply_params(&mut generator, &entries)?;
    Ok((generator, meta, iteration))
}
