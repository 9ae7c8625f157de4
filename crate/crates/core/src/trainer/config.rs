//! Training configuration: every hyperparameter and sizing knob, losslessly
//! serializable to a `key = value` config file. Unknown keys are errors —
//! a typo must never silently fall back to a default.

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::network::{DiscriminatorConfig, GeneratorConfig, InputMode};
use crate::wavelet::BAND_COUNT;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Which content-loss feature extractor to build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractorChoice {
    /// Frozen random conv stack drawn from `extractor_seed`.
    Fixed,
    /// Identity features (content loss = pixel MSE).
    Identity,
    /// Weights from a WSR1 tensor file.
    File(PathBuf),
}

impl ExtractorChoice {
    fn as_string(&self) -> String {
        match self {
            ExtractorChoice::Fixed => "fixed".to_string(),
            ExtractorChoice::Identity => "identity".to_string(),
            ExtractorChoice::File(p) => p.display().to_string(),
        }
    }

    fn parse(s: &str) -> Self {
        match s {
            "fixed" => ExtractorChoice::Fixed,
            "identity" => ExtractorChoice::Identity,
            other => ExtractorChoice::File(PathBuf::from(other)),
        }
    }
}

/// The full training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Iteration budget; 0 defers to `epochs`.
    pub iterations: u64,
    /// Epoch budget (one epoch = ⌈dataset/batch⌉ steps); used when
    /// `iterations` is 0.
    pub epochs: u64,
    pub seed: u64,
    pub lambda_adv: f64,
    pub lambda_wavelet: f64,
    /// Per-band wavelet-loss weights (16 entries).
    pub alpha: Vec<f64>,
    /// Generator trunk width F.
    pub features: usize,
    /// Generator residual block count B.
    pub blocks: usize,
    pub input_mode: InputMode,
    pub disc_base_channels: usize,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub crop_size: usize,
    /// Upscaling factor; fixed at 4.
    pub scale: usize,
    /// A checkpoint is written every this many iterations (0 = final only).
    pub checkpoint_interval: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub extractor: ExtractorChoice,
    pub extractor_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            batch_size: 16,
            iterations: 500,
            epochs: 1,
            seed: 0,
            lambda_adv: 1e-3,
            lambda_wavelet: 1.0,
            alpha: vec![1.0; BAND_COUNT],
            features: 64,
            blocks: 8,
            input_mode: InputMode::Pixels,
            disc_base_channels: 32,
            dataset: PathBuf::new(),
            out_dir: PathBuf::from("train-out"),
            crop_size: 88,
            scale: 4,
            checkpoint_interval: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            extractor: ExtractorChoice::Fixed,
            extractor_seed: 77,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.scale != 4 {
            return Err(Error::config(format!(
                "scale is fixed at 4, got {}",
                self.scale
            )));
        }
        if self.crop_size % 4 != 0 || self.crop_size < 8 {
            return Err(Error::config(format!(
                "crop_size must be a multiple of 4 and at least 8, got {}",
                self.crop_size
            )));
        }
        if self.iterations == 0 && self.epochs == 0 {
            return Err(Error::config("iterations and epochs cannot both be 0"));
        }
        if self.features == 0 || self.blocks == 0 {
            return Err(Error::config("features and blocks must be positive"));
        }
        if self.disc_base_channels == 0 {
            return Err(Error::config("disc_base_channels must be positive"));
        }
        self.loss_weights().validate()
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            features: self.features,
            blocks: self.blocks,
            input_mode: self.input_mode,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            base_channels: self.disc_base_channels,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_adv: self.lambda_adv,
            lambda_wavelet: self.lambda_wavelet,
            alpha: self.alpha.clone(),
        }
    }

    /// Serializes as `key = value` lines; `parse` inverts this losslessly.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let alpha = self
            .alpha
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("learning_rate", self.learning_rate.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("iterations", self.iterations.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("lambda_adv", self.lambda_adv.to_string());
        kv("lambda_wavelet", self.lambda_wavelet.to_string());
        kv("alpha", alpha);
        kv("features", self.features.to_string());
        kv("blocks", self.blocks.to_string());
        kv("input_mode", self.input_mode.as_str().to_string());
        kv("disc_base_channels", self.disc_base_channels.to_string());
        kv("dataset", self.dataset.display().to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("crop_size", self.crop_size.to_string());
        kv("scale", self.scale.to_string());
        kv("checkpoint_interval", self.checkpoint_interval.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("extractor", self.extractor.as_string());
        kv("extractor_seed", self.extractor_seed.to_string());
        s
    }

    /// Parses the config-file format: one `key = value` per line, `#`
    /// comments, blank lines ignored, unknown keys rejected by name.
    pub fn parse(text: &str) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            c.apply(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Sets one key from its string form (shared by file parsing and CLI
    /// overrides).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::config(format!("key {key:?}: invalid value {value:?}: {e}")))
        }
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "lambda_adv" => self.lambda_adv = num(key, value)?,
            "lambda_wavelet" => self.lambda_wavelet = num(key, value)?,
            "alpha" => {
                self.alpha = value
                    .split(',')
                    .map(|v| num("alpha", v.trim()))
                    .collect::<Result<Vec<f64>>>()?;
                if self.alpha.len() != BAND_COUNT {
                    return Err(Error::config(format!(
                        "key \"alpha\": needs {BAND_COUNT} comma-separated values, got {}",
                        self.alpha.len()
                    )));
                }
            }
            "features" => self.features = num(key, value)?,
            "blocks" => self.blocks = num(key, value)?,
            "input_mode" => self.input_mode = InputMode::parse(value)?,
            "disc_base_channels" => self.disc_base_channels = num(key, value)?,
            "dataset" => self.dataset = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "crop_size" => self.crop_size = num(key, value)?,
            "scale" => self.scale = num(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = num(key, value)?,
            "adam_beta1" => self.adam_beta1 = num(key, value)?,
            "adam_beta2" => self.adam_beta2 = num(key, value)?,
            "adam_eps" => self.adam_eps = num(key, value)?,
            "extractor" => self.extractor = ExtractorChoice::parse(value),
            "extractor_seed" => self.extractor_seed = num(key, value)?,
            other => {
                return Err(Error::config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::file(path, format!("cannot read config: {e}")))?;
        TrainConfig::parse(&text)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.serialize())
            .map_err(|e| Error::file(path, format!("cannot write config: {e}")))
    }
}
