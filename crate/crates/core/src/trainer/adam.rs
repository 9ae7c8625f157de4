//! Adam optimizer with bias correction and f32 write-through.
//!
//! After every step, parameters and both moment buffers are rounded to the
//! nearest f32 and kept at that value. Checkpoints store f32, so this makes
//! save → load → continue produce *bit-identical* trajectories to an
//! uninterrupted run: the optimizer never holds precision that a checkpoint
//! would drop.

use crate::error::{Error, Result};
use crate::network::HasParams;
use crate::trainer::checkpoint::{decode_u64, encode_u64, NamedTensor};
use std::collections::BTreeMap;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct MomentPair {
    extents: Vec<usize>,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimizer state: step counter plus first/second moment buffers keyed by
/// parameter name. Buffers are created lazily on first update so the state
/// can be built before the model, or restored from a checkpoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    step: u64,
    moments: BTreeMap<String, MomentPair>,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one Adam step to every parameter the model exposes, using the
    /// gradients currently stored next to the values.
    pub fn update(&mut self, model: &mut dyn HasParams, hp: &AdamParams) -> Result<()> {
        self.step += 1;
        let bc1 = 1.0 - hp.beta1.powi(self.step as i32);
        let bc2 = 1.0 - hp.beta2.powi(self.step as i32);
        let moments = &mut self.moments;
        let mut failure: Option<Error> = None;
        model.for_each_param(&mut |name, extents, value, grad| {
            if failure.is_some() {
                return;
            }
            let entry = moments
                .entry(name.to_string())
                .or_insert_with(|| MomentPair {
                    extents: extents.to_vec(),
                    m: vec![0.0; value.len()],
                    v: vec![0.0; value.len()],
                });
            if entry.m.len() != value.len() {
                failure = Some(Error::dimension(format!(
                    "optimizer state for {name:?} has {} elements, parameter has {}",
                    entry.m.len(),
                    value.len()
                )));
                return;
            }
            for i in 0..value.len() {
                let g = grad[i];
                entry.m[i] = hp.beta1 * entry.m[i] + (1.0 - hp.beta1) * g;
                entry.v[i] = hp.beta2 * entry.v[i] + (1.0 - hp.beta2) * g * g;
                let m_hat = entry.m[i] / bc1;
                let v_hat = entry.v[i] / bc2;
                value[i] -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.eps);
                value[i] = value[i] as f32 as f64;
                entry.m[i] = entry.m[i] as f32 as f64;
                entry.v[i] = entry.v[i] as f32 as f64;
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Exports the state as named tensors: `{prefix}.step` (u64 limbs) plus
    /// `{prefix}.{param}.m` / `.v` per parameter, in sorted order.
    pub fn to_named_tensors(&self, prefix: &str) -> Vec<NamedTensor> {
        let mut out = vec![NamedTensor::new(
            format!("{prefix}.step"),
            vec![4],
            encode_u64(self.step),
        )];
        for (name, pair) in &self.moments {
            out.push(NamedTensor::from_f64(
                format!("{prefix}.{name}.m"),
                pair.extents.clone(),
                &pair.m,
            ));
            out.push(NamedTensor::from_f64(
                format!("{prefix}.{name}.v"),
                pair.extents.clone(),
                &pair.v,
            ));
        }
        out
    }

    /// Rebuilds state from checkpoint entries. Entries outside `prefix` are
    /// ignored; a `.m` without its `.v` (or vice versa) is an error.
    pub fn from_named_tensors(prefix: &str, entries: &[NamedTensor]) -> Result<AdamState> {
        let dot_prefix = format!("{prefix}.");
        let step_key = format!("{prefix}.step");
        let mut step = None;
        let mut halves: BTreeMap<String, (Option<&NamedTensor>, Option<&NamedTensor>)> =
            BTreeMap::new();
        for e in entries {
            if e.name == step_key {
                step = Some(decode_u64(&e.data)?);
                continue;
            }
            let Some(rest) = e.name.strip_prefix(&dot_prefix) else {
                continue;
            };
            if let Some(param) = rest.strip_suffix(".m") {
                halves.entry(param.to_string()).or_default().0 = Some(e);
            } else if let Some(param) = rest.strip_suffix(".v") {
                halves.entry(param.to_string()).or_default().1 = Some(e);
            } else {
                return Err(Error::dimension(format!(
                    "unrecognized optimizer entry {:?}",
                    e.name
                )));
            }
        }
        let step = step
            .ok_or_else(|| Error::dimension(format!("missing optimizer entry {step_key:?}")))?;
        let mut moments = BTreeMap::new();
        for (param, (m, v)) in halves {
            let (m, v) = match (m, v) {
                (Some(m), Some(v)) => (m, v),
                _ => {
                    return Err(Error::dimension(format!(
                        "optimizer moments for {param:?} are incomplete"
                    )))
                }
            };
            if m.extents != v.extents || m.data.len() != v.data.len() {
                return Err(Error::dimension(format!(
                    "optimizer moments for {param:?} disagree in shape"
                )));
            }
            moments.insert(
                param,
                MomentPair {
                    extents: m.extents.clone(),
                    m: m.to_f64(),
                    v: v.to_f64(),
                },
            );
        }
        Ok(AdamState { step, moments })
    }
}
