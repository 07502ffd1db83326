//! Trained-model checkpoints (JSON): family, system, coordinate system,
//! layer sizes, per-layer weights/biases, and enough run metadata to
//! re-evaluate the model (training split, penalty weight, seeds). Floats go
//! through serde_json's shortest-round-trip representation, so saving and
//! loading is lossless.

use crate::error::{io_err, CliError, Result};
use hamreg_core::models::{ModelFamily, ModelSpec};
use hamreg_core::nn::{Layer, MlpParams};
use hamreg_core::physics::SystemId;
use hamreg_core::training::Split;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub family: String,
    pub system: String,
    pub coords: String,
    pub split: String,
    pub layer_sizes: Vec<usize>,
    pub lambda_h: f64,
    /// Weight-initialization seed of the training run.
    pub seed: u64,
    /// Seed the training dataset's initial conditions were drawn with.
    pub data_seed: u64,
    pub diverged: bool,
    /// Row-major weight matrices, one per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// A loaded checkpoint: the model plus its run metadata.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelSpec,
    pub split: Split,
    pub lambda_h: f64,
    pub seed: u64,
    pub data_seed: u64,
    pub diverged: bool,
}

pub fn to_file(ck: &Checkpoint) -> CheckpointFile {
    let spec = &ck.model;
    CheckpointFile {
        family: spec.family.name().into(),
        system: spec.system.name().into(),
        coords: spec.coords().name().into(),
        split: ck.split.name().into(),
        layer_sizes: spec.params.layer_sizes(),
        lambda_h: ck.lambda_h,
        seed: ck.seed,
        data_seed: ck.data_seed,
        diverged: ck.diverged,
        weights: spec.params.layers.iter().map(|l| l.w.clone()).collect(),
        biases: spec.params.layers.iter().map(|l| l.b.clone()).collect(),
    }
}

pub fn from_file(file: &CheckpointFile) -> Result<Checkpoint> {
    let family = ModelFamily::parse(&file.family)
        .ok_or_else(|| CliError::Config(format!("unknown family {:?}", file.family)))?;
    let system = SystemId::parse(&file.system)
        .ok_or_else(|| CliError::Config(format!("unknown system {:?}", file.system)))?;
    let split = Split::parse(&file.split)
        .ok_or_else(|| CliError::Config(format!("unknown split {:?}", file.split)))?;
    if file.coords != family.coords().name() {
        return Err(CliError::Config(format!(
            "checkpoint coords {:?} do not match family {}",
            file.coords,
            family.name()
        )));
    }
    if file.weights.len() != file.layer_sizes.len().saturating_sub(1)
        || file.biases.len() != file.weights.len()
    {
        return Err(CliError::Config("checkpoint layer count mismatch".into()));
    }
    let mut layers = Vec::with_capacity(file.weights.len());
    for (i, (w, b)) in file.weights.iter().zip(&file.biases).enumerate() {
        layers.push(Layer {
            rows: file.layer_sizes[i + 1],
            cols: file.layer_sizes[i],
            w: w.clone(),
            b: b.clone(),
        });
    }
    let model = ModelSpec::new(family, system, MlpParams { layers })?;
    Ok(Checkpoint {
        model,
        split,
        lambda_h: file.lambda_h,
        seed: file.seed,
        data_seed: file.data_seed,
        diverged: file.diverged,
    })
}

pub fn save(path: &Path, ck: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string_pretty(&to_file(ck))
        .map_err(|e| CliError::Config(format!("checkpoint serialization: {e}")))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| crate::error::parse_err(path, e.line(), e.to_string()))?;
    from_file(&file)
}
