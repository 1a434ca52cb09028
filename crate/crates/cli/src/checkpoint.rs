//! Self-describing JSON checkpoint.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "hidden": 40, "horizon": 70, "layers": 2, "input_dim": 6,
//!   "gate_order": "ifgo",
//!   "tensors": [{ "name": "layer1.w_ih", "shape": [160, 6], "data": [...] }, ...],
//!   "norm": { "channels": [...], "mean": [...], "std": [...] },
//!   "train_config": { "learning_rate": 0.0005, ... }
//! }
//! ```
//!
//! Matrices are row-major. Gate blocks inside every `4H` dimension are stacked
//! input, forget, cell, output.

use std::fs;
use std::io::Write;
use std::path::Path;

use gripcast_core::dataset::{CHANNEL_NAMES, HORIZON, WRENCH_CHANNELS};
use gripcast_core::lstm::{GATE_ORDER, LAYERS};
use gripcast_core::{Matrix, ModelParams, NormStats, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// Tensor names in file order.
pub const TENSOR_NAMES: [&str; 8] = [
    "layer1.w_ih",
    "layer1.w_hh",
    "layer1.b",
    "layer2.w_ih",
    "layer2.w_hh",
    "layer2.b",
    "head.w",
    "head.b",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormRecord {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// [`TrainConfig`] as stored in checkpoints and accepted by `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfigRecord {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub clip_threshold: Option<f64>,
    pub hidden: usize,
}

impl From<&TrainConfig> for TrainConfigRecord {
    fn from(c: &TrainConfig) -> Self {
        TrainConfigRecord {
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            epochs: c.epochs,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            adam_eps: c.adam_eps,
            seed: c.seed,
            clip_threshold: c.clip_threshold,
            hidden: c.hidden,
        }
    }
}

impl From<TrainConfigRecord> for TrainConfig {
    fn from(r: TrainConfigRecord) -> Self {
        TrainConfig {
            learning_rate: r.learning_rate,
            batch_size: r.batch_size,
            epochs: r.epochs,
            adam_beta1: r.adam_beta1,
            adam_beta2: r.adam_beta2,
            adam_eps: r.adam_eps,
            seed: r.seed,
            clip_threshold: r.clip_threshold,
            hidden: r.hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub hidden: usize,
    pub horizon: usize,
    pub layers: usize,
    pub input_dim: usize,
    pub gate_order: String,
    pub tensors: Vec<Tensor>,
    pub norm: NormRecord,
    pub train_config: TrainConfigRecord,
}

fn matrix_shape(m: &Matrix) -> Vec<usize> {
    vec![m.rows(), m.cols()]
}

impl Checkpoint {
    pub fn new(params: &ModelParams, config: &TrainConfig) -> CliResult<Self> {
        params
            .validate()
            .map_err(|e| CliError::Internal(format!("refusing to save invalid model: {e}")))?;
        let shapes = [
            matrix_shape(&params.layer1.w_ih),
            matrix_shape(&params.layer1.w_hh),
            vec![params.layer1.b.len()],
            matrix_shape(&params.layer2.w_ih),
            matrix_shape(&params.layer2.w_hh),
            vec![params.layer2.b.len()],
            matrix_shape(&params.head_w),
            vec![params.head_b.len()],
        ];
        let tensors = TENSOR_NAMES
            .iter()
            .zip(shapes)
            .zip(params.slices())
            .map(|((name, shape), data)| Tensor {
                name: name.to_string(),
                shape,
                data: data.to_vec(),
            })
            .collect();
        Ok(Checkpoint {
            format_version: FORMAT_VERSION,
            hidden: params.hidden(),
            horizon: params.horizon(),
            layers: LAYERS,
            input_dim: WRENCH_CHANNELS,
            gate_order: GATE_ORDER.to_string(),
            tensors,
            norm: NormRecord {
                channels: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
                mean: params.norm.mean.to_vec(),
                std: params.norm.std.to_vec(),
            },
            train_config: config.into(),
        })
    }

    /// Rebuilds the model, checking every declared shape and convention.
    pub fn to_model(&self) -> CliResult<(ModelParams, TrainConfig)> {
        let bad = |msg: String| CliError::Data(format!("checkpoint: {msg}"));
        if self.format_version != FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.gate_order != GATE_ORDER {
            return Err(bad(format!("gate_order `{}`, expected `{GATE_ORDER}`", self.gate_order)));
        }
        if self.horizon != HORIZON || self.layers != LAYERS || self.input_dim != WRENCH_CHANNELS {
            return Err(bad(format!(
                "horizon/layers/input_dim {}/{}/{}, expected {HORIZON}/{LAYERS}/{WRENCH_CHANNELS}",
                self.horizon, self.layers, self.input_dim
            )));
        }
        if self.hidden == 0 {
            return Err(bad("hidden must be at least 1".into()));
        }
        let names: Vec<&str> = self.tensors.iter().map(|t| t.name.as_str()).collect();
        if names != TENSOR_NAMES {
            return Err(bad(format!("tensors {names:?}, expected {TENSOR_NAMES:?}")));
        }
        let mut params = ModelParams::zeros(self.hidden);
        let template = params.clone();
        let expected = [
            matrix_shape(&template.layer1.w_ih),
            matrix_shape(&template.layer1.w_hh),
            vec![template.layer1.b.len()],
            matrix_shape(&template.layer2.w_ih),
            matrix_shape(&template.layer2.w_hh),
            vec![template.layer2.b.len()],
            matrix_shape(&template.head_w),
            vec![template.head_b.len()],
        ];
        for ((t, want), dst) in self.tensors.iter().zip(&expected).zip(params.slices_mut()) {
            if &t.shape != want {
                return Err(bad(format!("{}: shape {:?}, expected {want:?}", t.name, t.shape)));
            }
            if t.data.len() != dst.len() {
                return Err(bad(format!(
                    "{}: {} values for shape {:?}",
                    t.name,
                    t.data.len(),
                    t.shape
                )));
            }
            dst.copy_from_slice(&t.data);
        }
        let channels: Vec<&str> = self.norm.channels.iter().map(String::as_str).collect();
        if channels != CHANNEL_NAMES || self.norm.mean.len() != 7 || self.norm.std.len() != 7 {
            return Err(bad(format!("norm must list channels {CHANNEL_NAMES:?} with 7 means and stds")));
        }
        params.norm = NormStats {
            mean: self.norm.mean.as_slice().try_into().expect("length checked"),
            std: self.norm.std.as_slice().try_into().expect("length checked"),
        };
        params.validate().map_err(|e| bad(e.to_string()))?;
        let config: TrainConfig = self.train_config.clone().into();
        Ok((params, config))
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("checkpoint: {e}")))
    }
}

pub fn save_model(path: &Path, params: &ModelParams, config: &TrainConfig) -> CliResult<()> {
    let json = Checkpoint::new(params, config)?.to_json()?;
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(json.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> CliResult<(ModelParams, TrainConfig)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Checkpoint::from_json(&text)
        .and_then(|c| c.to_model())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Partial [`TrainConfig`] read from `--config`; absent keys keep defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub seed: Option<u64>,
    pub clip_threshold: Option<f64>,
    pub hidden: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(learning_rate, batch_size, epochs, adam_beta1, adam_beta2, adam_eps, seed, hidden);
        if self.clip_threshold.is_some() {
            c.clip_threshold = self.clip_threshold;
        }
        c
    }
}

pub fn load_config(path: &Path) -> CliResult<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg = ConfigOverrides::from_json(&text)?.apply(TrainConfig::default());
    cfg.validate()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}
