use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::data::{TwoFactorParams, DEFAULT_ANGLES};
use crate::error::{Error, Result};
use crate::model::{DecoderFamily, ModelSpec, TripletLikelihood, Variant};
use crate::numerics::{Algorithm, OptimizerConfig};
use crate::oracle::{AnswerMode, OracleConfig, Query, QueryKind};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Twofactor,
    Mnist,
    Yale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Deterministic,
    Stochastic,
}

/// Fully resolved run configuration. The JSON form uses flat dotted keys;
/// every key is optional in a config file and falls back to its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,

    #[serde(rename = "data.kind")]
    pub data_kind: DataKind,
    /// Rows generated (two-factor).
    #[serde(rename = "data.n")]
    pub data_n: usize,
    /// Held-out rows (two-factor, Yale) or trajectories (MNIST).
    #[serde(rename = "data.n_test")]
    pub data_n_test: usize,
    #[serde(rename = "data.image_size")]
    pub data_image_size: usize,
    #[serde(rename = "data.pixel_noise")]
    pub data_pixel_noise: f64,
    #[serde(rename = "data.mnist_images")]
    pub data_mnist_images: PathBuf,
    #[serde(rename = "data.mnist_labels")]
    pub data_mnist_labels: PathBuf,
    #[serde(rename = "data.per_class")]
    pub data_per_class: usize,
    #[serde(rename = "data.angles")]
    pub data_angles: Vec<f64>,
    #[serde(rename = "data.yale_dir")]
    pub data_yale_dir: PathBuf,
    #[serde(rename = "data.resolution")]
    pub data_resolution: usize,

    #[serde(rename = "oracle.queries")]
    pub oracle_queries: Vec<String>,
    /// Training triplets per query.
    #[serde(rename = "oracle.k")]
    pub oracle_k: usize,
    /// Held-out triplets per query, drawn over test rows.
    #[serde(rename = "oracle.k_test")]
    pub oracle_k_test: usize,
    #[serde(rename = "oracle.noise")]
    pub oracle_noise: f64,
    #[serde(rename = "oracle.mode")]
    pub oracle_mode: OracleMode,
    #[serde(rename = "oracle.temperature")]
    pub oracle_temperature: f64,

    #[serde(rename = "model.variant")]
    pub model_variant: Variant,
    #[serde(rename = "model.likelihood")]
    pub model_likelihood: TripletLikelihood,
    #[serde(rename = "model.latent_dim")]
    pub model_latent_dim: usize,
    #[serde(rename = "model.hidden")]
    pub model_hidden: Vec<usize>,
    #[serde(rename = "model.decoder")]
    pub model_decoder: DecoderFamily,
    #[serde(rename = "model.triplet_weight")]
    pub model_triplet_weight: f64,

    #[serde(rename = "train.batch_size")]
    pub train_batch_size: usize,
    #[serde(rename = "train.triplet_batch")]
    pub train_triplet_batch: usize,
    #[serde(rename = "train.mc_samples")]
    pub train_mc_samples: usize,
    #[serde(rename = "train.steps")]
    pub train_steps: u64,
    #[serde(rename = "train.optimizer")]
    pub train_optimizer: Algorithm,
    #[serde(rename = "train.learning_rate")]
    pub train_learning_rate: f64,
    #[serde(rename = "train.beta1")]
    pub train_beta1: f64,
    #[serde(rename = "train.beta2")]
    pub train_beta2: f64,
    #[serde(rename = "train.decay")]
    pub train_decay: f64,
    #[serde(rename = "train.momentum")]
    pub train_momentum: f64,
    #[serde(rename = "train.epsilon")]
    pub train_epsilon: f64,
    #[serde(rename = "train.clip_norm")]
    pub train_clip_norm: Option<f64>,
    #[serde(rename = "train.log_every")]
    pub train_log_every: u64,
    #[serde(rename = "train.checkpoint_every")]
    pub train_checkpoint_every: Option<u64>,

    #[serde(rename = "eval.mask_threshold")]
    pub eval_mask_threshold: f64,
    #[serde(rename = "sample.count")]
    pub sample_count: usize,
    /// Test-row index of the image whose `recombine.from_a` features are kept.
    #[serde(rename = "recombine.a")]
    pub recombine_a: usize,
    #[serde(rename = "recombine.b")]
    pub recombine_b: usize,
    #[serde(rename = "recombine.from_a")]
    pub recombine_from_a: String,
    #[serde(rename = "recombine.from_b")]
    pub recombine_from_b: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tf = TwoFactorParams::default();
        let opt = OptimizerConfig::default();
        let spec = ModelSpec::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            data_kind: DataKind::Twofactor,
            data_n: 3000,
            data_n_test: 500,
            data_image_size: tf.size,
            data_pixel_noise: tf.pixel_noise,
            data_mnist_images: PathBuf::from("data/mnist-5k/images-idx3-ubyte.gz"),
            data_mnist_labels: PathBuf::from("data/mnist-5k/labels-idx1-ubyte.gz"),
            data_per_class: 33,
            data_angles: DEFAULT_ANGLES.to_vec(),
            data_yale_dir: PathBuf::from("data/yale"),
            data_resolution: 32,
            oracle_queries: vec!["identity".into(), "azimuth".into()],
            oracle_k: 10_000,
            oracle_k_test: 2_000,
            oracle_noise: 0.0,
            oracle_mode: OracleMode::Deterministic,
            oracle_temperature: 1.0,
            model_variant: spec.variant,
            model_likelihood: spec.likelihood,
            model_latent_dim: spec.latent_dim,
            model_hidden: spec.hidden,
            model_decoder: spec.decoder,
            model_triplet_weight: spec.triplet_weight,
            train_batch_size: train.batch_size,
            train_triplet_batch: train.triplet_batch,
            train_mc_samples: train.mc_samples,
            train_steps: train.steps,
            train_optimizer: opt.algorithm,
            train_learning_rate: opt.learning_rate,
            train_beta1: opt.beta1,
            train_beta2: opt.beta2,
            train_decay: opt.decay,
            train_momentum: opt.momentum,
            train_epsilon: opt.epsilon,
            train_clip_norm: opt.clip_norm,
            train_log_every: train.log_every,
            train_checkpoint_every: train.checkpoint_every,
            eval_mask_threshold: crate::eval::DEFAULT_MASK_THRESHOLD,
            sample_count: 16,
            recombine_a: 0,
            recombine_b: 1,
            recombine_from_a: "identity".into(),
            recombine_from_b: "azimuth".into(),
        }
    }
}

fn config_err(key: &str, constraint: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        constraint: constraint.into(),
    }
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl RunConfig {
    /// Resolves a config from an optional JSON file plus `key=value`
    /// overrides (values parsed as JSON, falling back to a string). Later
    /// overrides win over earlier ones and over the file.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                match serde_json::from_str::<Value>(&text)? {
                    Value::Object(m) => m,
                    _ => return Err(config_err("<root>", "config file must hold a JSON object")),
                }
            }
            None => Map::new(),
        };
        for (k, v) in overrides {
            map.insert(k.clone(), parse_value(v));
        }
        Self::from_map(map)
    }

    /// Builds and validates a config from a flat key map.
    pub fn from_map(map: Map<String, Value>) -> Result<Self> {
        let defaults = match serde_json::to_value(RunConfig::default())? {
            Value::Object(m) => m,
            _ => unreachable!("config serialises to an object"),
        };
        for key in map.keys() {
            if !defaults.contains_key(key) {
                return Err(config_err(key, "unknown key"));
            }
        }
        // Check each key on its own so a type error names the offending key.
        for (key, value) in &map {
            let mut single = defaults.clone();
            single.insert(key.clone(), value.clone());
            if let Err(e) = serde_json::from_value::<RunConfig>(Value::Object(single)) {
                return Err(config_err(key, format!("invalid value {value}: {e}")));
            }
        }
        let mut merged = defaults;
        merged.extend(map);
        let cfg: RunConfig = serde_json::from_value(Value::Object(merged))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.oracle_config(self.seed).validate()?;
        if self.model_latent_dim == 0 {
            return Err(config_err("model.latent_dim", "must be at least 1"));
        }
        if self.model_hidden.contains(&0) {
            return Err(config_err("model.hidden", "layer widths must be at least 1"));
        }
        if !(self.model_triplet_weight >= 0.0 && self.model_triplet_weight.is_finite()) {
            return Err(config_err("model.triplet_weight", "must be finite and non-negative"));
        }
        if self.data_kind == DataKind::Twofactor {
            if self.data_n < 10 {
                return Err(config_err("data.n", "must be at least 10"));
            }
            if self.data_n_test == 0 || self.data_n_test >= self.data_n {
                return Err(config_err("data.n_test", "must lie in [1, data.n)"));
            }
            if self.data_image_size < 4 {
                return Err(config_err("data.image_size", "must be at least 4"));
            }
        }
        if self.data_kind == DataKind::Mnist && self.data_per_class == 0 {
            return Err(config_err("data.per_class", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.eval_mask_threshold) {
            return Err(config_err("eval.mask_threshold", "must lie in [0, 1]"));
        }
        if self.oracle_queries.is_empty() {
            return Err(config_err("oracle.queries", "at least one query is required"));
        }
        let queries = self.queries()?;
        for q in &queries {
            let ok = match (q.kind, self.data_kind) {
                (QueryKind::Trajectory, k) => k == DataKind::Mnist,
                (QueryKind::Scalar(crate::oracle::Attribute::Angle), k) => k == DataKind::Mnist,
                (QueryKind::Scalar(_), k) => k != DataKind::Mnist,
                (QueryKind::Identity, _) => true,
            };
            if !ok {
                return Err(config_err(
                    "oracle.queries",
                    format!("query `{}` is not available for this dataset", q.name),
                ));
            }
        }
        self.train_config().validate()
    }

    pub fn queries(&self) -> Result<Vec<Query>> {
        self.oracle_queries
            .iter()
            .map(|s| Query::parse(s).ok_or_else(|| config_err("oracle.queries", format!("unknown query `{s}`"))))
            .collect()
    }

    pub fn query_index(&self, name: &str, key: &str) -> Result<usize> {
        self.oracle_queries
            .iter()
            .position(|q| q == name)
            .ok_or_else(|| config_err(key, format!("`{name}` is not one of oracle.queries")))
    }

    pub fn oracle_config(&self, seed: u64) -> OracleConfig {
        OracleConfig {
            noise: self.oracle_noise,
            mode: match self.oracle_mode {
                OracleMode::Deterministic => AnswerMode::Deterministic,
                OracleMode::Stochastic => AnswerMode::Stochastic {
                    temperature: self.oracle_temperature,
                },
            },
            seed,
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            variant: self.model_variant,
            hidden: self.model_hidden.clone(),
            latent_dim: self.model_latent_dim,
            decoder: self.model_decoder,
            likelihood: self.model_likelihood,
            triplet_weight: self.model_triplet_weight,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.train_batch_size,
            triplet_batch: self.train_triplet_batch,
            mc_samples: self.train_mc_samples,
            steps: self.train_steps,
            optimizer: OptimizerConfig {
                algorithm: self.train_optimizer,
                learning_rate: self.train_learning_rate,
                beta1: self.train_beta1,
                beta2: self.train_beta2,
                decay: self.train_decay,
                momentum: self.train_momentum,
                epsilon: self.train_epsilon,
                clip_norm: self.train_clip_norm,
            },
            seed: self.seed,
            log_every: self.train_log_every,
            checkpoint_every: self.train_checkpoint_every,
        }
    }

    pub fn twofactor_params(&self) -> TwoFactorParams {
        TwoFactorParams {
            size: self.data_image_size,
            pixel_noise: self.data_pixel_noise,
            ..Default::default()
        }
    }

    /// Canonical JSON (keys in declaration order).
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON, hex encoded. Stamped into every output.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_string(&self.to_json()).expect("config serialises"))
    }

    /// Hash over the keys that determine a trained model (`seed`, `data.*`,
    /// `oracle.*`, `model.*`, `train.*`). Checkpoints carry this one, so
    /// evaluation settings can change without invalidating them.
    pub fn training_hash(&self) -> String {
        let Value::Object(map) = self.to_json() else {
            unreachable!("config serialises to an object")
        };
        let kept: Map<String, Value> = map
            .into_iter()
            .filter(|(k, _)| {
                k == "seed"
                    || ["data.", "oracle.", "model.", "train."]
                        .iter()
                        .any(|p| k.starts_with(p))
            })
            .collect();
        sha256_hex(&serde_json::to_string(&kept).expect("map serialises"))
    }
}
