use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainState;
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::numerics::{layout, unflatten, Optimizer, OptimizerConfig, ParamLayout};

pub const CHECKPOINT_FORMAT: &str = "opbn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub file: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub data_dim: usize,
    pub n_queries: usize,
    pub config_hash: String,
    pub step: u64,
    pub rng: RngState,
    pub optimizer: OptimizerConfig,
    pub optimizer_step: u64,
    pub arrays: Vec<ArrayEntry>,
}

/// Everything needed to rebuild a [`TrainState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub state: TrainState,
}

fn checkpoint_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn write_blob(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_blob(path: &Path, len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 8 * len {
        return Err(checkpoint_err(
            path,
            format!("expected {} bytes, found {}", 8 * len, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Optimizer buffers stored alongside the parameters, by file prefix.
fn optimizer_buffers(opt: &Optimizer) -> Vec<(&'static str, &[f64])> {
    let mut out = vec![
        ("opt.first", opt.first.as_slice()),
        ("opt.second", opt.second.as_slice()),
    ];
    if !opt.velocity.is_empty() {
        out.push(("opt.velocity", opt.velocity.as_slice()));
    }
    out
}

/// Writes `state` to `dir` (created if needed): `manifest.json` plus one
/// little-endian `f64` file per named parameter array and optimizer buffer.
pub fn save_checkpoint(
    dir: &Path,
    state: &TrainState,
    spec: &ModelSpec,
    data_dim: usize,
    n_queries: usize,
    config_hash: &str,
    seed: u64,
) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let lay = layout(&state.model);
    let mut arrays = Vec::new();
    let mut write = |name: String, values: &[f64]| -> Result<()> {
        let file = format!("{name}.f64");
        write_blob(&dir.join(&file), values)?;
        arrays.push(ArrayEntry {
            name,
            file,
            len: values.len(),
        });
        Ok(())
    };
    for (name, a) in crate::numerics::Params::arrays(&state.model) {
        write(name, a)?;
    }
    for (prefix, buf) in optimizer_buffers(&state.optimizer) {
        for e in &lay.entries {
            write(format!("{prefix}.{}", e.name), &buf[e.offset..e.offset + e.len])?;
        }
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        spec: spec.clone(),
        data_dim,
        n_queries,
        config_hash: config_hash.into(),
        step: state.step,
        rng: RngState { seed, step: state.step },
        optimizer: state.optimizer.config.clone(),
        optimizer_step: state.optimizer.step,
        arrays,
    };
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| checkpoint_err(&path, format!("corrupt manifest: {e}")))?;
    let version = value.get("version").and_then(|v| v.as_u64());
    if value.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT)
        || version != Some(CHECKPOINT_VERSION as u64)
    {
        return Err(checkpoint_err(
            &path,
            format!("unsupported checkpoint (format {:?}, version {:?}); expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}", value.get("format"), version),
        ));
    }
    serde_json::from_value(value).map_err(|e| checkpoint_err(&path, format!("corrupt manifest: {e}")))
}

fn gather(dir: &Path, manifest: &CheckpointManifest, lay: &ParamLayout, prefix: &str) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(lay.total());
    for e in &lay.entries {
        let name = if prefix.is_empty() {
            e.name.clone()
        } else {
            format!("{prefix}.{}", e.name)
        };
        let entry = manifest
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| checkpoint_err(dir, format!("missing array `{name}`")))?;
        if entry.len != e.len {
            return Err(checkpoint_err(
                dir,
                format!("array `{name}` has {} values, model expects {}", entry.len, e.len),
            ));
        }
        flat.extend(read_blob(&dir.join(&entry.file), e.len)?);
    }
    Ok(flat)
}

/// Loads a checkpoint. With `expected_hash`, a manifest stamped with a
/// different config hash is rejected.
pub fn load_checkpoint(dir: &Path, expected_hash: Option<&str>) -> Result<Checkpoint> {
    let manifest = read_manifest(dir)?;
    if let Some(h) = expected_hash {
        if h != manifest.config_hash {
            return Err(checkpoint_err(
                dir,
                format!(
                    "config hash mismatch: checkpoint has {}, current config is {h}",
                    manifest.config_hash
                ),
            ));
        }
    }
    let mut model = Model::init(&manifest.spec, manifest.data_dim, manifest.n_queries, 0);
    let lay = layout(&model);
    unflatten(&mut model, &gather(dir, &manifest, &lay, "")?)?;
    let mut optimizer = Optimizer::new(manifest.optimizer.clone(), lay.total());
    optimizer.step = manifest.optimizer_step;
    optimizer.first = gather(dir, &manifest, &lay, "opt.first")?;
    optimizer.second = gather(dir, &manifest, &lay, "opt.second")?;
    if !optimizer.velocity.is_empty() {
        optimizer.velocity = gather(dir, &manifest, &lay, "opt.velocity")?;
    }
    let state = TrainState {
        model,
        optimizer,
        step: manifest.step,
    };
    Ok(Checkpoint { manifest, state })
}

/// Path of the checkpoint written on a non-finite abort.
pub fn last_good_dir(dir: &Path) -> PathBuf {
    dir.join("last-good")
}
