//! Doubly stochastic training: minibatches over datapoints and triplets,
//! reparameterised Monte-Carlo noise, optimizer steps and checkpoints.
//!
//! Step `t` draws its batch, latent noise and mask noise from the streams
//! `(seed, Batch, t)`, `(seed, LatentNoise, t)` and `(seed, MaskNoise, t)`,
//! so a run is a pure function of its seed and resuming from a checkpoint
//! at step `t` replays the uninterrupted trajectory exactly.

mod checkpoint;
mod minibatch;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    last_good_dir, load_checkpoint, read_manifest, save_checkpoint, ArrayEntry, Checkpoint, CheckpointManifest,
    RngState, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use minibatch::{make_minibatch, Minibatch};

use crate::error::{Error, Result};
use crate::model::{elbo_opbn, metricl_loss, Model, ModelSpec, Noise, ObjectiveBatch, ObjectiveTerms};
use crate::numerics::{flatten, unflatten, Matrix, Optimizer, OptimizerConfig};
use crate::oracle::Triplet;
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Datapoints per batch (`N_b`).
    pub batch_size: usize,
    /// Triplets per batch (`K_b`).
    pub triplet_batch: usize,
    /// Monte-Carlo samples per datapoint (`L`).
    pub mc_samples: usize,
    pub steps: u64,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Metrics are logged every this many steps (and after the last one).
    pub log_every: u64,
    pub checkpoint_every: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            triplet_batch: 100,
            mc_samples: 1,
            steps: 1000,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            log_every: 50,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, constraint: &str| {
            Err(Error::Config {
                key: key.into(),
                constraint: constraint.into(),
            })
        };
        if self.batch_size == 0 {
            return bad("train.batch_size", "must be at least 1");
        }
        if self.mc_samples == 0 {
            return bad("train.mc_samples", "must be at least 1");
        }
        if self.log_every == 0 {
            return bad("train.log_every", "must be at least 1");
        }
        if self.checkpoint_every == Some(0) {
            return bad("train.checkpoint_every", "must be at least 1 when set");
        }
        if !(self.optimizer.learning_rate > 0.0 && self.optimizer.learning_rate.is_finite()) {
            return bad("train.learning_rate", "must be positive and finite");
        }
        Ok(())
    }
}

/// Model, optimizer and the number of completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: Model,
    pub optimizer: Optimizer,
    pub step: u64,
}

impl TrainState {
    pub fn new(spec: &ModelSpec, data_dim: usize, n_queries: usize, cfg: &TrainConfig) -> Self {
        let model = Model::init(spec, data_dim, n_queries, cfg.seed);
        let n = crate::numerics::Params::num_params(&model);
        Self {
            model,
            optimizer: Optimizer::new(cfg.optimizer.clone(), n),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub terms: ObjectiveTerms,
}

/// Where and how often a run writes checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointPolicy {
    pub dir: PathBuf,
    pub config_hash: String,
    pub n_queries: usize,
}

/// Objective of `model` on the batch and noise of step `step`.
fn step_objective(
    model: &Model,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    x: &Matrix,
    corpus: &[Triplet],
    step: u64,
) -> Result<(ObjectiveTerms, Model)> {
    let mut batch_rng = stream(cfg.seed, Purpose::Batch, step);
    let k_b = if spec.variant.uses_triplets() {
        cfg.triplet_batch
    } else {
        0
    };
    match model {
        Model::Generative(params) => {
            let mb = make_minibatch(x.rows(), corpus, cfg.batch_size, k_b, &mut batch_rng)?;
            let xb = x.gather_rows(&mb.indices);
            let n_queries = params.masks.as_ref().map_or(0, |m| m.n_queries());
            let noise = Noise::draw(
                mb.n_data,
                params.net.latent_dim,
                cfg.mc_samples,
                n_queries,
                &mut stream(cfg.seed, Purpose::LatentNoise, step),
                &mut stream(cfg.seed, Purpose::MaskNoise, step),
            );
            let batch = ObjectiveBatch {
                x: &xb,
                n_data: mb.n_data,
                data_scale: x.rows() as f64 / mb.n_data as f64,
                triplets: &mb.triplets,
                triplet_scale: if mb.triplets.is_empty() {
                    0.0
                } else {
                    corpus.len() as f64 / mb.triplets.len() as f64
                },
            };
            let (terms, grads) = elbo_opbn(params, &batch, &noise, &spec.objective(cfg.mc_samples))?;
            Ok((terms, Model::Generative(grads)))
        }
        Model::Metric(embedder) => {
            let mb = make_minibatch(x.rows(), corpus, 0, k_b, &mut batch_rng)?;
            let xb = x.gather_rows(&mb.indices);
            let (loss, grads) = metricl_loss(embedder, &xb, &mb.triplets)?;
            let scale = corpus.len() as f64 / mb.triplets.len().max(1) as f64;
            let mut g = Model::Metric(grads);
            let mut flat = flatten(&g);
            flat.iter_mut().for_each(|v| *v *= -scale);
            unflatten(&mut g, &flat)?;
            let terms = ObjectiveTerms {
                elbo: -scale * loss,
                triplet: -scale * loss,
                ..Default::default()
            };
            Ok((terms, g))
        }
    }
}

/// One optimisation step on the objective of step `state.step`. Fails
/// without modifying `state` when the objective or gradient is not finite.
pub fn train_step(
    state: &mut TrainState,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    x: &Matrix,
    corpus: &[Triplet],
) -> Result<ObjectiveTerms> {
    let (terms, grads) = step_objective(&state.model, spec, cfg, x, corpus, state.step)?;
    // The objective is maximised; the optimizer minimises.
    let g: Vec<f64> = flatten(&grads).into_iter().map(|v| -v).collect();
    let mut params = flatten(&state.model);
    state.optimizer.step(&mut params, &g)?;
    unflatten(&mut state.model, &params)?;
    state.step += 1;
    Ok(terms)
}

/// Runs `state` forward to `cfg.steps` completed steps.
///
/// On a non-finite objective or gradient the untouched state is written to
/// `<dir>/last-good` (when a checkpoint policy is given) and the error is
/// returned.
pub fn train(
    state: &mut TrainState,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    x: &Matrix,
    corpus: &[Triplet],
    checkpoints: Option<&CheckpointPolicy>,
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    if spec.variant.uses_triplets() && cfg.triplet_batch > 0 && corpus.is_empty() {
        return Err(Error::contract(
            "train",
            "variant needs triplets but the corpus is empty",
        ));
    }
    let mut log = Vec::new();
    while state.step < cfg.steps {
        let step = state.step;
        let terms = match train_step(state, spec, cfg, x, corpus) {
            Ok(t) => t,
            Err(e @ Error::NonFinite { .. }) => {
                if let Some(p) = checkpoints {
                    save_checkpoint(
                        &last_good_dir(&p.dir),
                        state,
                        spec,
                        x.cols(),
                        p.n_queries,
                        &p.config_hash,
                        cfg.seed,
                    )?;
                }
                log::error!("non-finite objective at step {step}: {e}");
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        if step.is_multiple_of(cfg.log_every) || state.step == cfg.steps {
            log::debug!("step {step}: elbo {:.4}", terms.elbo);
            log.push(MetricsRow { step, terms });
        }
        if let (Some(p), Some(every)) = (checkpoints, cfg.checkpoint_every) {
            if state.step.is_multiple_of(every) {
                save_checkpoint(&p.dir, state, spec, x.cols(), p.n_queries, &p.config_hash, cfg.seed)?;
            }
        }
    }
    if let Some(p) = checkpoints {
        save_checkpoint(&p.dir, state, spec, x.cols(), p.n_queries, &p.config_hash, cfg.seed)?;
    }
    Ok(log)
}

/// Full-data objective with noise from the `(seed, Eval)` stream: every
/// datapoint and every triplet, scale factors 1.
pub fn full_objective(
    model: &Model,
    spec: &ModelSpec,
    x: &Matrix,
    corpus: &[Triplet],
    mc_samples: usize,
    seed: u64,
) -> Result<ObjectiveTerms> {
    let trips: &[Triplet] = if spec.variant.uses_triplets() { corpus } else { &[] };
    match model {
        Model::Generative(params) => {
            let n_queries = params.masks.as_ref().map_or(0, |m| m.n_queries());
            let noise = Noise::draw(
                x.rows(),
                params.net.latent_dim,
                mc_samples,
                n_queries,
                &mut stream(seed, Purpose::Eval, 0),
                &mut stream(seed, Purpose::Eval, 1),
            );
            let batch = ObjectiveBatch {
                x,
                n_data: x.rows(),
                data_scale: 1.0,
                triplets: trips,
                triplet_scale: 1.0,
            };
            Ok(elbo_opbn(params, &batch, &noise, &spec.objective(mc_samples))?.0)
        }
        Model::Metric(m) => {
            let loss = metricl_loss(m, x, trips)?.0;
            Ok(ObjectiveTerms {
                elbo: -loss,
                triplet: -loss,
                ..Default::default()
            })
        }
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::from("step,elbo,kl,recon,triplet,mask_kl\n");
    for r in rows {
        let t = &r.terms;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step, t.elbo, t.kl, t.recon, t.triplet, t.mask_kl
        ));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
