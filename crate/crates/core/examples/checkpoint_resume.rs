//! Interrupts a run, saves a checkpoint, reloads it and finishes training;
//! the resumed parameters match an uninterrupted run bit for bit.

use opbn::cli::{build_dataset, RunConfig};
use opbn::numerics::flatten;
use opbn::oracle::sample_triplets;
use opbn::trainer::{load_checkpoint, save_checkpoint, train, TrainState};

fn main() -> anyhow::Result<()> {
    let cfg = RunConfig {
        data_n: 600,
        oracle_k: 500,
        model_latent_dim: 4,
        train_steps: 200,
        train_log_every: 100,
        ..RunConfig::default()
    };
    let (train_set, _) = build_dataset(&cfg)?;
    let queries = cfg.queries()?;
    let corpus = sample_triplets(&train_set.meta, &queries, cfg.oracle_k, &cfg.oracle_config(cfg.seed))?;
    let spec = cfg.model_spec();
    let tc = cfg.train_config();
    let hash = cfg.training_hash();

    let mut full = TrainState::new(&spec, train_set.dim(), queries.len(), &tc);
    train(&mut full, &spec, &tc, &train_set.x, &corpus, None)?;

    let dir = std::env::temp_dir().join("opbn-checkpoint-demo");
    let half = opbn::trainer::TrainConfig {
        steps: 100,
        ..tc.clone()
    };
    let mut first = TrainState::new(&spec, train_set.dim(), queries.len(), &tc);
    train(&mut first, &spec, &half, &train_set.x, &corpus, None)?;
    let manifest = save_checkpoint(&dir, &first, &spec, train_set.dim(), queries.len(), &hash, cfg.seed)?;
    println!(
        "saved step {} ({} arrays) to {}",
        manifest.step,
        manifest.arrays.len(),
        dir.display()
    );

    let mut resumed = load_checkpoint(&dir, Some(&hash))?.state;
    train(&mut resumed, &spec, &tc, &train_set.x, &corpus, None)?;
    let same = flatten(&resumed.model) == flatten(&full.model);
    println!(
        "resumed to step {}; identical to the uninterrupted run: {same}",
        resumed.step
    );

    match load_checkpoint(&dir, Some("not-this-config")) {
        Err(e) => println!("loading under another config fails: {e}"),
        Ok(_) => println!("unexpected: hash mismatch accepted"),
    }
    Ok(())
}
