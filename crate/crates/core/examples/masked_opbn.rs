//! The full model: OPBN with per-query masks on the two-factor synthetic set
//! (queries "same shape" and "closer lighting azimuth"). Prints the learned
//! masks, held-out triplet error per query and exports the embeddings.
//!
//! `cargo run --release --example masked_opbn -- 4000` sets the step count.

use opbn::cli::{build_dataset, held_out_oracle_seed, RunConfig};
use opbn::eval::{evaluate_model, export_embeddings, mask_report};
use opbn::oracle::sample_triplets;
use opbn::trainer::{train, TrainState};

fn main() -> anyhow::Result<()> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4000);
    let cfg = RunConfig {
        model_latent_dim: 4,
        train_steps: steps,
        train_log_every: 1000,
        ..RunConfig::default()
    };

    let (train_set, test_set) = build_dataset(&cfg)?;
    let queries = cfg.queries()?;
    let corpus = sample_triplets(&train_set.meta, &queries, cfg.oracle_k, &cfg.oracle_config(cfg.seed))?;
    let mut held = cfg.oracle_config(held_out_oracle_seed(cfg.seed));
    held.noise = 0.0;
    let held_out = sample_triplets(&test_set.meta, &queries, cfg.oracle_k_test, &held)?;
    println!("{} training triplets, {} held-out", corpus.len(), held_out.len());

    let spec = cfg.model_spec();
    let tc = cfg.train_config();
    let mut state = TrainState::new(&spec, train_set.dim(), queries.len(), &tc);
    for row in train(&mut state, &spec, &tc, &train_set.x, &corpus, None)? {
        let t = row.terms;
        println!(
            "step {:>5}  elbo {:>10.1}  triplet {:>9.1}  mask-kl {:.2}",
            row.step, t.elbo, t.triplet, t.mask_kl
        );
    }

    let masks = state.model.masks().expect("masked variant");
    let names: Vec<String> = queries.iter().map(|q| q.name.clone()).collect();
    println!("{}", mask_report(masks, &names, cfg.eval_mask_threshold)?);

    let row = evaluate_model(
        &state.model,
        "opbn-masked",
        "two-factor",
        &train_set,
        &test_set,
        &held_out,
        &queries,
    )?;
    for (name, err) in &row.per_query {
        println!("held-out triplet error, {name}: {:.1}%", err.unwrap_or(f64::NAN));
    }
    println!("label probe error {:.1}%", row.classification_error.unwrap_or(f64::NAN));

    let path = std::env::temp_dir().join("opbn-azimuth-embeddings.csv");
    let means = state.model.represent(&test_set.x)?;
    let cols = export_embeddings(
        &means,
        &test_set.meta,
        Some(&masks.mean_mask(1)),
        cfg.eval_mask_threshold,
        &path,
    )?;
    println!("wrote {cols} azimuth-active dimensions to {}", path.display());
    Ok(())
}
