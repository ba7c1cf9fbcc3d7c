//! MetricL, the triplet-only embedding baseline, against masked OPBN on the
//! same corpus. MetricL sees no pixels beyond the triplet members, so its
//! representation covers whatever the triplets constrain and nothing else.

use opbn::cli::{build_dataset, held_out_oracle_seed, RunConfig};
use opbn::eval::evaluate_model;
use opbn::model::Variant;
use opbn::oracle::sample_triplets;
use opbn::trainer::{train, TrainState};

fn main() -> anyhow::Result<()> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let mut cfg = RunConfig {
        model_latent_dim: 4,
        train_steps: steps,
        train_log_every: steps,
        ..RunConfig::default()
    };

    let (train_set, test_set) = build_dataset(&cfg)?;
    let queries = cfg.queries()?;
    let corpus = sample_triplets(&train_set.meta, &queries, cfg.oracle_k, &cfg.oracle_config(cfg.seed))?;
    let mut held = cfg.oracle_config(held_out_oracle_seed(cfg.seed));
    held.noise = 0.0;
    let held_out = sample_triplets(&test_set.meta, &queries, cfg.oracle_k_test, &held)?;

    println!(
        "{:<12} {:>10} {:>12} {:>14}",
        "model", "label err", "azimuth RMSD", "triplet err"
    );
    for variant in [Variant::Metricl, Variant::OpbnMasked] {
        cfg.model_variant = variant;
        let spec = cfg.model_spec();
        let tc = cfg.train_config();
        let mut state = TrainState::new(&spec, train_set.dim(), queries.len(), &tc);
        train(&mut state, &spec, &tc, &train_set.x, &corpus, None)?;
        let row = evaluate_model(
            &state.model,
            variant.name(),
            "two-factor",
            &train_set,
            &test_set,
            &held_out,
            &queries,
        )?;
        println!(
            "{:<12} {:>9.1}% {:>11.1}° {:>13.1}%",
            variant.name(),
            row.classification_error.unwrap_or(f64::NAN),
            row.azimuth_rmsd.unwrap_or(f64::NAN),
            row.triplet_error.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
