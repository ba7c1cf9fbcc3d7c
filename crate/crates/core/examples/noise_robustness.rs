//! Flips a growing fraction of oracle answers and compares how well masked
//! OPBN and MetricL representations still predict the shape label.

use opbn::cli::{build_dataset, RunConfig};
use opbn::eval::{fit_probe_split, ProbeTarget};
use opbn::model::Variant;
use opbn::oracle::sample_triplets;
use opbn::trainer::{train, TrainState};

fn main() -> anyhow::Result<()> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let mut cfg = RunConfig {
        model_latent_dim: 4,
        train_steps: steps,
        train_log_every: steps,
        ..RunConfig::default()
    };

    let (train_set, test_set) = build_dataset(&cfg)?;
    let queries = cfg.queries()?;
    let (ytr, yte) = (train_set.labels().expect("labels"), test_set.labels().expect("labels"));
    println!("{:>5}  {:>12}  {:>12}", "noise", "opbn-masked", "metricl");
    for noise in [0.0, 0.2, 0.4] {
        cfg.oracle_noise = noise;
        let corpus = sample_triplets(&train_set.meta, &queries, cfg.oracle_k, &cfg.oracle_config(cfg.seed))?;
        let mut errors = Vec::new();
        for variant in [Variant::OpbnMasked, Variant::Metricl] {
            cfg.model_variant = variant;
            let spec = cfg.model_spec();
            let tc = cfg.train_config();
            let mut state = TrainState::new(&spec, train_set.dim(), queries.len(), &tc);
            train(&mut state, &spec, &tc, &train_set.x, &corpus, None)?;
            let probe = fit_probe_split(
                &state.model.represent(&train_set.x)?,
                ProbeTarget::Classes(&ytr),
                &state.model.represent(&test_set.x)?,
                ProbeTarget::Classes(&yte),
            )?;
            errors.push(probe.metric);
        }
        println!("{noise:>5.1}  {:>11.1}%  {:>11.1}%", errors[0], errors[1]);
    }
    Ok(())
}
