//! Trains the plain VAE baseline on the two-factor synthetic set, then
//! probes its posterior means and decodes a few prior samples.
//!
//! `cargo run --release --example train_vae -- 3000` sets the step count.

use opbn::cli::{build_dataset, RunConfig};
use opbn::eval::evaluate_model;
use opbn::model::Variant;
use opbn::numerics::Matrix;
use opbn::rng::{normal_vec, stream, Purpose};
use opbn::trainer::{train, TrainState};

fn main() -> anyhow::Result<()> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1500);
    let cfg = RunConfig {
        model_variant: Variant::Vae,
        model_latent_dim: 4,
        train_steps: steps,
        train_log_every: 250,
        ..RunConfig::default()
    };

    let (train_set, test_set) = build_dataset(&cfg)?;
    let spec = cfg.model_spec();
    let tc = cfg.train_config();
    let mut state = TrainState::new(&spec, train_set.dim(), 0, &tc);
    for row in train(&mut state, &spec, &tc, &train_set.x, &[], None)? {
        println!(
            "step {:>5}  elbo {:>10.1}  kl {:>8.1}  recon {:>10.1}",
            row.step, row.terms.elbo, row.terms.kl, row.terms.recon
        );
    }

    let row = evaluate_model(&state.model, "vae", "two-factor", &train_set, &test_set, &[], &[])?;
    println!("label probe error {:.1}%", row.classification_error.unwrap_or(f64::NAN));
    println!("azimuth probe RMSD {:.1} deg", row.azimuth_rmsd.unwrap_or(f64::NAN));

    let net = &state.model.as_generative().expect("VAE is generative").net;
    let z = Matrix::new(
        3,
        net.latent_dim,
        normal_vec(&mut stream(cfg.seed, Purpose::Eval, 0), 3 * net.latent_dim),
    )?;
    let images = net.decode_mean(&z)?;
    let side = cfg.data_image_size;
    for (k, img) in images.row_iter().enumerate() {
        println!("prior sample {k}:");
        for r in 0..side {
            let line: String = img[r * side..(r + 1) * side]
                .iter()
                .map(|&p| [' ', '.', ':', '+', '#'][((p * 5.0) as usize).min(4)])
                .collect();
            println!("  {line}");
        }
    }
    Ok(())
}
