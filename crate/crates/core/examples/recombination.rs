//! Latent recombination with a masked model: take the lighting dimensions
//! from one image and the shape dimensions from another, decode, and check
//! the result's shading with a pixel-space ridge regressor.

use opbn::cli::{build_dataset, RunConfig};
use opbn::data::{write_pgm, GrayImage, PixelRegressor};
use opbn::eval::recombine_latents;
use opbn::oracle::{sample_triplets, Attribute};
use opbn::trainer::{train, TrainState};

fn main() -> anyhow::Result<()> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4000);
    let cfg = RunConfig {
        model_latent_dim: 4,
        train_steps: steps,
        train_log_every: steps,
        ..RunConfig::default()
    };

    let (train_set, test_set) = build_dataset(&cfg)?;
    let queries = cfg.queries()?;
    let corpus = sample_triplets(&train_set.meta, &queries, cfg.oracle_k, &cfg.oracle_config(cfg.seed))?;
    let spec = cfg.model_spec();
    let tc = cfg.train_config();
    let mut state = TrainState::new(&spec, train_set.dim(), queries.len(), &tc);
    train(&mut state, &spec, &tc, &train_set.x, &corpus, None)?;
    let params = state.model.as_generative().expect("generative");
    let masks = params.masks.as_ref().expect("masked");

    let azimuth = train_set
        .attribute(Attribute::Azimuth)
        .expect("two-factor rows carry azimuth");
    let regressor = PixelRegressor::fit(&train_set.x, &azimuth, 1e-3)?;
    let (identity, azimuth_q) = (
        cfg.query_index("identity", "recombine.from_a")?,
        cfg.query_index("azimuth", "recombine.from_b")?,
    );

    let out = std::env::temp_dir().join("opbn-recombination");
    std::fs::create_dir_all(&out)?;
    let side = cfg.data_image_size;
    let save = |name: String, pixels: &[f64]| {
        let img = GrayImage {
            width: side,
            height: side,
            pixels: pixels.iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        };
        write_pgm(&out.join(name), &img)
    };
    println!("pair  shape(a) az(a)  az(b)  -> regressed az(mix)");
    for k in 0..6 {
        let (ia, ib) = (2 * k, 2 * k + 1);
        let (a, b) = (test_set.x.row(ia), test_set.x.row(ib));
        let mix = recombine_latents(&params.net, masks, a, b, azimuth_q, identity, cfg.eval_mask_threshold)?;
        let (ma, mb) = (&test_set.meta[ia], &test_set.meta[ib]);
        println!(
            "{k:>4}  {:>8} {:>5.0}  {:>5.0}  -> {:>5.0}",
            ma.label.unwrap_or(-1),
            ma.azimuth.unwrap_or(f64::NAN),
            mb.azimuth.unwrap_or(f64::NAN),
            regressor.predict(&mix)
        );
        save(format!("{k}-a.pgm"), a)?;
        save(format!("{k}-b.pgm"), b)?;
        save(format!("{k}-mix.pgm"), &mix)?;
    }
    println!("images in {}", out.display());
    Ok(())
}
