//! Statistical checks on the generators, oracles and evaluation metrics.

use std::path::PathBuf;

use opbn::data::{
    gen_perturbed_mnist, gen_twofactor_synthetic, MnistSource, PixelRegressor, TwoFactorParams, DEFAULT_ANGLES,
};
use opbn::eval::{fit_probe, fit_probe_split, triplet_pred_error, EmbeddingScorer, ProbeTarget};
use opbn::numerics::{Matrix, Ridge};
use opbn::oracle::{sample_triplets, Attribute, OracleConfig, Query, QueryKind};
use opbn::rng::{normal_vec, stream, Purpose};
use rand::seq::SliceRandom;

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn binomial_3sigma(p: f64, n: usize) -> f64 {
    300.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn twofactor_factors_are_independent() -> anyhow::Result<()> {
    let data = gen_twofactor_synthetic(5000, TwoFactorParams::default(), &mut stream(11, Purpose::Data, 0))?;
    let label: Vec<f64> = data.labels().unwrap().iter().map(|&l| l as f64).collect();
    let az = data.attribute(Attribute::Azimuth).unwrap();
    let el = data.attribute(Attribute::Elevation).unwrap();
    for (name, r) in [
        ("label/azimuth", correlation(&label, &az)),
        ("label/elevation", correlation(&label, &el)),
        ("azimuth/elevation", correlation(&az, &el)),
    ] {
        assert!(r.abs() < 0.05, "{name}: {r}");
    }
    Ok(())
}

#[test]
fn shading_is_recoverable_from_pixels() -> anyhow::Result<()> {
    let data = gen_twofactor_synthetic(3000, TwoFactorParams::default(), &mut stream(12, Purpose::Data, 0))?;
    let (train, test) = data.split(1000, &mut stream(12, Purpose::Split, 0))?;
    let reg = PixelRegressor::fit(&train.x, &train.attribute(Attribute::Azimuth).unwrap(), 1e-3)?;
    let truth = test.attribute(Attribute::Azimuth).unwrap();
    let mse = test
        .x
        .row_iter()
        .zip(&truth)
        .map(|(row, t)| (reg.predict(row) - t).powi(2))
        .sum::<f64>()
        / truth.len() as f64;
    assert!(mse.sqrt() < 10.0, "azimuth RMSD {}", mse.sqrt());
    Ok(())
}

#[test]
fn perturbed_mnist_counts_and_class_balance() -> anyhow::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k");
    let source = MnistSource::load(&root.join("images-idx3-ubyte.gz"), &root.join("labels-idx1-ubyte.gz"))?;
    let data = gen_perturbed_mnist(&source, 50, &DEFAULT_ANGLES, &mut stream(13, Purpose::Data, 0))?;
    // 500 base digits, each with 5 rotations plus the original.
    assert_eq!(data.len(), 500 * (DEFAULT_ANGLES.len() + 1));
    let trajectories: std::collections::BTreeSet<_> = data.meta.iter().map(|m| m.trajectory.unwrap()).collect();
    assert_eq!(trajectories.len(), 500);
    let mut hist = [0usize; 10];
    for l in data.labels().unwrap() {
        hist[l as usize] += 1;
    }
    assert!(hist.iter().all(|&c| c == 300), "{hist:?}");
    Ok(())
}

#[test]
fn three_queries_of_one_hundred_thousand() -> anyhow::Result<()> {
    let data = gen_twofactor_synthetic(60, TwoFactorParams::default(), &mut stream(14, Purpose::Data, 0))?;
    let queries = [
        Query::new(QueryKind::Identity),
        Query::new(QueryKind::Scalar(Attribute::Azimuth)),
        Query::new(QueryKind::Scalar(Attribute::Elevation)),
    ];
    let corpus = sample_triplets(&data.meta, &queries, 100_000, &OracleConfig::new(14))?;
    assert_eq!(corpus.len(), 300_000);
    Ok(())
}

#[test]
fn ridge_recovers_an_exact_linear_map() -> anyhow::Result<()> {
    let (n, d) = (20_000, 8);
    let x = Matrix::new(n, d, normal_vec(&mut stream(15, Purpose::Test, 0), n * d))?;
    let w = [1.5, -2.0, 0.25, 0.0, 3.0, -0.5, 1.0, 2.0];
    let y: Vec<f64> = x
        .row_iter()
        .map(|r| 4.0 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let idx: Vec<usize> = (0..n).collect();
    let probe = fit_probe(&x, ProbeTarget::Values(&y), &idx[..15_000], &idx[15_000..])?;
    assert!(probe.metric < 1e-6, "RMSD {}", probe.metric);
    let ridge = Ridge::fit(&x, &y, 1e-3)?;
    for (a, b) in ridge.weights().iter().zip(&w) {
        assert!((a - b).abs() < 1e-6);
    }
    Ok(())
}

#[test]
fn shuffled_labels_give_chance_error() -> anyhow::Result<()> {
    let data = gen_twofactor_synthetic(3000, TwoFactorParams::default(), &mut stream(16, Purpose::Data, 0))?;
    let (train, test) = data.split(1000, &mut stream(16, Purpose::Split, 0))?;
    let mut rng = stream(16, Purpose::Test, 0);
    let mut ytr = train.labels().unwrap();
    let mut yte = test.labels().unwrap();
    let honest = fit_probe_split(
        &train.x,
        ProbeTarget::Classes(&ytr),
        &test.x,
        ProbeTarget::Classes(&yte),
    )?
    .metric;
    ytr.shuffle(&mut rng);
    yte.shuffle(&mut rng);
    let shuffled = fit_probe_split(
        &train.x,
        ProbeTarget::Classes(&ytr),
        &test.x,
        ProbeTarget::Classes(&yte),
    )?
    .metric;
    assert!(honest < 5.0, "honest probe error {honest}");
    assert!(
        (shuffled - 75.0).abs() <= binomial_3sigma(0.75, yte.len()),
        "shuffled error {shuffled}"
    );
    Ok(())
}

#[test]
fn random_embeddings_predict_triplets_at_chance() -> anyhow::Result<()> {
    let data = gen_twofactor_synthetic(400, TwoFactorParams::default(), &mut stream(17, Purpose::Data, 0))?;
    let queries = [
        Query::new(QueryKind::Identity),
        Query::new(QueryKind::Scalar(Attribute::Azimuth)),
    ];
    let triplets = sample_triplets(&data.meta, &queries, 2000, &OracleConfig::new(17))?;
    let scorer = EmbeddingScorer {
        embeddings: Matrix::new(400, 4, normal_vec(&mut stream(17, Purpose::Test, 0), 1600))?,
    };
    let err = triplet_pred_error(&scorer, &triplets);
    assert!(
        (err - 50.0).abs() <= binomial_3sigma(0.5, triplets.len()),
        "error {err}"
    );
    Ok(())
}
