//! Builds the perturbed-MNIST set (rotation trajectories of 2,000-odd digits)
//! from the bundled 5k subset, writes one trajectory as PGM files and
//! splits by trajectory so no sequence straddles train and test.

use std::path::PathBuf;

use opbn::data::{gen_perturbed_mnist, write_pgm, GrayImage, MnistSource, DEFAULT_ANGLES};
use opbn::oracle::{sample_triplets, Attribute, OracleConfig, Query, QueryKind};
use opbn::rng::{stream, Purpose};

fn main() -> anyhow::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k");
    let source = MnistSource::load(&root.join("images-idx3-ubyte.gz"), &root.join("labels-idx1-ubyte.gz"))?;
    println!(
        "source: {} digits of {}x{}",
        source.images.len(),
        source.width,
        source.height
    );

    let data = gen_perturbed_mnist(&source, 33, &DEFAULT_ANGLES, &mut stream(0, Purpose::Data, 0))?;
    println!("perturbed set: {} images, angles {:?}", data.len(), DEFAULT_ANGLES);

    let out = std::env::temp_dir().join("opbn-trajectory");
    std::fs::create_dir_all(&out)?;
    let (w, h) = data.image_shape.unwrap_or((source.width, source.height));
    for (k, m) in data.meta.iter().enumerate().filter(|(_, m)| m.trajectory == Some(0)) {
        let path = out.join(format!("angle{:+04}.pgm", m.angle.unwrap_or(0.0) as i64));
        write_pgm(
            &path,
            &GrayImage {
                width: w,
                height: h,
                pixels: data.x.row(k).to_vec(),
            },
        )?;
    }
    println!("trajectory 0 written to {}", out.display());

    let (train, test) = data.split_by_trajectory(50, &mut stream(0, Purpose::Split, 0))?;
    println!("split: {} train / {} test images", train.len(), test.len());

    let queries = [
        Query::new(QueryKind::Identity),
        Query::new(QueryKind::Trajectory),
        Query::new(QueryKind::Scalar(Attribute::Angle)),
    ];
    let triplets = sample_triplets(&train.meta, &queries, 100, &OracleConfig::new(0))?;
    println!("sampled {} triplets over {} queries", triplets.len(), queries.len());
    Ok(())
}
