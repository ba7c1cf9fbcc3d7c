use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::config::{DataKind, RunConfig};
use crate::data::{
    gen_perturbed_mnist, gen_twofactor_synthetic, load_bundle, load_yale, save_bundle, write_pgm, DatasetBundle,
    GrayImage, MnistSource, Split, YaleOptions,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, export_embeddings, mask_report, method_notes, recombine_latents, EvalReport};
use crate::model::{elbo_opbn, elbo_vae, metricl_loss, Model, ModelSpec, Noise, ObjectiveBatch, Variant};
use crate::numerics::{flatten, grad_check, unflatten, GradCheckOptions, GradCheckReport, Matrix};
use crate::oracle::{read_triplets, sample_triplets, write_triplets, Triplet};
use crate::rng::{self, Purpose};
use crate::trainer::{load_checkpoint, train, write_metrics_csv, CheckpointPolicy, TrainState};

/// Relative-error threshold of the `gradcheck` command.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    GenData,
    GenTriplets,
    Train,
    Eval,
    Sample,
    Recombine,
    ReportMasks,
    Gradcheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::GenData,
        Command::GenTriplets,
        Command::Train,
        Command::Eval,
        Command::Sample,
        Command::Recombine,
        Command::ReportMasks,
        Command::Gradcheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::GenTriplets => "gen-triplets",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Sample => "sample",
            Command::Recombine => "recombine",
            Command::ReportMasks => "report-masks",
            Command::Gradcheck => "gradcheck",
        }
    }
}

/// Where each artifact lives under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn train_bundle(&self) -> PathBuf {
        self.root.join("data/train")
    }
    pub fn test_bundle(&self) -> PathBuf {
        self.root.join("data/test")
    }
    pub fn train_triplets(&self) -> PathBuf {
        self.root.join("triplets/train.csv")
    }
    pub fn test_triplets(&self) -> PathBuf {
        self.root.join("triplets/test.csv")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }
    pub fn manifest(&self, cmd: Command) -> PathBuf {
        self.root.join("manifests").join(format!("{}.json", cmd.name()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// `train` continues from the existing checkpoint instead of starting over.
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub training_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub config: serde_json::Value,
    /// Files written by the command, relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub started_unix_secs: u64,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    /// Pretty-printed result for commands that produce one.
    pub text: Option<String>,
}

fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite {
            path: path.to_path_buf(),
            producer,
        })
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(p) = path.parent() {
        create_dir(p)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    artifacts.push(path.to_path_buf());
    Ok(())
}

/// Lists every regular file under `dir`, sorted.
fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        if let Ok(rd) = std::fs::read_dir(&d) {
            for e in rd.flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push(p);
                }
            }
        }
    }
    out.sort();
    out
}

/// Generates (or loads) the dataset described by `cfg` and splits it.
pub fn build_dataset(cfg: &RunConfig) -> Result<(DatasetBundle, DatasetBundle)> {
    let mut data_rng = rng::stream(cfg.seed, Purpose::Data, 0);
    let mut split_rng = rng::stream(cfg.seed, Purpose::Split, 0);
    match cfg.data_kind {
        DataKind::Twofactor => {
            let full = gen_twofactor_synthetic(cfg.data_n, cfg.twofactor_params(), &mut data_rng)?;
            full.split(cfg.data_n_test, &mut split_rng)
        }
        DataKind::Mnist => {
            let source = MnistSource::load(&cfg.data_mnist_images, &cfg.data_mnist_labels)?;
            let full = gen_perturbed_mnist(&source, cfg.data_per_class, &cfg.data_angles, &mut data_rng)?;
            full.split_by_trajectory(cfg.data_n_test, &mut split_rng)
        }
        DataKind::Yale => {
            let opts = YaleOptions {
                resolution: cfg.data_resolution,
                n_test: cfg.data_n_test,
            };
            let s = load_yale(&cfg.data_yale_dir, opts, &mut split_rng)?;
            Ok((s.train, s.test))
        }
    }
}

/// Seed of the held-out triplet oracle, distinct from the training one.
pub fn held_out_oracle_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_7E57_0000_0001
}

fn load_model(cfg: &RunConfig, layout: &Layout) -> Result<(Model, ModelSpec)> {
    let dir = layout.checkpoint();
    require(&dir.join("manifest.json"), "train")?;
    let ck = load_checkpoint(&dir, Some(&cfg.training_hash()))?;
    Ok((ck.state.model, ck.manifest.spec))
}

fn to_image(pixels: Vec<f64>, shape: Option<(usize, usize)>) -> GrayImage {
    let (width, height) = shape.unwrap_or_else(|| {
        let s = (pixels.len() as f64).sqrt() as usize;
        if s * s == pixels.len() {
            (s, s)
        } else {
            (pixels.len(), 1)
        }
    });
    GrayImage { width, height, pixels }
}

/// Gradient check of the configured variant on a tiny random instance
/// (D = 6, H = 3, 8 points, 10 triplets, L = 1, frozen noise).
pub fn gradcheck_tiny(spec: &ModelSpec, seed: u64) -> Result<GradCheckReport> {
    let spec = ModelSpec {
        hidden: vec![4],
        latent_dim: 3,
        ..spec.clone()
    };
    let (d, n, n_queries) = (6, 8, 2);
    let mut r = rng::stream(seed, Purpose::Test, 0);
    let x = Matrix::from_fn(n, d, |_, _| rand::Rng::random::<f64>(&mut r));
    let triplets: Vec<Triplet> = (0..10)
        .map(|k| {
            let idx = rand::seq::index::sample(&mut r, n, 3).into_vec();
            Triplet {
                query: k % n_queries,
                i: idx[0],
                j: idx[1],
                l: idx[2],
            }
        })
        .collect();
    let mut model = Model::init(&spec, d, n_queries, seed);
    if let Model::Generative(p) = &mut model {
        if let Some(m) = &mut p.masks {
            for (q, row) in m.mean.iter_mut().enumerate() {
                for (h, v) in row.iter_mut().enumerate() {
                    *v = 0.5 * ((q + 2 * h) as f64).sin();
                }
            }
        }
    }
    let cfg = spec.objective(1);
    let noise = Noise::draw(
        n,
        3,
        1,
        n_queries,
        &mut rng::stream(seed, Purpose::Test, 1),
        &mut rng::stream(seed, Purpose::Test, 2),
    );
    let trips: &[Triplet] = if spec.variant.uses_triplets() { &triplets } else { &[] };
    let eval = |m: &Model| -> Result<(f64, Model)> {
        match m {
            Model::Generative(p) if spec.variant == Variant::Vae => {
                let (t, g) = elbo_vae(&p.net, &x, &noise.latent, 1.0, &cfg)?;
                Ok((
                    t.elbo,
                    Model::Generative(crate::model::OpbnParams { net: g, masks: None }),
                ))
            }
            Model::Generative(p) => {
                let batch = ObjectiveBatch {
                    x: &x,
                    n_data: n,
                    data_scale: 1.0,
                    triplets: trips,
                    triplet_scale: 1.0,
                };
                let (t, g) = elbo_opbn(p, &batch, &noise, &cfg)?;
                Ok((t.elbo, Model::Generative(g)))
            }
            Model::Metric(e) => {
                let (loss, g) = metricl_loss(e, &x, trips)?;
                Ok((loss, Model::Metric(g)))
            }
        }
    };
    let (_, grads) = eval(&model)?;
    let theta = flatten(&model);
    let mut failure = None;
    let report = grad_check(
        |flat| {
            let mut m = model.clone();
            if let Err(e) = unflatten(&mut m, flat) {
                failure.get_or_insert(e);
                return f64::NAN;
            }
            match eval(&m) {
                Ok((v, _)) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &theta,
        &flatten(&grads),
        GradCheckOptions {
            tolerance: GRADCHECK_TOLERANCE,
            ..Default::default()
        },
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Runs one pipeline command and writes its run manifest.
pub fn run_command(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let layout = Layout::new(&cfg.out);
    create_dir(&layout.root)?;
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let mut text = None;
    let queries = cfg.queries()?;

    let outcome: Result<()> = (|| {
        match cmd {
            Command::GenData => {
                let (train, test) = build_dataset(cfg)?;
                for (b, dir) in [(&train, layout.train_bundle()), (&test, layout.test_bundle())] {
                    save_bundle(b, &dir)?;
                    artifacts.extend(files_under(&dir));
                }
                text = Some(format!(
                    "{} train rows, {} test rows, {} pixels each",
                    train.len(),
                    test.len(),
                    train.dim()
                ));
            }
            Command::GenTriplets => {
                require(&layout.train_bundle().join("bundle.bin"), "gen-data")?;
                require(&layout.test_bundle().join("bundle.bin"), "gen-data")?;
                let train = load_bundle(&layout.train_bundle(), Split::Train)?;
                let test = load_bundle(&layout.test_bundle(), Split::Test)?;
                let tr = sample_triplets(&train.meta, &queries, cfg.oracle_k, &cfg.oracle_config(cfg.seed))?;
                let mut held = cfg.oracle_config(held_out_oracle_seed(cfg.seed));
                held.noise = 0.0;
                let te = sample_triplets(&test.meta, &queries, cfg.oracle_k_test.max(1), &held)?;
                create_dir(&layout.root.join("triplets"))?;
                write_triplets(&layout.train_triplets(), &queries, &tr)?;
                write_triplets(&layout.test_triplets(), &queries, &te)?;
                artifacts.push(layout.train_triplets());
                artifacts.push(layout.test_triplets());
                text = Some(format!("{} training and {} held-out triplets", tr.len(), te.len()));
            }
            Command::Train => {
                require(&layout.train_bundle().join("bundle.bin"), "gen-data")?;
                let train_set = load_bundle(&layout.train_bundle(), Split::Train)?;
                let spec = cfg.model_spec();
                let corpus = if spec.variant.uses_triplets() {
                    require(&layout.train_triplets(), "gen-triplets")?;
                    read_triplets(&layout.train_triplets(), &queries)?
                } else {
                    Vec::new()
                };
                let tc = cfg.train_config();
                let mut state = if opts.resume {
                    require(&layout.checkpoint().join("manifest.json"), "train")?;
                    load_checkpoint(&layout.checkpoint(), Some(&cfg.training_hash()))?.state
                } else {
                    TrainState::new(&spec, train_set.dim(), queries.len(), &tc)
                };
                let policy = CheckpointPolicy {
                    dir: layout.checkpoint(),
                    config_hash: cfg.training_hash(),
                    n_queries: queries.len(),
                };
                let log = train(&mut state, &spec, &tc, &train_set.x, &corpus, Some(&policy))?;
                write_metrics_csv(&layout.metrics(), &log)?;
                artifacts.extend(files_under(&layout.checkpoint()));
                artifacts.push(layout.metrics());
                if let Some(last) = log.last() {
                    text = Some(format!("step {}: elbo {:.4}", last.step, last.terms.elbo));
                }
            }
            Command::Eval => {
                require(&layout.test_bundle().join("bundle.bin"), "gen-data")?;
                let (model, spec) = load_model(cfg, &layout)?;
                let train_set = load_bundle(&layout.train_bundle(), Split::Train)?;
                let test_set = load_bundle(&layout.test_bundle(), Split::Test)?;
                let held = if layout.test_triplets().exists() {
                    let te = read_triplets(&layout.test_triplets(), &queries)?;
                    if layout.train_triplets().exists() {
                        crate::eval::check_disjoint(&read_triplets(&layout.train_triplets(), &queries)?, &te)?;
                    }
                    te
                } else {
                    Vec::new()
                };
                let setting = format!("eps={}", cfg.oracle_noise);
                let row = evaluate_model(
                    &model,
                    spec.variant.name(),
                    &setting,
                    &train_set,
                    &test_set,
                    &held,
                    &queries,
                )?;
                let report = EvalReport {
                    config_hash: cfg.hash(),
                    seed: cfg.seed,
                    rows: vec![row],
                    notes: method_notes(),
                };
                let dir = layout.eval_dir();
                create_dir(&dir)?;
                report.write_csv(&dir.join("report.csv"))?;
                artifacts.push(dir.join("report.csv"));
                write_text(&dir.join("report.txt"), &report.to_string(), &mut artifacts)?;
                let means = model.represent(&test_set.x)?;
                export_embeddings(
                    &means,
                    &test_set.meta,
                    None,
                    cfg.eval_mask_threshold,
                    &dir.join("embeddings.csv"),
                )?;
                artifacts.push(dir.join("embeddings.csv"));
                if let Some(m) = model.masks() {
                    for (q, query) in queries.iter().enumerate() {
                        let path = dir.join(format!("embeddings_{}.csv", query.name));
                        export_embeddings(
                            &means,
                            &test_set.meta,
                            Some(&m.mean_mask(q)),
                            cfg.eval_mask_threshold,
                            &path,
                        )?;
                        artifacts.push(path);
                    }
                }
                text = Some(report.to_string());
            }
            Command::Sample => {
                let (model, _) = load_model(cfg, &layout)?;
                let Model::Generative(p) = &model else {
                    return Err(Error::contract("sample", "MetricL has no generative path"));
                };
                let mut r = rng::stream(cfg.seed, Purpose::Eval, 2);
                let h = p.net.latent_dim;
                let z = Matrix::new(cfg.sample_count, h, rng::normal_vec(&mut r, cfg.sample_count * h))?;
                let images = p.net.decode_mean(&z)?;
                let shape = load_bundle(&layout.train_bundle(), Split::Train)
                    .ok()
                    .and_then(|b| b.image_shape);
                let dir = layout.root.join("samples");
                create_dir(&dir)?;
                for (k, row) in images.row_iter().enumerate() {
                    let path = dir.join(format!("sample_{k:03}.pgm"));
                    write_pgm(&path, &to_image(row.to_vec(), shape))?;
                    artifacts.push(path);
                }
                text = Some(format!("{} samples written to {}", cfg.sample_count, dir.display()));
            }
            Command::Recombine => {
                require(&layout.test_bundle().join("bundle.bin"), "gen-data")?;
                let (model, _) = load_model(cfg, &layout)?;
                let (Some(p), Some(masks)) = (model.as_generative(), model.masks()) else {
                    return Err(Error::contract(
                        "recombine_latents",
                        "recombination needs a masked OPBN model",
                    ));
                };
                let test_set = load_bundle(&layout.test_bundle(), Split::Test)?;
                for (key, idx) in [("recombine.a", cfg.recombine_a), ("recombine.b", cfg.recombine_b)] {
                    if idx >= test_set.len() {
                        return Err(Error::Config {
                            key: key.into(),
                            constraint: format!("must be below the {} test rows", test_set.len()),
                        });
                    }
                }
                let qa = cfg.query_index(&cfg.recombine_from_a, "recombine.from_a")?;
                let qb = cfg.query_index(&cfg.recombine_from_b, "recombine.from_b")?;
                let a = test_set.x.row(cfg.recombine_a).to_vec();
                let b = test_set.x.row(cfg.recombine_b).to_vec();
                let mix = recombine_latents(&p.net, masks, &a, &b, qb, qa, cfg.eval_mask_threshold)?;
                let dir = layout.root.join("recombine");
                create_dir(&dir)?;
                for (name, px) in [("a.pgm", a), ("b.pgm", b), ("mix.pgm", mix)] {
                    let path = dir.join(name);
                    write_pgm(&path, &to_image(px, test_set.image_shape))?;
                    artifacts.push(path);
                }
            }
            Command::ReportMasks => {
                let (model, _) = load_model(cfg, &layout)?;
                let Some(masks) = model.masks() else {
                    return Err(Error::contract("mask_report", "model has no masks"));
                };
                let names: Vec<String> = queries.iter().map(|q| q.name.clone()).collect();
                let report = mask_report(masks, &names, cfg.eval_mask_threshold)?;
                let mut csv = String::from("query,dim,mask\n");
                for (name, v) in names.iter().zip(&report.values) {
                    for (h, m) in v.iter().enumerate() {
                        csv.push_str(&format!("{name},{h},{m}\n"));
                    }
                }
                let dir = layout.root.join("masks");
                write_text(&dir.join("masks.csv"), &csv, &mut artifacts)?;
                write_text(&dir.join("report.txt"), &report.to_string(), &mut artifacts)?;
                text = Some(report.to_string());
            }
            Command::Gradcheck => {
                let report = gradcheck_tiny(&cfg.model_spec(), cfg.seed)?;
                write_text(
                    &layout.root.join("gradcheck/report.txt"),
                    &format!("{report}\n"),
                    &mut artifacts,
                )?;
                text = Some(report.to_string());
                if !report.passed() {
                    return Err(Error::contract(
                        "gradcheck",
                        format!(
                            "max relative error {:.3e} is not below {GRADCHECK_TOLERANCE:e}",
                            report.max_rel_error
                        ),
                    ));
                }
            }
        }
        Ok(())
    })();

    let manifest = RunManifest {
        command: cmd.name().into(),
        config_hash: cfg.hash(),
        training_hash: cfg.training_hash(),
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.to_json(),
        artifacts: artifacts
            .iter()
            .map(|p| {
                p.strip_prefix(&layout.root)
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|_| p.clone())
            })
            .collect(),
        started_unix_secs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    outcome?;
    let manifest_path = write_run_manifest(&layout, cmd, &manifest)?;
    Ok(RunSummary {
        manifest_path,
        manifest,
        text,
    })
}

pub fn write_run_manifest(layout: &Layout, cmd: Command, manifest: &RunManifest) -> Result<PathBuf> {
    let path = layout.manifest(cmd);
    if let Some(p) = path.parent() {
        create_dir(p)?;
    }
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
