//! Simulated oracles.
//!
//! An oracle answers "is `j` or `l` more similar to `i`?" for one query, by
//! reading the dataset metadata the model never sees. Identity-style queries
//! compare a discrete field for equality; scalar queries compare absolute
//! differences of a continuous attribute.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::MetaRow;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose, Rng};

/// Continuous metadata attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Azimuth,
    Elevation,
    Angle,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Azimuth => "azimuth",
            Attribute::Elevation => "elevation",
            Attribute::Angle => "angle",
        }
    }

    pub fn read(self, row: &MetaRow) -> Option<f64> {
        match self {
            Attribute::Azimuth => row.azimuth,
            Attribute::Elevation => row.elevation,
            Attribute::Angle => row.angle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    /// Same class label.
    Identity,
    /// Same trajectory (perturbed-MNIST rotation sequence).
    Trajectory,
    /// Closer value of a continuous attribute.
    Scalar(Attribute),
}

/// A registered oracle question. `name` is the symbol used in triplet files.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub name: String,
    pub kind: QueryKind,
}

impl Query {
    pub fn new(kind: QueryKind) -> Self {
        let name = match kind {
            QueryKind::Identity => "identity",
            QueryKind::Trajectory => "trajectory",
            QueryKind::Scalar(a) => a.name(),
        };
        Self {
            name: name.to_string(),
            kind,
        }
    }

    /// Parses `identity`, `trajectory`, `azimuth`, `elevation` or `angle`.
    pub fn parse(s: &str) -> Option<Self> {
        let kind = match s {
            "identity" | "label" => QueryKind::Identity,
            "trajectory" => QueryKind::Trajectory,
            "azimuth" => QueryKind::Scalar(Attribute::Azimuth),
            "elevation" => QueryKind::Scalar(Attribute::Elevation),
            "angle" => QueryKind::Scalar(Attribute::Angle),
            _ => return None,
        };
        Some(Self::new(kind))
    }
}

/// Oracle statement: under query `query`, `j` is more similar to `i` than
/// `l` is. `query` indexes the registered query list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub query: usize,
    pub i: usize,
    pub j: usize,
    pub l: usize,
}

impl Triplet {
    pub fn flipped(self) -> Self {
        Self {
            j: self.l,
            l: self.j,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    /// `[i, j, l]` in oracle order: the middle index is the closer one.
    Ordered([usize; 3]),
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum AnswerMode {
    /// Exact comparison, ties resampled.
    Deterministic,
    /// Scalar queries answer `(i, j, l)` with probability
    /// `softmax(−|Δ|/temperature)`; discrete queries stay deterministic.
    Stochastic { temperature: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Fraction of answers flipped after sampling, in `[0, 1]`.
    pub noise: f64,
    pub mode: AnswerMode,
    pub seed: u64,
}

impl OracleConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            noise: 0.0,
            mode: AnswerMode::Deterministic,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config {
                key: "oracle.noise".into(),
                constraint: format!("must lie in [0, 1], got {}", self.noise),
            });
        }
        if let AnswerMode::Stochastic { temperature } = self.mode {
            if temperature <= 0.0 || !temperature.is_finite() {
                return Err(Error::Config {
                    key: "oracle.temperature".into(),
                    constraint: "must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

/// Upper bound on consecutive unanswerable draws before giving up.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 1_000_000;

fn check_indices(meta: &[MetaRow], idx: [usize; 3]) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&v| v >= meta.len()) {
        return Err(Error::Data(format!("index {bad} out of range for {} rows", meta.len())));
    }
    Ok(())
}

fn answer_discrete(field: &str, values: [Option<i64>; 3], idx: [usize; 3]) -> Result<Answer> {
    let [i, j, l] = idx;
    let missing = |k: usize| Error::Data(format!("row {} has no {field}", idx[k]));
    let vi = values[0].ok_or_else(|| missing(0))?;
    let vj = values[1].ok_or_else(|| missing(1))?;
    let vl = values[2].ok_or_else(|| missing(2))?;
    Ok(match (vi == vj, vi == vl) {
        (true, false) => Answer::Ordered([i, j, l]),
        (false, true) => Answer::Ordered([i, l, j]),
        _ => Answer::Tie,
    })
}

/// Label-match oracle.
pub fn answer_identity(meta: &[MetaRow], i: usize, j: usize, l: usize) -> Result<Answer> {
    check_indices(meta, [i, j, l])?;
    answer_discrete("label", [meta[i].label, meta[j].label, meta[l].label], [i, j, l])
}

/// Trajectory-match oracle.
pub fn answer_trajectory(meta: &[MetaRow], i: usize, j: usize, l: usize) -> Result<Answer> {
    check_indices(meta, [i, j, l])?;
    answer_discrete(
        "trajectory",
        [meta[i].trajectory, meta[j].trajectory, meta[l].trajectory],
        [i, j, l],
    )
}

fn scalar_values(meta: &[MetaRow], attribute: Attribute, idx: [usize; 3]) -> Result<[f64; 3]> {
    check_indices(meta, idx)?;
    let mut out = [0.0; 3];
    for (o, &k) in out.iter_mut().zip(&idx) {
        *o = attribute
            .read(&meta[k])
            .ok_or_else(|| Error::Data(format!("row {k} has no {}", attribute.name())))?;
    }
    Ok(out)
}

/// Closer-attribute oracle: `(i, j, l)` iff `|a_i − a_j| < |a_i − a_l|`.
pub fn answer_scalar(meta: &[MetaRow], attribute: Attribute, i: usize, j: usize, l: usize) -> Result<Answer> {
    let [ai, aj, al] = scalar_values(meta, attribute, [i, j, l])?;
    let (dj, dl) = ((ai - aj).abs(), (ai - al).abs());
    Ok(if dj < dl {
        Answer::Ordered([i, j, l])
    } else if dl < dj {
        Answer::Ordered([i, l, j])
    } else {
        Answer::Tie
    })
}

/// Answers one draw for `query` in the given mode.
pub fn answer(meta: &[MetaRow], query: &Query, mode: AnswerMode, idx: [usize; 3], rng: &mut Rng) -> Result<Answer> {
    let [i, j, l] = idx;
    match (query.kind, mode) {
        (QueryKind::Identity, _) => answer_identity(meta, i, j, l),
        (QueryKind::Trajectory, _) => answer_trajectory(meta, i, j, l),
        (QueryKind::Scalar(a), AnswerMode::Deterministic) => answer_scalar(meta, a, i, j, l),
        (QueryKind::Scalar(a), AnswerMode::Stochastic { temperature }) => {
            let [ai, aj, al] = scalar_values(meta, a, idx)?;
            let (dj, dl) = ((ai - aj).abs(), (ai - al).abs());
            let p_keep = crate::numerics::sigmoid((dl - dj) / temperature);
            Ok(if rng.random::<f64>() < p_keep {
                Answer::Ordered([i, j, l])
            } else {
                Answer::Ordered([i, l, j])
            })
        }
    }
}

/// Draws `k` answered triplets for every query, uniformly over ordered
/// triples of distinct rows, resampling ties. Query `q` uses its own random
/// stream, and flipping noise is applied afterwards per `config.noise`.
pub fn sample_triplets(meta: &[MetaRow], queries: &[Query], k: usize, config: &OracleConfig) -> Result<Vec<Triplet>> {
    config.validate()?;
    if k == 0 {
        return Err(Error::contract("sample_triplets", "K must be at least 1"));
    }
    let n = meta.len();
    if n < 3 {
        return Err(Error::Data(format!(
            "need at least 3 datapoints to form triplets, got {n}"
        )));
    }
    let mut out = Vec::with_capacity(k * queries.len());
    for (q, query) in queries.iter().enumerate() {
        let mut rng = rng::stream(config.seed, Purpose::Oracle, q as u64);
        for _ in 0..k {
            let mut attempts = 0;
            loop {
                if attempts == MAX_RESAMPLE_ATTEMPTS {
                    return Err(Error::OracleExhausted {
                        query: query.name.clone(),
                        attempts,
                    });
                }
                attempts += 1;
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                let l = rng.random_range(0..n);
                if i == j || i == l || j == l {
                    continue;
                }
                if let Answer::Ordered([i, j, l]) = answer(meta, query, config.mode, [i, j, l], &mut rng)? {
                    out.push(Triplet { query: q, i, j, l });
                    break;
                }
            }
        }
    }
    let mut noise_rng = rng::stream(config.seed, Purpose::OracleNoise, 0);
    Ok(inject_noise(out, config.noise, &mut noise_rng))
}

/// Swaps `(j, l)` of each triplet independently with probability `eps`.
pub fn inject_noise(triplets: Vec<Triplet>, eps: f64, rng: &mut Rng) -> Vec<Triplet> {
    if eps <= 0.0 {
        return triplets;
    }
    triplets
        .into_iter()
        .map(|t| if rng.random::<f64>() < eps { t.flipped() } else { t })
        .collect()
}

/// Writes `query,i,j,l` rows (LF line endings, 0-based indices).
pub fn write_triplets(path: &Path, queries: &[Query], triplets: &[Triplet]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(b"query,i,j,l\n").map_err(io)?;
    for t in triplets {
        let name = &queries
            .get(t.query)
            .ok_or_else(|| Error::contract("write_triplets", format!("unregistered query index {}", t.query)))?
            .name;
        writeln!(w, "{name},{},{},{}", t.i, t.j, t.l).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a triplet file, resolving query names against `queries`.
pub fn read_triplets(path: &Path, queries: &[Query]) -> Result<Vec<Triplet>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["query", "i", "j", "l"] {
        return Err(Error::Data(format!("{}: expected header query,i,j,l", path.display())));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Data(format!("{} row {}: {what}", path.display(), line + 1));
        let query = queries
            .iter()
            .position(|q| q.name == rec[0])
            .ok_or_else(|| bad(&format!("unknown query `{}`", &rec[0])))?;
        let idx = |k: usize| {
            rec[k]
                .parse::<usize>()
                .map_err(|_| bad("index is not a non-negative integer"))
        };
        out.push(Triplet {
            query,
            i: idx(1)?,
            j: idx(2)?,
            l: idx(3)?,
        });
    }
    Ok(out)
}

/// Checks a triplet against its generating comparator.
pub fn is_consistent(meta: &[MetaRow], queries: &[Query], t: &Triplet) -> Result<bool> {
    let query = &queries[t.query];
    let mut dummy = rng::stream(0, Purpose::Oracle, 0);
    Ok(
        answer(meta, query, AnswerMode::Deterministic, [t.i, t.j, t.l], &mut dummy)?
            == Answer::Ordered([t.i, t.j, t.l]),
    )
}
