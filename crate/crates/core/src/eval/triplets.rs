use std::collections::HashSet;

use crate::distributions::sym_kl_dim;
use crate::error::{Error, Result};
use crate::model::{EncoderDecoder, MaskPosterior, Model};
use crate::numerics::Matrix;
use crate::oracle::Triplet;

/// A model's distance between two datapoints under a given query.
pub trait TripletScorer {
    fn distance(&self, query: usize, a: usize, b: usize) -> f64;
}

/// Symmetric-KL distance between posteriors, optionally weighted by each
/// query's posterior-mean mask.
#[derive(Debug, Clone)]
pub struct PosteriorScorer {
    mean: Matrix,
    log_std: Matrix,
    masks: Option<Vec<Vec<f64>>>,
}

impl PosteriorScorer {
    pub fn new(net: &EncoderDecoder, x: &Matrix, masks: Option<&MaskPosterior>) -> Result<Self> {
        let (mean, log_std) = net.encode_matrices(x)?;
        Ok(Self {
            mean,
            log_std,
            masks: masks.map(|m| (0..m.n_queries()).map(|q| m.mean_mask(q)).collect()),
        })
    }
}

impl TripletScorer for PosteriorScorer {
    fn distance(&self, query: usize, a: usize, b: usize) -> f64 {
        let mask = self.masks.as_ref().map(|m| &m[query]);
        (0..self.mean.cols())
            .map(|h| {
                let d = sym_kl_dim(
                    self.mean[(a, h)],
                    self.log_std[(a, h)],
                    self.mean[(b, h)],
                    self.log_std[(b, h)],
                );
                mask.map_or(d, |m| m[h] * d)
            })
            .sum()
    }
}

/// Squared Euclidean distance between embedding rows.
#[derive(Debug, Clone)]
pub struct EmbeddingScorer {
    pub embeddings: Matrix,
}

impl TripletScorer for EmbeddingScorer {
    fn distance(&self, _query: usize, a: usize, b: usize) -> f64 {
        self.embeddings
            .row(a)
            .iter()
            .zip(self.embeddings.row(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}

/// Wraps any closure `(query, a, b) -> distance`.
pub struct FnScorer<F>(pub F);

impl<F: Fn(usize, usize, usize) -> f64> TripletScorer for FnScorer<F> {
    fn distance(&self, query: usize, a: usize, b: usize) -> f64 {
        (self.0)(query, a, b)
    }
}

/// The native distance of `model` over the rows of `x`: masked symmetric KL
/// for masked OPBN, plain symmetric KL for VAE and OPBN, Euclidean for
/// MetricL.
pub fn scorer_for(model: &Model, x: &Matrix) -> Result<Box<dyn TripletScorer>> {
    Ok(match model {
        Model::Generative(p) => Box::new(PosteriorScorer::new(&p.net, x, p.masks.as_ref())?),
        Model::Metric(m) => Box::new(EmbeddingScorer {
            embeddings: m.embed(x)?,
        }),
    })
}

fn wrong(scorer: &dyn TripletScorer, t: &Triplet) -> f64 {
    let dj = scorer.distance(t.query, t.i, t.j);
    let dl = scorer.distance(t.query, t.i, t.l);
    if dj < dl {
        0.0
    } else if dj > dl {
        1.0
    } else {
        0.5
    }
}

/// Percentage of triplets whose ordering the scorer gets wrong; exact ties
/// count one half. Empty input gives `NaN`.
pub fn triplet_pred_error(scorer: &dyn TripletScorer, triplets: &[Triplet]) -> f64 {
    100.0 * triplets.iter().map(|t| wrong(scorer, t)).sum::<f64>() / triplets.len() as f64
}

/// [`triplet_pred_error`] per query index; queries without triplets get `None`.
pub fn triplet_pred_error_by_query(
    scorer: &dyn TripletScorer,
    triplets: &[Triplet],
    n_queries: usize,
) -> Vec<Option<f64>> {
    (0..n_queries)
        .map(|q| {
            let sub: Vec<Triplet> = triplets.iter().filter(|t| t.query == q).copied().collect();
            (!sub.is_empty()).then(|| triplet_pred_error(scorer, &sub))
        })
        .collect()
}

/// Fails when a held-out triplet (or its flip) also appears in training.
pub fn check_disjoint(train: &[Triplet], held_out: &[Triplet]) -> Result<()> {
    let key = |t: &Triplet| (t.query, t.i, t.j.min(t.l), t.j.max(t.l));
    let seen: HashSet<_> = train.iter().map(key).collect();
    match held_out.iter().find(|t| seen.contains(&key(t))) {
        Some(t) => Err(Error::contract(
            "triplet_pred_error",
            format!(
                "held-out triplet ({}, {}, {}) for query {} also occurs in training",
                t.i, t.j, t.l, t.query
            ),
        )),
        None => Ok(()),
    }
}
