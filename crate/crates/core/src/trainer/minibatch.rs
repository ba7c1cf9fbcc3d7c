use std::collections::HashMap;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::oracle::Triplet;
use crate::rng::Rng;

/// Rows to encode for one step, and the step's triplets in batch-local
/// indices.
///
/// `indices[..n_data]` is a uniform sample of datapoints and carries the
/// reconstruction and KL terms. Rows referenced by triplets but absent from
/// that sample follow it, so every triplet resolves inside the batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch {
    pub indices: Vec<usize>,
    pub n_data: usize,
    pub triplets: Vec<Triplet>,
}

impl Minibatch {
    /// Builds the batch from an already drawn datapoint sample and triplet
    /// sample (both in global indices).
    pub fn from_parts(data_indices: &[usize], triplets: &[Triplet]) -> Self {
        let mut indices = data_indices.to_vec();
        let mut local: HashMap<usize, usize> = indices.iter().enumerate().map(|(p, &g)| (g, p)).collect();
        let mut slot = |g: usize| {
            *local.entry(g).or_insert_with(|| {
                indices.push(g);
                indices.len() - 1
            })
        };
        let remapped = triplets
            .iter()
            .map(|t| Triplet {
                query: t.query,
                i: slot(t.i),
                j: slot(t.j),
                l: slot(t.l),
            })
            .collect();
        Self {
            n_data: data_indices.len(),
            indices,
            triplets: remapped,
        }
    }

    /// Maps a batch-local triplet back to dataset indices.
    pub fn to_global(&self, t: &Triplet) -> Triplet {
        Triplet {
            query: t.query,
            i: self.indices[t.i],
            j: self.indices[t.j],
            l: self.indices[t.l],
        }
    }
}

/// Draws `n_b` datapoints and `k_b` triplets uniformly without replacement.
/// Sizes larger than the population are capped at the population.
pub fn make_minibatch(n: usize, corpus: &[Triplet], n_b: usize, k_b: usize, rng: &mut Rng) -> Result<Minibatch> {
    if k_b > 0 && corpus.is_empty() {
        return Err(Error::contract(
            "make_minibatch",
            "triplet batch requested from an empty corpus",
        ));
    }
    if let Some(t) = corpus.iter().find(|t| t.i.max(t.j).max(t.l) >= n) {
        return Err(Error::contract(
            "make_minibatch",
            format!("triplet ({}, {}, {}) outside {n} rows", t.i, t.j, t.l),
        ));
    }
    let data = sample(rng, n, n_b.min(n)).into_vec();
    let trips: Vec<Triplet> = sample(rng, corpus.len(), k_b.min(corpus.len()))
        .into_iter()
        .map(|k| corpus[k])
        .collect();
    Ok(Minibatch::from_parts(&data, &trips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    fn t(i: usize, j: usize, l: usize) -> Triplet {
        Triplet { query: 0, i, j, l }
    }

    #[test]
    fn no_triplets_gives_plain_batch() {
        let mut r = rng::stream(1, Purpose::Test, 0);
        let mb = make_minibatch(50, &[], 8, 0, &mut r).unwrap();
        assert_eq!(mb.indices.len(), 8);
        assert_eq!(mb.n_data, 8);
        assert!(mb.triplets.is_empty());
    }

    #[test]
    fn union_covers_triplets() {
        let mb = Minibatch::from_parts(&[0, 1, 2, 3], &[t(10, 11, 12), t(13, 14, 15)]);
        assert_eq!(mb.indices.len(), 10);
        let mb = Minibatch::from_parts(&[10, 1, 14, 3], &[t(10, 11, 12), t(13, 14, 15)]);
        assert_eq!(mb.indices.len(), 8);
        for (orig, local) in [t(10, 11, 12), t(13, 14, 15)].iter().zip(&mb.triplets) {
            assert_eq!(mb.to_global(local), *orig);
        }
    }

    #[test]
    fn rejects_empty_corpus_and_dangling_triplets() {
        let mut r = rng::stream(1, Purpose::Test, 1);
        assert!(make_minibatch(5, &[], 2, 1, &mut r).is_err());
        assert!(make_minibatch(5, &[t(0, 1, 5)], 2, 1, &mut r).is_err());
    }
}
