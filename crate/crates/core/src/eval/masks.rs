use std::fmt;

use crate::error::{Error, Result};
use crate::model::MaskPosterior;
use crate::numerics::Matrix;

pub const DEFAULT_MASK_THRESHOLD: f64 = 0.2;

/// Posterior-mean masks with active sets and pairwise comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskReport {
    pub threshold: f64,
    pub query_names: Vec<String>,
    /// `values[q][h] = sigmoid(μ_q,h)`.
    pub values: Vec<Vec<f64>>,
    /// Dimensions with mask value strictly above the threshold.
    pub active: Vec<Vec<usize>>,
    /// `|A ∩ B| / min(|A|, |B|)`; 0 when either set is empty.
    pub overlap: Matrix,
    pub cosine: Matrix,
}

pub fn active_dims(mask: &[f64], threshold: f64) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| m > threshold)
        .map(|(h, _)| h)
        .collect()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn mask_report(masks: &MaskPosterior, query_names: &[String], threshold: f64) -> Result<MaskReport> {
    let q = masks.n_queries();
    if q == 0 {
        return Err(Error::contract("mask_report", "no queries"));
    }
    if query_names.len() != q {
        return Err(Error::shape(
            "mask_report",
            format!("{q} query names"),
            query_names.len(),
        ));
    }
    let values: Vec<Vec<f64>> = (0..q).map(|k| masks.mean_mask(k)).collect();
    let active: Vec<Vec<usize>> = values.iter().map(|v| active_dims(v, threshold)).collect();
    let overlap = Matrix::from_fn(q, q, |a, b| {
        let (sa, sb) = (&active[a], &active[b]);
        let min = sa.len().min(sb.len());
        if min == 0 {
            0.0
        } else {
            sa.iter().filter(|h| sb.contains(h)).count() as f64 / min as f64
        }
    });
    let cosine = Matrix::from_fn(q, q, |a, b| cosine_similarity(&values[a], &values[b]));
    Ok(MaskReport {
        threshold,
        query_names: query_names.to_vec(),
        values,
        active,
        overlap,
        cosine,
    })
}

impl fmt::Display for MaskReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.query_names.iter().map(String::len).max().unwrap_or(5).max(5);
        write!(f, "{:>w$}", "dim")?;
        for h in 0..self.values[0].len() {
            write!(f, " {:>5}", format!("z{h}"))?;
        }
        writeln!(f)?;
        for (name, v) in self.query_names.iter().zip(&self.values) {
            write!(f, "{name:>w$}")?;
            for m in v {
                write!(f, " {m:>5.2}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "\nactive (m > {}):", self.threshold)?;
        for (name, a) in self.query_names.iter().zip(&self.active) {
            writeln!(f, "  {name}: {a:?}")?;
        }
        writeln!(f, "\npairwise overlap / cosine:")?;
        for a in 0..self.values.len() {
            for b in a + 1..self.values.len() {
                writeln!(
                    f,
                    "  {} vs {}: {:.3} / {:.3}",
                    self.query_names[a],
                    self.query_names[b],
                    self.overlap[(a, b)],
                    self.cosine[(a, b)]
                )?;
            }
        }
        Ok(())
    }
}
