use crate::error::{Error, Result};
use crate::numerics::{sigmoid, softplus, Activation, Matrix, Mlp, Params};
use crate::oracle::Triplet;
use crate::rng::Rng;

/// Deterministic embedding network for the metric-learning baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEmbedder {
    pub net: Mlp,
}

impl MetricEmbedder {
    pub fn new(data_dim: usize, hidden: &[usize], embed_dim: usize, rng: &mut Rng) -> Self {
        let mut dims = vec![data_dim];
        dims.extend_from_slice(hidden);
        dims.push(embed_dim);
        Self {
            net: Mlp::new(&dims, Activation::Tanh, rng),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.net.out_dim()
    }

    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.net.in_dim() {
            return Err(Error::shape(
                "embed",
                format!("{} columns", self.net.in_dim()),
                x.cols(),
            ));
        }
        x.ensure_finite("embed")?;
        self.net.predict(x)
    }
}

impl Params for MetricEmbedder {
    fn arrays(&self) -> Vec<(String, &[f64])> {
        crate::numerics::prefixed("embed", self.net.arrays()).collect()
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.arrays_mut()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `Σ_t softplus(‖f_i − f_j‖² − ‖f_i − f_l‖²)` over triplets indexing rows
/// of `x`, and its gradient.
pub fn metricl_loss(model: &MetricEmbedder, x: &Matrix, triplets: &[Triplet]) -> Result<(f64, MetricEmbedder)> {
    if x.cols() != model.net.in_dim() {
        return Err(Error::shape(
            "metricl_loss",
            format!("{} columns", model.net.in_dim()),
            x.cols(),
        ));
    }
    x.ensure_finite("metricl_loss")?;
    if let Some(t) = triplets.iter().find(|t| t.i.max(t.j).max(t.l) >= x.rows()) {
        return Err(Error::contract(
            "metricl_loss",
            format!("triplet ({}, {}, {}) outside {} rows", t.i, t.j, t.l, x.rows()),
        ));
    }
    let (f, tape) = model.net.forward(x)?;
    let mut g = Matrix::zeros(f.rows(), f.cols());
    let mut loss = 0.0;
    for t in triplets {
        let (fi, fj, fl) = (f.row(t.i), f.row(t.j), f.row(t.l));
        let gap = sq_dist(fi, fj) - sq_dist(fi, fl);
        loss += softplus(gap);
        let s = sigmoid(gap);
        for k in 0..f.cols() {
            let (a, b, c) = (fi[k], fj[k], fl[k]);
            g[(t.i, k)] += 2.0 * s * (c - b);
            g[(t.j, k)] -= 2.0 * s * (a - b);
            g[(t.l, k)] += 2.0 * s * (a - c);
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            op: "metricl_loss",
            offset: 0,
        });
    }
    let (grads, _) = model.net.backward(&tape, &g)?;
    Ok((loss, MetricEmbedder { net: grads }))
}
