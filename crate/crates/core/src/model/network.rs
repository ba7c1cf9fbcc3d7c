use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{clamp_log_std, DiagGaussian, LOG_STD_MAX, LOG_STD_MIN};
use crate::error::{Error, Result};
use crate::numerics::{prefixed, sigmoid, softplus, Activation, Matrix, Mlp, Params};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderFamily {
    /// Per-pixel mean and log standard deviation (`2D` outputs).
    Gaussian,
    /// Per-pixel logits (`D` outputs).
    Bernoulli,
}

/// Amortised encoder `x ↦ (μ, log σ)` and decoder `z ↦ p(x|z)`, both tanh
/// MLPs.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub latent_dim: usize,
    pub data_dim: usize,
    pub family: DecoderFamily,
}

/// Encoder output split into means and clamped log standard deviations,
/// plus a record of which log-std entries hit the clamp.
pub(crate) struct Encoded {
    pub mean: Matrix,
    pub log_std: Matrix,
    pub clamped: Vec<bool>,
}

impl EncoderDecoder {
    pub fn new(data_dim: usize, hidden: &[usize], latent_dim: usize, family: DecoderFamily, rng: &mut Rng) -> Self {
        let mut enc_dims = vec![data_dim];
        enc_dims.extend_from_slice(hidden);
        enc_dims.push(2 * latent_dim);
        let mut dec_dims = vec![latent_dim];
        dec_dims.extend(hidden.iter().rev());
        dec_dims.push(match family {
            DecoderFamily::Gaussian => 2 * data_dim,
            DecoderFamily::Bernoulli => data_dim,
        });
        Self {
            encoder: Mlp::new(&enc_dims, Activation::Tanh, rng),
            decoder: Mlp::new(&dec_dims, Activation::Tanh, rng),
            latent_dim,
            data_dim,
            family,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            ..self.clone()
        }
    }

    fn check_input(&self, op: &'static str, x: &Matrix) -> Result<()> {
        if x.cols() != self.data_dim {
            return Err(Error::shape(
                op,
                format!("{} columns", self.data_dim),
                format!("{} columns", x.cols()),
            ));
        }
        x.ensure_finite(op)
    }

    pub(crate) fn split_encoder_output(&self, out: &Matrix) -> Encoded {
        let h = self.latent_dim;
        let n = out.rows();
        let mut mean = Matrix::zeros(n, h);
        let mut log_std = Matrix::zeros(n, h);
        let mut clamped = vec![false; n * h];
        for r in 0..n {
            let row = out.row(r);
            mean.row_mut(r).copy_from_slice(&row[..h]);
            for k in 0..h {
                let s = row[h + k];
                log_std[(r, k)] = clamp_log_std(s);
                clamped[r * h + k] = !(LOG_STD_MIN..=LOG_STD_MAX).contains(&s);
            }
        }
        Encoded { mean, log_std, clamped }
    }

    /// Posterior `q(z|x)` for every row of `x`.
    pub fn encode(&self, x: &Matrix) -> Result<Vec<DiagGaussian>> {
        let (mean, log_std) = self.encode_matrices(x)?;
        (0..x.rows())
            .map(|r| DiagGaussian::new(mean.row(r).to_vec(), log_std.row(r).to_vec()))
            .collect()
    }

    /// Posterior means and clamped log standard deviations as `N × H` matrices.
    pub fn encode_matrices(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        self.check_input("encode", x)?;
        let out = self.encoder.predict(x)?;
        out.ensure_finite("encode")?;
        let e = self.split_encoder_output(&out);
        Ok((e.mean, e.log_std))
    }

    /// Decoder mean image for every latent row.
    pub fn decode_mean(&self, z: &Matrix) -> Result<Matrix> {
        self.check_latent("decode", z)?;
        let out = self.decoder.predict(z)?;
        let d = self.data_dim;
        Ok(match self.family {
            DecoderFamily::Bernoulli => out.map(sigmoid),
            DecoderFamily::Gaussian => Matrix::from_fn(z.rows(), d, |r, c| out[(r, c)]),
        })
    }

    fn check_latent(&self, op: &'static str, z: &Matrix) -> Result<()> {
        if z.cols() != self.latent_dim {
            return Err(Error::shape(
                op,
                format!("{} columns", self.latent_dim),
                format!("{} columns", z.cols()),
            ));
        }
        z.ensure_finite(op)
    }

    /// `log p(x_n | z_n)` for every row.
    pub fn decode_loglik(&self, z: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
        self.check_latent("decode_loglik", z)?;
        self.check_input("decode_loglik", x)?;
        if z.rows() != x.rows() {
            return Err(Error::shape(
                "decode_loglik",
                format!("{} rows", z.rows()),
                format!("{} rows", x.rows()),
            ));
        }
        let out = self.decoder.predict(z)?;
        Ok(self.loglik_and_grad(&out, x).0)
    }

    /// Per-row log-likelihood and its gradient with respect to the raw
    /// decoder output.
    pub(crate) fn loglik_and_grad(&self, out: &Matrix, x: &Matrix) -> (Vec<f64>, Matrix) {
        let d = self.data_dim;
        let mut grad = Matrix::zeros(out.rows(), out.cols());
        let mut ll = vec![0.0; out.rows()];
        for (r, ll_r) in ll.iter_mut().enumerate() {
            let o = out.row(r);
            let xr = x.row(r);
            let g = grad.row_mut(r);
            let mut acc = 0.0;
            match self.family {
                DecoderFamily::Bernoulli => {
                    for k in 0..d {
                        acc += xr[k] * o[k] - softplus(o[k]);
                        g[k] = xr[k] - sigmoid(o[k]);
                    }
                }
                DecoderFamily::Gaussian => {
                    let half_log_2pi = 0.5 * (2.0 * PI).ln();
                    for k in 0..d {
                        let raw = o[d + k];
                        let s = clamp_log_std(raw);
                        let diff = xr[k] - o[k];
                        let prec = (-2.0 * s).exp();
                        acc += -half_log_2pi - s - 0.5 * diff * diff * prec;
                        g[k] = diff * prec;
                        g[d + k] = if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                            -1.0 + diff * diff * prec
                        } else {
                            0.0
                        };
                    }
                }
            }
            *ll_r = acc;
        }
        (ll, grad)
    }
}

impl Params for EncoderDecoder {
    fn arrays(&self) -> Vec<(String, &[f64])> {
        prefixed("encoder", self.encoder.arrays())
            .chain(prefixed("decoder", self.decoder.arrays()))
            .collect()
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.arrays_mut();
        out.extend(self.decoder.arrays_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Layer;
    use crate::rng::{self, Purpose};

    /// Decoder with zero weights whose output is exactly `bias`.
    fn constant_decoder(family: DecoderFamily, d: usize, bias: Vec<f64>) -> EncoderDecoder {
        let mut r = rng::stream(0, Purpose::Test, 0);
        let mut m = EncoderDecoder::new(d, &[], 1, family, &mut r);
        let out = bias.len();
        m.decoder = Mlp::from_layers(vec![Layer {
            weight: Matrix::zeros(out, 1),
            bias,
            activation: Activation::Identity,
        }])
        .unwrap();
        m
    }

    #[test]
    fn gaussian_unit_variance_at_mean() {
        let d = 5;
        let x = Matrix::from_fn(1, d, |_, c| 0.1 * c as f64);
        let mut bias = x.row(0).to_vec();
        bias.extend(vec![0.0; d]);
        let m = constant_decoder(DecoderFamily::Gaussian, d, bias);
        let ll = m.decode_loglik(&Matrix::zeros(1, 1), &x).unwrap();
        assert!((ll[0] + d as f64 / 2.0 * (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_half_probability() {
        let d = 7;
        let x = Matrix::from_fn(1, d, |_, c| (c % 2) as f64);
        let m = constant_decoder(DecoderFamily::Bernoulli, d, vec![0.0; d]);
        let ll = m.decode_loglik(&Matrix::zeros(1, 1), &x).unwrap();
        assert!((ll[0] + d as f64 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn shapes_are_checked() {
        let mut r = rng::stream(0, Purpose::Test, 1);
        let m = EncoderDecoder::new(4, &[3], 2, DecoderFamily::Bernoulli, &mut r);
        assert!(m.encode(&Matrix::zeros(2, 5)).is_err());
        assert!(m.decode_loglik(&Matrix::zeros(2, 2), &Matrix::zeros(3, 4)).is_err());
        let q = m.encode(&Matrix::zeros(2, 4)).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].dim(), 2);
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut r = rng::stream(0, Purpose::Test, 2);
        let m = EncoderDecoder::new(2, &[3], 2, DecoderFamily::Bernoulli, &mut r);
        let x = Matrix::new(1, 2, vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(m.encode(&x), Err(Error::NonFinite { .. })));
    }
}
