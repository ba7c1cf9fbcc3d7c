use super::masks::MaskPosterior;
use super::network::EncoderDecoder;
use super::triplet::loglik_from_distances;
use super::ObjectiveConfig;
use crate::distributions::{kl_std_normal_dim, sym_kl_dim, sym_kl_dim_grad};
use crate::error::{Error, Result};
use crate::numerics::{accumulate, prefixed, Matrix, Params};
use crate::oracle::Triplet;
use crate::rng::{normal_vec, Rng};

/// Trainable state of a generative model: the network plus, for the masked
/// variant, the mask posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct OpbnParams {
    pub net: EncoderDecoder,
    pub masks: Option<MaskPosterior>,
}

impl OpbnParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            net: self.net.zeros_like(),
            masks: self.masks.as_ref().map(MaskPosterior::zeros_like),
        }
    }
}

impl Params for OpbnParams {
    fn arrays(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<_> = prefixed("net", self.net.arrays()).collect();
        if let Some(m) = &self.masks {
            out.extend(prefixed("masks", m.arrays()));
        }
        out
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.net.arrays_mut();
        if let Some(m) = &mut self.masks {
            out.extend(m.arrays_mut());
        }
        out
    }
}

/// One minibatch as seen by the objective.
///
/// `x` holds every encoded row. The first `n_data` rows are the data sample
/// and carry the reconstruction and KL terms; triplet indices refer to rows
/// of `x`.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveBatch<'a> {
    pub x: &'a Matrix,
    pub n_data: usize,
    /// `N / N_b`.
    pub data_scale: f64,
    pub triplets: &'a [Triplet],
    /// `K / K_b`.
    pub triplet_scale: f64,
}

/// Standard-normal noise consumed by one objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    /// One `n_data × H` matrix per Monte-Carlo sample.
    pub latent: Vec<Matrix>,
    /// One length-`H` vector per query (empty when unmasked).
    pub mask: Vec<Vec<f64>>,
}

impl Noise {
    pub fn draw(
        n_data: usize,
        latent_dim: usize,
        mc_samples: usize,
        mask_queries: usize,
        latent_rng: &mut Rng,
        mask_rng: &mut Rng,
    ) -> Self {
        let latent = (0..mc_samples)
            .map(|_| {
                Matrix::new(n_data, latent_dim, normal_vec(latent_rng, n_data * latent_dim)).expect("sized buffer")
            })
            .collect();
        let mask = (0..mask_queries).map(|_| normal_vec(mask_rng, latent_dim)).collect();
        Self { latent, mask }
    }
}

/// Value of the objective and its parts. `elbo = −kl + recon + triplet − mask_kl`,
/// with minibatch scale factors already applied to each part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub elbo: f64,
    pub kl: f64,
    pub recon: f64,
    pub triplet: f64,
    pub mask_kl: f64,
}

/// Minibatch VAE ELBO and its gradient. Every row of `x` is a data row.
pub fn elbo_vae(
    net: &EncoderDecoder,
    x: &Matrix,
    latent_noise: &[Matrix],
    data_scale: f64,
    cfg: &ObjectiveConfig,
) -> Result<(ObjectiveTerms, EncoderDecoder)> {
    let batch = ObjectiveBatch {
        x,
        n_data: x.rows(),
        data_scale,
        triplets: &[],
        triplet_scale: 0.0,
    };
    let noise = Noise {
        latent: latent_noise.to_vec(),
        mask: Vec::new(),
    };
    let cfg = ObjectiveConfig {
        masked: false,
        ..cfg.clone()
    };
    let (terms, grads, _) = objective(net, None, &batch, &noise, &cfg)?;
    Ok((terms, grads))
}

/// Minibatch OPBN ELBO (data term plus weighted triplet term, minus the mask
/// KL when masked) and its gradient.
pub fn elbo_opbn(
    params: &OpbnParams,
    batch: &ObjectiveBatch<'_>,
    noise: &Noise,
    cfg: &ObjectiveConfig,
) -> Result<(ObjectiveTerms, OpbnParams)> {
    let masks = if cfg.masked {
        Some(
            params
                .masks
                .as_ref()
                .ok_or_else(|| Error::contract("elbo_opbn", "masked objective requested for a model without masks"))?,
        )
    } else {
        None
    };
    let (terms, net, mask_grads) = objective(&params.net, masks, batch, noise, cfg)?;
    let masks = match (&params.masks, mask_grads) {
        (_, Some(g)) => Some(g),
        (Some(m), None) => Some(m.zeros_like()),
        (None, None) => None,
    };
    Ok((terms, OpbnParams { net, masks }))
}

fn validate(
    net: &EncoderDecoder,
    masks: Option<&MaskPosterior>,
    batch: &ObjectiveBatch<'_>,
    noise: &Noise,
    cfg: &ObjectiveConfig,
) -> Result<()> {
    const OP: &str = "objective";
    let h = net.latent_dim;
    if batch.x.cols() != net.data_dim {
        return Err(Error::shape(
            OP,
            format!("{} columns", net.data_dim),
            format!("{} columns", batch.x.cols()),
        ));
    }
    if batch.n_data > batch.x.rows() {
        return Err(Error::contract(
            OP,
            format!("n_data {} exceeds {} encoded rows", batch.n_data, batch.x.rows()),
        ));
    }
    if cfg.mc_samples == 0 {
        return Err(Error::contract(OP, "at least one Monte-Carlo sample is required"));
    }
    if noise.latent.len() != cfg.mc_samples {
        return Err(Error::shape(
            OP,
            format!("{} latent noise samples", cfg.mc_samples),
            noise.latent.len(),
        ));
    }
    for e in &noise.latent {
        if e.shape() != (batch.n_data, h) {
            return Err(Error::shape(
                OP,
                format!("latent noise {}x{h}", batch.n_data),
                format!("{}x{}", e.rows(), e.cols()),
            ));
        }
    }
    let rows = batch.x.rows();
    for t in batch.triplets {
        if t.i >= rows || t.j >= rows || t.l >= rows {
            return Err(Error::contract(
                OP,
                format!("triplet ({}, {}, {}) outside {rows} rows", t.i, t.j, t.l),
            ));
        }
    }
    if let Some(m) = masks {
        if m.latent_dim() != h {
            return Err(Error::shape(OP, format!("masks over {h} dims"), m.latent_dim()));
        }
        if noise.mask.len() < m.n_queries() || noise.mask.iter().any(|e| e.len() != h) {
            return Err(Error::shape(
                OP,
                format!("{} mask noise vectors of length {h}", m.n_queries()),
                "other",
            ));
        }
        if let Some(t) = batch.triplets.iter().find(|t| t.query >= m.n_queries()) {
            return Err(Error::contract(OP, format!("query {} has no mask", t.query)));
        }
    }
    batch.x.ensure_finite(OP)
}

fn objective(
    net: &EncoderDecoder,
    masks: Option<&MaskPosterior>,
    batch: &ObjectiveBatch<'_>,
    noise: &Noise,
    cfg: &ObjectiveConfig,
) -> Result<(ObjectiveTerms, EncoderDecoder, Option<MaskPosterior>)> {
    validate(net, masks, batch, noise, cfg)?;
    let h = net.latent_dim;
    let nd = batch.n_data;
    let x = batch.x;

    let (enc_out, enc_tape) = net.encoder.forward(x)?;
    enc_out.ensure_finite("encoder_forward")?;
    let enc = net.split_encoder_output(&enc_out);
    let mut g_enc = Matrix::zeros(x.rows(), 2 * h);
    let mut grads = net.zeros_like();

    // KL(q(z|x) ‖ N(0, I)) over data rows.
    let mut kl_sum = 0.0;
    for r in 0..nd {
        let g = g_enc.row_mut(r);
        for k in 0..h {
            let (m, s) = (enc.mean[(r, k)], enc.log_std[(r, k)]);
            kl_sum += kl_std_normal_dim(m, s);
            g[k] -= batch.data_scale * m;
            g[h + k] -= batch.data_scale * ((2.0 * s).exp() - 1.0);
        }
    }

    // Reconstruction, averaged over Monte-Carlo samples.
    let mut recon_sum = 0.0;
    if nd > 0 {
        let l = cfg.mc_samples as f64;
        let x_data = if nd == x.rows() {
            x.clone()
        } else {
            x.gather_rows(&(0..nd).collect::<Vec<_>>())
        };
        for eps in &noise.latent {
            let z = Matrix::from_fn(nd, h, |r, k| enc.mean[(r, k)] + enc.log_std[(r, k)].exp() * eps[(r, k)]);
            let (dec_out, dec_tape) = net.decoder.forward(&z)?;
            dec_out.ensure_finite("decoder_forward")?;
            let (ll, mut g_out) = net.loglik_and_grad(&dec_out, &x_data);
            recon_sum += ll.iter().sum::<f64>() / l;
            let w = batch.data_scale / l;
            g_out.as_mut_slice().iter_mut().for_each(|v| *v *= w);
            let (dec_grads, g_z) = net.decoder.backward(&dec_tape, &g_out)?;
            accumulate(&mut grads.decoder, &dec_grads);
            for r in 0..nd {
                let g = g_enc.row_mut(r);
                for k in 0..h {
                    let gz = g_z[(r, k)];
                    g[k] += gz;
                    g[h + k] += gz * enc.log_std[(r, k)].exp() * eps[(r, k)];
                }
            }
        }
    }

    // Triplet term on posterior parameters.
    let mut trip_sum = 0.0;
    let mut mask_grads = masks.map(MaskPosterior::zeros_like);
    let sampled: Vec<Vec<f64>> = masks
        .map(|m| (0..m.n_queries()).map(|q| m.sample(q, &noise.mask[q])).collect())
        .unwrap_or_default();
    let mut dmask: Vec<Vec<f64>> = vec![vec![0.0; h]; sampled.len()];
    let tw = cfg.triplet_weight * batch.triplet_scale;
    let mut dij_h = vec![0.0; h];
    let mut dil_h = vec![0.0; h];
    for t in batch.triplets {
        let mask = sampled.get(t.query);
        let weight = |k: usize| mask.map_or(1.0, |m| m[k]);
        let p = |r: usize, k: usize| (enc.mean[(r, k)], enc.log_std[(r, k)]);
        let (mut d_ij, mut d_il) = (0.0, 0.0);
        for k in 0..h {
            let (mi, si) = p(t.i, k);
            let (mj, sj) = p(t.j, k);
            let (ml, sl) = p(t.l, k);
            dij_h[k] = sym_kl_dim(mi, si, mj, sj);
            dil_h[k] = sym_kl_dim(mi, si, ml, sl);
            d_ij += weight(k) * dij_h[k];
            d_il += weight(k) * dil_h[k];
        }
        let (ll, a, b) = loglik_from_distances(d_ij, d_il, cfg.likelihood);
        trip_sum += ll;
        if a == 0.0 && b == 0.0 {
            continue;
        }
        for k in 0..h {
            let (mi, si) = p(t.i, k);
            let (mj, sj) = p(t.j, k);
            let (ml, sl) = p(t.l, k);
            let gj = sym_kl_dim_grad(mi, si, mj, sj);
            let gl = sym_kl_dim_grad(mi, si, ml, sl);
            let wa = tw * a * weight(k);
            let wb = tw * b * weight(k);
            g_enc[(t.i, k)] += wa * gj[0] + wb * gl[0];
            g_enc[(t.i, h + k)] += wa * gj[1] + wb * gl[1];
            g_enc[(t.j, k)] += wa * gj[2];
            g_enc[(t.j, h + k)] += wa * gj[3];
            g_enc[(t.l, k)] += wb * gl[2];
            g_enc[(t.l, h + k)] += wb * gl[3];
            if mask.is_some() {
                dmask[t.query][k] += tw * (a * dij_h[k] + b * dil_h[k]);
            }
        }
    }

    // Mask posterior: chain through the sigmoid and the reparameterisation,
    // then subtract the mask KL.
    let mut mask_kl = 0.0;
    if let (Some(m), Some(g)) = (masks, mask_grads.as_mut()) {
        mask_kl = m.kl();
        for q in 0..m.n_queries() {
            for k in 0..h {
                let (mu, raw) = (m.mean[q][k], m.log_std[q][k]);
                let s = crate::distributions::clamp_log_std(raw);
                let mv = sampled[q][k];
                let db = dmask[q][k] * mv * (1.0 - mv);
                g.mean[q][k] = db - mu;
                g.log_std[q][k] = if MaskPosterior::log_std_active(raw) {
                    db * s.exp() * noise.mask[q][k] - ((2.0 * s).exp() - 1.0)
                } else {
                    0.0
                };
            }
        }
    }

    // Clamped encoder log-std entries receive no gradient.
    for r in 0..x.rows() {
        for k in 0..h {
            if enc.clamped[r * h + k] {
                g_enc[(r, h + k)] = 0.0;
            }
        }
    }
    let (enc_grads, _) = net.encoder.backward(&enc_tape, &g_enc)?;
    grads.encoder = enc_grads;

    let kl = batch.data_scale * kl_sum;
    let recon = batch.data_scale * recon_sum;
    let triplet = tw * trip_sum;
    let elbo = -kl + recon + triplet - mask_kl;
    if !elbo.is_finite() {
        return Err(Error::NonFinite {
            op: "objective",
            offset: 0,
        });
    }
    Ok((
        ObjectiveTerms {
            elbo,
            kl,
            recon,
            triplet,
            mask_kl,
        },
        grads,
        mask_grads,
    ))
}
