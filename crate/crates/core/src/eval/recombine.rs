use super::masks::active_dims;
use crate::error::{Error, Result};
use crate::model::{EncoderDecoder, MaskPosterior};
use crate::numerics::Matrix;

/// Latent code spliced from images `a` and `b`: dimensions active for
/// `take_from_b` come from `b`'s posterior mean, dimensions active only for
/// `take_from_a` from `a`'s, and the rest average the two.
pub fn recombine_code(
    net: &EncoderDecoder,
    masks: &MaskPosterior,
    a: &[f64],
    b: &[f64],
    take_from_b: usize,
    take_from_a: usize,
    threshold: f64,
) -> Result<Vec<f64>> {
    if !masks.is_trained() {
        return Err(Error::contract("recombine_latents", "masks are untrained"));
    }
    for q in [take_from_a, take_from_b] {
        if q >= masks.n_queries() {
            return Err(Error::contract(
                "recombine_latents",
                format!("query {q} is not registered"),
            ));
        }
    }
    let x = Matrix::from_rows(&[a.to_vec(), b.to_vec()])?;
    let (mean, _) = net.encode_matrices(&x)?;
    let from_b = active_dims(&masks.mean_mask(take_from_b), threshold);
    let from_a = active_dims(&masks.mean_mask(take_from_a), threshold);
    Ok((0..net.latent_dim)
        .map(|h| {
            if from_b.contains(&h) {
                mean[(1, h)]
            } else if from_a.contains(&h) {
                mean[(0, h)]
            } else {
                0.5 * (mean[(0, h)] + mean[(1, h)])
            }
        })
        .collect())
}

/// Decoded mean image of [`recombine_code`].
pub fn recombine_latents(
    net: &EncoderDecoder,
    masks: &MaskPosterior,
    a: &[f64],
    b: &[f64],
    take_from_b: usize,
    take_from_a: usize,
    threshold: f64,
) -> Result<Vec<f64>> {
    let z = recombine_code(net, masks, a, b, take_from_b, take_from_a, threshold)?;
    Ok(net.decode_mean(&Matrix::new(1, z.len(), z)?)?.into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DecoderFamily;
    use crate::rng::{self, Purpose};

    fn setup() -> (EncoderDecoder, MaskPosterior) {
        let mut r = rng::stream(2, Purpose::Test, 0);
        let net = EncoderDecoder::new(6, &[5], 4, DecoderFamily::Bernoulli, &mut r);
        let mut m = MaskPosterior::new(2, 4);
        m.mean[0] = vec![4.0, 4.0, -4.0, -4.0];
        m.mean[1] = vec![-4.0, -4.0, 4.0, -4.0];
        (net, m)
    }

    #[test]
    fn same_image_reconstructs() {
        let (net, m) = setup();
        let a = vec![0.1, 0.9, 0.3, 0.5, 0.0, 1.0];
        let out = recombine_latents(&net, &m, &a, &a, 0, 1, 0.2).unwrap();
        let (mean, _) = net.encode_matrices(&Matrix::new(1, 6, a).unwrap()).unwrap();
        assert_eq!(out, net.decode_mean(&mean).unwrap().into_vec());
    }

    #[test]
    fn code_selection() {
        let (net, m) = setup();
        let a = vec![0.1; 6];
        let b = vec![0.8; 6];
        let z = recombine_code(&net, &m, &a, &b, 0, 1, 0.2).unwrap();
        let (mean, _) = net
            .encode_matrices(&Matrix::from_rows(&[a.clone(), b.clone()]).unwrap())
            .unwrap();
        assert_eq!(z[0], mean[(1, 0)]);
        assert_eq!(z[2], mean[(0, 2)]);
        assert_eq!(z[3], 0.5 * (mean[(0, 3)] + mean[(1, 3)]));
        let swapped = recombine_latents(&net, &m, &b, &a, 0, 1, 0.2).unwrap();
        assert_ne!(recombine_latents(&net, &m, &a, &b, 0, 1, 0.2).unwrap(), swapped);
    }

    #[test]
    fn untrained_masks_rejected() {
        let (net, _) = setup();
        let m = MaskPosterior::new(2, 4);
        assert!(matches!(
            recombine_latents(&net, &m, &[0.0; 6], &[0.0; 6], 0, 1, 0.2),
            Err(Error::Contract { .. })
        ));
    }
}
