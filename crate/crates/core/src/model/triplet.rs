use serde::{Deserialize, Serialize};

use crate::distributions::{sym_kl_grad, sym_kl_per_dim, DiagGaussian};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletLikelihood {
    /// `p = e^{−D_ij} / (e^{−D_ij} + e^{−D_il})`.
    Ber,
    /// Bernoulli truncated to 1 once the statement holds (`p ≥ ½`).
    Tber,
}

/// `D_ij = Σ_h m_h D^h(q_i, q_j)`; no mask means `m_h = 1`.
pub fn triplet_distance(qi: &DiagGaussian, qj: &DiagGaussian, mask: Option<&[f64]>) -> Result<f64> {
    let d = sym_kl_per_dim(qi, qj)?;
    match mask {
        None => Ok(d.total()),
        Some(m) if m.len() == qi.dim() => Ok(d.weighted_total(m)),
        Some(m) => Err(Error::shape(
            "triplet_distance",
            qi.dim(),
            format!("mask of length {}", m.len()),
        )),
    }
}

/// Bernoulli probability that `j` is the closer one.
pub fn ber_probability(d_ij: f64, d_il: f64) -> f64 {
    sigmoid(d_il - d_ij)
}

/// Log-likelihood of one triplet from its two distances together with the
/// derivatives with respect to `d_ij` and `d_il`.
pub(crate) fn loglik_from_distances(d_ij: f64, d_il: f64, likelihood: TripletLikelihood) -> (f64, f64, f64) {
    let gap = d_ij - d_il;
    if likelihood == TripletLikelihood::Tber && gap <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = sigmoid(gap);
    (-softplus(gap), -s, s)
}

/// `log p(t_ijl)` under the chosen likelihood.
pub fn triplet_loglik(
    qi: &DiagGaussian,
    qj: &DiagGaussian,
    ql: &DiagGaussian,
    likelihood: TripletLikelihood,
    mask: Option<&[f64]>,
) -> Result<f64> {
    let d_ij = triplet_distance(qi, qj, mask)?;
    let d_il = triplet_distance(qi, ql, mask)?;
    Ok(loglik_from_distances(d_ij, d_il, likelihood).0)
}

/// `(d mean, d log_std)` for one posterior.
pub type GaussianGrad = (Vec<f64>, Vec<f64>);

/// Gradient of [`triplet_loglik`] with respect to the mean and log standard
/// deviation of `q_i`, `q_j` and `q_l` (in that order). Entries whose
/// log-std sits outside the clamp range still get the unclamped formula.
pub fn triplet_loglik_grad(
    qi: &DiagGaussian,
    qj: &DiagGaussian,
    ql: &DiagGaussian,
    likelihood: TripletLikelihood,
    mask: Option<&[f64]>,
) -> Result<(f64, [GaussianGrad; 3])> {
    let h = qi.dim();
    let ones = vec![1.0; h];
    let w = match mask {
        Some(m) if m.len() == h => m,
        Some(m) => {
            return Err(Error::shape(
                "triplet_loglik_grad",
                h,
                format!("mask of length {}", m.len()),
            ))
        }
        None => &ones,
    };
    let d_ij = triplet_distance(qi, qj, Some(w))?;
    let d_il = triplet_distance(qi, ql, Some(w))?;
    let (ll, a, b) = loglik_from_distances(d_ij, d_il, likelihood);
    let [mi_j, si_j, mj, sj] = sym_kl_grad(qi, qj, w)?;
    let [mi_l, si_l, ml, sl] = sym_kl_grad(qi, ql, w)?;
    let comb = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| a * u + b * v).collect() };
    let scale = |x: Vec<f64>, c: f64| -> Vec<f64> { x.into_iter().map(|u| c * u).collect() };
    Ok((
        ll,
        [
            (comb(&mi_j, &mi_l), comb(&si_j, &si_l)),
            (scale(mj, a), scale(sj, a)),
            (scale(ml, b), scale(sl, b)),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(mean: &[f64]) -> DiagGaussian {
        DiagGaussian::new(mean.to_vec(), vec![0.0; mean.len()]).unwrap()
    }

    #[test]
    fn masked_distance_examples() {
        // D^h between N(0,1) and N(μ,1) is μ²/2 per dimension.
        let a = g(&[0.0, 0.0]);
        let b = g(&[0.6f64.sqrt(), 1.8f64.sqrt()]);
        let d = sym_kl_per_dim(&a, &b).unwrap();
        assert!((d.as_slice()[0] - 0.3).abs() < 1e-12 && (d.as_slice()[1] - 0.9).abs() < 1e-12);
        assert_eq!(triplet_distance(&a, &b, Some(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(
            triplet_distance(&a, &b, Some(&[1.0, 1.0])).unwrap(),
            triplet_distance(&a, &b, None).unwrap()
        );
        assert!((triplet_distance(&a, &b, Some(&[1.0, 0.0])).unwrap() - 0.3).abs() < 1e-12);
        assert!(triplet_distance(&a, &b, Some(&[1.0])).is_err());
    }

    #[test]
    fn ber_examples() {
        let (ll, _, _) = loglik_from_distances(0.7, 0.7, TripletLikelihood::Ber);
        assert!((ll + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((ber_probability(0.0, 3f64.ln()) - 0.75).abs() < 1e-15);
        let (ll, _, _) = loglik_from_distances(0.0, 3f64.ln(), TripletLikelihood::Ber);
        assert!((ll - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tber_plateau_and_tail() {
        assert_eq!(
            loglik_from_distances(0.2, 0.9, TripletLikelihood::Tber),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(
            loglik_from_distances(0.5, 0.5, TripletLikelihood::Tber),
            (0.0, 0.0, 0.0)
        );
        let ber = loglik_from_distances(2.0, 0.5, TripletLikelihood::Ber);
        assert_eq!(loglik_from_distances(2.0, 0.5, TripletLikelihood::Tber), ber);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let qi = DiagGaussian::new(vec![0.3, -0.2], vec![0.1, -0.4]).unwrap();
        let qj = DiagGaussian::new(vec![0.9, 0.5], vec![-0.3, 0.2]).unwrap();
        let ql = DiagGaussian::new(vec![-0.4, 0.1], vec![0.0, 0.3]).unwrap();
        let mask = [0.7, 0.4];
        let (_, g) = triplet_loglik_grad(&qi, &qj, &ql, TripletLikelihood::Ber, Some(&mask)).unwrap();
        let qs = [&qi, &qj, &ql];
        let e = 1e-6;
        for (k, q) in qs.iter().enumerate() {
            for h in 0..2 {
                for which in 0..2 {
                    let bump = |d: f64| {
                        let mut m = q.mean().to_vec();
                        let mut s = q.log_std().to_vec();
                        if which == 0 {
                            m[h] += d
                        } else {
                            s[h] += d
                        }
                        let moved = DiagGaussian::new(m, s).unwrap();
                        let mut args = qs.map(|x| x.clone());
                        args[k] = moved;
                        triplet_loglik(&args[0], &args[1], &args[2], TripletLikelihood::Ber, Some(&mask)).unwrap()
                    };
                    let numeric = (bump(e) - bump(-e)) / (2.0 * e);
                    let analytic = if which == 0 { g[k].0[h] } else { g[k].1[h] };
                    assert!(
                        (numeric - analytic).abs() < 1e-7,
                        "{k} {h} {which}: {numeric} vs {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn extreme_gaps_stay_finite() {
        let (ll, a, b) = loglik_from_distances(1e6, 0.0, TripletLikelihood::Ber);
        assert!((ll + 1e6).abs() < 1e-6 && a == -1.0 && b == 1.0);
        let (ll, _, _) = loglik_from_distances(0.0, 1e6, TripletLikelihood::Ber);
        assert!(ll <= 0.0 && ll > -1e-12);
    }
}
