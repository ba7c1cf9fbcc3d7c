//! Diagonal Gaussian posteriors and the divergences between them.
//!
//! The latent distance used by the triplet likelihood is the per-dimension
//! symmetric KL divergence `½KL(a‖b) + ½KL(b‖a)`. For univariate Gaussians
//! the log terms cancel and it reduces to
//!
//! ```text
//! D = ½(cosh(2(s_a − s_b)) − 1) + ¼(μ_a − μ_b)²(e^{−2 s_a} + e^{−2 s_b})
//! ```
//!
//! with `s = log σ`. That form is non-negative, exactly zero for identical
//! arguments and exactly symmetric in floating point. The Jensen–Shannon
//! divergence it stands in for has no closed form; [`js_mc_estimate`]
//! estimates it by sampling and is only used as a reference.

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Factorised Gaussian `N(mean, diag(exp(2 log_std)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    log_std: Vec<f64>,
}

impl DiagGaussian {
    /// Builds the distribution, clamping `log_std` into `[-5, 2]`.
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        if mean.len() != log_std.len() {
            return Err(Error::shape("DiagGaussian::new", mean.len(), log_std.len()));
        }
        if let Some(offset) = mean.iter().chain(&log_std).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "DiagGaussian::new",
                offset,
            });
        }
        let log_std = log_std.into_iter().map(clamp_log_std).collect();
        Ok(Self { mean, log_std })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            log_std: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|s| s.exp()).collect()
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(z)
            .map(|((&m, &s), &x)| univariate_log_density(x, m, s))
            .sum()
    }
}

pub fn clamp_log_std(s: f64) -> f64 {
    s.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

fn univariate_log_density(x: f64, mean: f64, log_std: f64) -> f64 {
    let u = (x - mean) * (-log_std).exp();
    -0.5 * LN_2PI - log_std - 0.5 * u * u
}

/// Per-dimension divergences `D^h`; every entry is finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceVector(Vec<f64>);

impl DivergenceVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn weighted_total(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(d, m)| d * m).sum()
    }
}

/// `z = mean + exp(log_std) ⊙ eps`.
pub fn sample_reparam(q: &DiagGaussian, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != q.dim() {
        return Err(Error::shape("sample_reparam", q.dim(), eps.len()));
    }
    Ok(q.mean
        .iter()
        .zip(&q.log_std)
        .zip(eps)
        .map(|((m, s), e)| m + s.exp() * e)
        .collect())
}

/// `KL(q ‖ N(0, I))` in closed form.
pub fn kl_to_std_normal(q: &DiagGaussian) -> f64 {
    q.mean
        .iter()
        .zip(&q.log_std)
        .map(|(&m, &s)| kl_std_normal_dim(m, s))
        .sum()
}

pub(crate) fn kl_std_normal_dim(mean: f64, log_std: f64) -> f64 {
    0.5 * (mean * mean + (2.0 * log_std).exp() - 1.0 - 2.0 * log_std)
}

/// Gradient of [`kl_to_std_normal`] with respect to `(mean, log_std)`.
pub fn kl_to_std_normal_grad(q: &DiagGaussian) -> (Vec<f64>, Vec<f64>) {
    let dmean = q.mean.clone();
    let dlog_std = q.log_std.iter().map(|&s| (2.0 * s).exp() - 1.0).collect();
    (dmean, dlog_std)
}

/// Symmetric KL divergence of one latent dimension.
pub(crate) fn sym_kl_dim(mean_a: f64, log_std_a: f64, mean_b: f64, log_std_b: f64) -> f64 {
    let diff = mean_a - mean_b;
    let r = 2.0 * (log_std_a - log_std_b).abs();
    0.5 * (r.cosh() - 1.0) + 0.25 * diff * diff * ((-2.0 * log_std_a).exp() + (-2.0 * log_std_b).exp())
}

/// Partial derivatives of [`sym_kl_dim`]: `(d/dμa, d/dsa, d/dμb, d/dsb)`.
pub(crate) fn sym_kl_dim_grad(mean_a: f64, log_std_a: f64, mean_b: f64, log_std_b: f64) -> [f64; 4] {
    let diff = mean_a - mean_b;
    let inv_a = (-2.0 * log_std_a).exp();
    let inv_b = (-2.0 * log_std_b).exp();
    let dmean = 0.5 * diff * (inv_a + inv_b);
    let sh = (2.0 * (log_std_a - log_std_b)).sinh();
    [
        dmean,
        sh - 0.5 * diff * diff * inv_a,
        -dmean,
        -sh - 0.5 * diff * diff * inv_b,
    ]
}

/// `D^h = ½KL(a_h‖b_h) + ½KL(b_h‖a_h)` for every latent dimension.
pub fn sym_kl_per_dim(a: &DiagGaussian, b: &DiagGaussian) -> Result<DivergenceVector> {
    if a.dim() != b.dim() {
        return Err(Error::shape("sym_kl_per_dim", a.dim(), b.dim()));
    }
    Ok(DivergenceVector(
        (0..a.dim())
            .map(|h| sym_kl_dim(a.mean[h], a.log_std[h], b.mean[h], b.log_std[h]))
            .collect(),
    ))
}

/// Gradients of `Σ_h w_h D^h` with respect to both arguments, as
/// `(dmean_a, dlog_std_a, dmean_b, dlog_std_b)`.
pub fn sym_kl_grad(a: &DiagGaussian, b: &DiagGaussian, weights: &[f64]) -> Result<[Vec<f64>; 4]> {
    if a.dim() != b.dim() || weights.len() != a.dim() {
        return Err(Error::shape(
            "sym_kl_grad",
            a.dim(),
            format!("{} / {} weights", b.dim(), weights.len()),
        ));
    }
    let mut out = [
        vec![0.0; a.dim()],
        vec![0.0; a.dim()],
        vec![0.0; a.dim()],
        vec![0.0; a.dim()],
    ];
    for h in 0..a.dim() {
        let g = sym_kl_dim_grad(a.mean[h], a.log_std[h], b.mean[h], b.log_std[h]);
        for (o, gv) in out.iter_mut().zip(g) {
            o[h] = weights[h] * gv;
        }
    }
    Ok(out)
}

/// Per-dimension Monte-Carlo Jensen–Shannon estimate with standard errors.
#[derive(Debug, Clone)]
pub struct JsEstimate {
    pub estimate: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Estimates `JS(a_h ‖ b_h) = ½KL(a_h‖m_h) + ½KL(b_h‖m_h)`, `m = ½a + ½b`,
/// per dimension from `samples` draws of each argument. Values are in nats.
pub fn js_mc_estimate(a: &DiagGaussian, b: &DiagGaussian, samples: usize, rng: &mut Rng) -> Result<JsEstimate> {
    if a.dim() != b.dim() {
        return Err(Error::shape("js_mc_estimate", a.dim(), b.dim()));
    }
    if samples < 1000 {
        return Err(Error::contract(
            "js_mc_estimate",
            format!("needs at least 1000 samples, got {samples}"),
        ));
    }
    let n = samples as f64;
    let mut estimate = Vec::with_capacity(a.dim());
    let mut std_err = Vec::with_capacity(a.dim());
    for h in 0..a.dim() {
        let (ma, sa, mb, sb) = (a.mean[h], a.log_std[h], b.mean[h], b.log_std[h]);
        let log_mix = |x: f64| {
            let la = univariate_log_density(x, ma, sa);
            let lb = univariate_log_density(x, mb, sb);
            let hi = la.max(lb);
            hi + ((la - hi).exp() + (lb - hi).exp()).ln() - std::f64::consts::LN_2
        };
        // Each half is a mean of i.i.d. terms; the two halves are independent.
        let mut half = |m: f64, s: f64| {
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..samples {
                let x = m + s.exp() * rng::normal(rng);
                let t = univariate_log_density(x, m, s) - log_mix(x);
                sum += t;
                sum_sq += t * t;
            }
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
            (mean, var / n)
        };
        let (ka, va) = half(ma, sa);
        let (kb, vb) = half(mb, sb);
        estimate.push(0.5 * ka + 0.5 * kb);
        std_err.push((0.25 * va + 0.25 * vb).sqrt());
    }
    Ok(JsEstimate { estimate, std_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    fn g(mean: &[f64], log_std: &[f64]) -> DiagGaussian {
        DiagGaussian::new(mean.to_vec(), log_std.to_vec()).unwrap()
    }

    #[test]
    fn log_std_is_clamped() {
        let q = g(&[0.0, 0.0, 0.0], &[-9.0, 1.0, 7.0]);
        assert_eq!(q.log_std(), &[-5.0, 1.0, 2.0]);
        assert!(DiagGaussian::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(DiagGaussian::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn reparam_examples() {
        let q = g(&[0.3, -1.2], &[0.4, -0.1]);
        assert_eq!(sample_reparam(&q, &[0.0, 0.0]).unwrap(), vec![0.3, -1.2]);
        let unit = DiagGaussian::standard(2);
        assert_eq!(sample_reparam(&unit, &[1.0, -1.0]).unwrap(), vec![1.0, -1.0]);
        assert!(sample_reparam(&unit, &[1.0]).is_err());
    }

    #[test]
    fn reparam_moments_match() {
        let q = g(&[1.5], &[-0.3]);
        let mut r = rng::stream(11, Purpose::Test, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_reparam(&q, &[rng::normal(&mut r)]).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sigma2 = (2.0f64 * -0.3).exp();
        assert!((mean - 1.5).abs() < 3.0 * (sigma2 / n as f64).sqrt());
        // Var of the sample variance of a Gaussian is 2σ⁴/(n−1).
        assert!((var - sigma2).abs() < 3.0 * (2.0 * sigma2 * sigma2 / (n - 1) as f64).sqrt());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_to_std_normal(&DiagGaussian::standard(4)), 0.0);
        assert!((kl_to_std_normal(&g(&[1.0], &[0.0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sym_kl_examples() {
        let a = g(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(sym_kl_per_dim(&a, &a).unwrap().as_slice(), &[0.0, 0.0]);
        let b = g(&[1.0, 1.0], &[0.0, 0.0]);
        for v in sym_kl_per_dim(&a, &b).unwrap().as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
        let c = g(&[0.0], &[2f64.ln()]);
        let d = sym_kl_per_dim(&g(&[0.0], &[0.0]), &c).unwrap();
        assert!((d.as_slice()[0] - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn sym_kl_matches_textbook_kl() {
        // KL(N(m1,s1²)‖N(m2,s2²)) = log(s2/s1) + (s1² + (m1−m2)²)/(2 s2²) − ½
        let kl =
            |m1: f64, s1: f64, m2: f64, s2: f64| (s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5;
        let cases = [(0.3, -0.7, -1.1, 0.4), (2.0, 1.0, 2.5, -2.0), (-0.2, 0.0, 0.0, 0.1)];
        for (ma, sa, mb, sb) in cases {
            let want = 0.5 * kl(ma, f64::exp(sa), mb, f64::exp(sb)) + 0.5 * kl(mb, f64::exp(sb), ma, f64::exp(sa));
            assert!((sym_kl_dim(ma, sa, mb, sb) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn js_estimator_contract() {
        let a = g(&[0.0], &[0.0]);
        let mut r = rng::stream(3, Purpose::Test, 1);
        assert!(js_mc_estimate(&a, &a, 999, &mut r).is_err());
        let est = js_mc_estimate(&a, &a, 5000, &mut r).unwrap();
        assert!(est.estimate[0].abs() <= 3.0 * est.std_err[0] + 1e-12);
    }

    #[test]
    fn js_of_far_apart_gaussians_approaches_ln2() {
        let a = g(&[-20.0], &[0.0]);
        let b = g(&[20.0], &[0.0]);
        let mut r = rng::stream(3, Purpose::Test, 2);
        let est = js_mc_estimate(&a, &b, 2000, &mut r).unwrap();
        assert!((est.estimate[0] - std::f64::consts::LN_2).abs() < 1e-6);
    }
}
