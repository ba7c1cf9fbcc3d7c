use crate::distributions::{clamp_log_std, kl_std_normal_dim, LOG_STD_MAX, LOG_STD_MIN};
use crate::numerics::{sigmoid, Params};

/// Initial log standard deviation of every mask logit.
pub const MASK_INIT_LOG_STD: f64 = -2.0;

/// Variational posterior over per-query mask logits `b^q ~ N(μ_q, σ_q²)`,
/// with mask `m = sigmoid(b)` and standard-normal prior on `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPosterior {
    pub mean: Vec<Vec<f64>>,
    pub log_std: Vec<Vec<f64>>,
}

impl MaskPosterior {
    pub fn new(n_queries: usize, latent_dim: usize) -> Self {
        Self {
            mean: vec![vec![0.0; latent_dim]; n_queries],
            log_std: vec![vec![MASK_INIT_LOG_STD; latent_dim]; n_queries],
        }
    }

    pub fn n_queries(&self) -> usize {
        self.mean.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mean: self.mean.iter().map(|m| vec![0.0; m.len()]).collect(),
            log_std: self.log_std.iter().map(|m| vec![0.0; m.len()]).collect(),
        }
    }

    /// `sigmoid(μ_q)`, the mask used at evaluation time.
    pub fn mean_mask(&self, query: usize) -> Vec<f64> {
        self.mean[query].iter().map(|&b| sigmoid(b)).collect()
    }

    /// Reparameterised mask sample `sigmoid(μ + σ η)`.
    pub fn sample(&self, query: usize, eta: &[f64]) -> Vec<f64> {
        self.mean[query]
            .iter()
            .zip(&self.log_std[query])
            .zip(eta)
            .map(|((&m, &s), &e)| sigmoid(m + clamp_log_std(s).exp() * e))
            .collect()
    }

    /// `Σ_q KL(q(b^q) ‖ N(0, I))`.
    pub fn kl(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .flat_map(|(m, s)| m.iter().zip(s))
            .map(|(&m, &s)| kl_std_normal_dim(m, clamp_log_std(s)))
            .sum()
    }

    /// True once training has moved any mask mean off its initial value.
    pub fn is_trained(&self) -> bool {
        self.mean.iter().flatten().any(|&m| m != 0.0)
    }

    pub(crate) fn log_std_active(s: f64) -> bool {
        (LOG_STD_MIN..=LOG_STD_MAX).contains(&s)
    }
}

impl Params for MaskPosterior {
    fn arrays(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(2 * self.mean.len());
        for (q, (m, s)) in self.mean.iter().zip(&self.log_std).enumerate() {
            out.push((format!("{q}.mean"), m.as_slice()));
            out.push((format!("{q}.log_std"), s.as_slice()));
        }
        out
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.mean.len());
        for (m, s) in self.mean.iter_mut().zip(self.log_std.iter_mut()) {
            out.push(m.as_mut_slice());
            out.push(s.as_mut_slice());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state() {
        let m = MaskPosterior::new(3, 4);
        assert_eq!(m.mean_mask(1), vec![0.5; 4]);
        assert!(!m.is_trained());
        // KL of N(0, e^{-4}) to N(0,1) per dimension.
        let per = 0.5 * ((-4.0f64).exp() - 1.0 + 4.0);
        assert!((m.kl() - 12.0 * per).abs() < 1e-12);
    }

    #[test]
    fn sample_with_zero_noise_is_mean_mask() {
        let mut m = MaskPosterior::new(1, 2);
        m.mean[0] = vec![2.0, -1.0];
        assert_eq!(m.sample(0, &[0.0, 0.0]), m.mean_mask(0));
        assert!(m.is_trained());
    }
}
