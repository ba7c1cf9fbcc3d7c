//! Probabilistic models: the VAE, the oracle-prioritized belief network
//! (OPBN) with optional per-query latent masks, and the MetricL baseline.
//!
//! Objectives are *maximised*: [`elbo_opbn`] and [`elbo_vae`] return the
//! evidence lower bound and its gradient. [`metricl_loss`] is a loss and is
//! minimised.

mod masks;
mod metricl;
mod network;
mod objective;
mod triplet;

pub use masks::{MaskPosterior, MASK_INIT_LOG_STD};
pub use metricl::{metricl_loss, MetricEmbedder};
pub use network::{DecoderFamily, EncoderDecoder};
pub use objective::{elbo_opbn, elbo_vae, Noise, ObjectiveBatch, ObjectiveTerms, OpbnParams};
pub use triplet::{
    ber_probability, triplet_distance, triplet_loglik, triplet_loglik_grad, GaussianGrad, TripletLikelihood,
};

use serde::{Deserialize, Serialize};

/// Which model family a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Vae,
    Opbn,
    OpbnMasked,
    Metricl,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Vae => "vae",
            Variant::Opbn => "opbn",
            Variant::OpbnMasked => "opbn-masked",
            Variant::Metricl => "metricl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "vae" => Variant::Vae,
            "opbn" => Variant::Opbn,
            "opbn-masked" => Variant::OpbnMasked,
            "metricl" => Variant::Metricl,
            _ => return None,
        })
    }

    pub fn uses_triplets(self) -> bool {
        !matches!(self, Variant::Vae)
    }

    pub fn is_generative(self) -> bool {
        !matches!(self, Variant::Metricl)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub likelihood: TripletLikelihood,
    pub masked: bool,
    /// Monte-Carlo samples per datapoint for the reconstruction term.
    pub mc_samples: usize,
    pub decoder: DecoderFamily,
    /// Multiplier on the triplet term (1 gives the plain joint ELBO).
    pub triplet_weight: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            likelihood: TripletLikelihood::Ber,
            masked: false,
            mc_samples: 1,
            decoder: DecoderFamily::Bernoulli,
            triplet_weight: 1.0,
        }
    }
}

/// Architecture and objective choices that fix a model's parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub decoder: DecoderFamily,
    pub likelihood: TripletLikelihood,
    pub triplet_weight: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            variant: Variant::OpbnMasked,
            hidden: vec![128],
            latent_dim: 8,
            decoder: DecoderFamily::Bernoulli,
            likelihood: TripletLikelihood::Ber,
            triplet_weight: 1.0,
        }
    }
}

impl ModelSpec {
    pub fn objective(&self, mc_samples: usize) -> ObjectiveConfig {
        ObjectiveConfig {
            likelihood: self.likelihood,
            masked: self.variant == Variant::OpbnMasked,
            mc_samples,
            decoder: self.decoder,
            triplet_weight: self.triplet_weight,
        }
    }
}

/// Any trainable model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Generative(OpbnParams),
    Metric(MetricEmbedder),
}

impl Model {
    /// Freshly initialised model drawn from the `(seed, Init)` stream.
    pub fn init(spec: &ModelSpec, data_dim: usize, n_queries: usize, seed: u64) -> Self {
        let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Init, 0);
        match spec.variant {
            Variant::Metricl => Model::Metric(MetricEmbedder::new(data_dim, &spec.hidden, spec.latent_dim, &mut rng)),
            v => Model::Generative(OpbnParams {
                net: EncoderDecoder::new(data_dim, &spec.hidden, spec.latent_dim, spec.decoder, &mut rng),
                masks: (v == Variant::OpbnMasked).then(|| MaskPosterior::new(n_queries, spec.latent_dim)),
            }),
        }
    }

    pub fn as_generative(&self) -> Option<&OpbnParams> {
        match self {
            Model::Generative(p) => Some(p),
            Model::Metric(_) => None,
        }
    }

    pub fn masks(&self) -> Option<&MaskPosterior> {
        self.as_generative().and_then(|p| p.masks.as_ref())
    }

    /// Representation used by probes: posterior means, or embeddings.
    pub fn represent(&self, x: &crate::numerics::Matrix) -> crate::Result<crate::numerics::Matrix> {
        match self {
            Model::Generative(p) => Ok(p.net.encode_matrices(x)?.0),
            Model::Metric(m) => m.embed(x),
        }
    }
}

impl crate::numerics::Params for Model {
    fn arrays(&self) -> Vec<(String, &[f64])> {
        match self {
            Model::Generative(p) => p.arrays(),
            Model::Metric(m) => m.arrays(),
        }
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Model::Generative(p) => p.arrays_mut(),
            Model::Metric(m) => m.arrays_mut(),
        }
    }
}
