//! Oracle-prioritized belief networks.
//!
//! A joint generative model of observations `x` and oracle triplet
//! statements `(i, j, l)` ("`j` is more like `i` than `l` is"), trained with
//! doubly stochastic variational inference. The latent posterior of every
//! datapoint is a diagonal Gaussian; triplets are scored with a softmax over
//! negative symmetric-KL distances between posteriors, optionally restricted
//! to a learned per-query mask over latent dimensions.
//!
//! Module map:
//!
//! - [`numerics`]: matrices, tanh MLPs with hand-written backward passes,
//!   Adam / RMSProp-with-momentum, finite-difference gradient checks.
//! - [`distributions`]: diagonal Gaussians, KL terms, the symmetric-KL
//!   latent distance and a Monte-Carlo Jensen–Shannon estimator.
//! - [`oracle`]: simulated oracles over dataset metadata and triplet corpora.
//! - [`model`]: VAE / OPBN objectives, triplet likelihoods, masks, MetricL.
//! - [`trainer`]: minibatching, the optimisation loop and checkpoints.
//! - [`data`]: perturbed MNIST, the two-factor synthetic set, Yale-B loader.
//! - [`eval`]: probes, triplet prediction error, mask reports, recombination.
//! - [`cli`]: configuration and the `opbn` command runner.

pub mod cli;
pub mod data;
pub mod distributions;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
