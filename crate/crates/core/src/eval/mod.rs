//! Evaluation: linear probes on frozen representations, held-out triplet
//! prediction error, mask reports, latent recombination and embedding export.

mod export;
mod masks;
mod probe;
mod recombine;
mod report;
mod triplets;

pub use export::export_embeddings;
pub use masks::{active_dims, cosine_similarity, mask_report, MaskReport, DEFAULT_MASK_THRESHOLD};
pub use probe::{
    fit_probe, fit_probe_split, Probe, ProbeKind, ProbeResult, ProbeTarget, LOGISTIC_L2, PROBE_GRAD_TOL,
    PROBE_MAX_STEPS, RIDGE_LAMBDA,
};
pub use recombine::{recombine_code, recombine_latents};
pub use report::{EvalReport, EvalRow};
pub use triplets::{
    check_disjoint, scorer_for, triplet_pred_error, triplet_pred_error_by_query, EmbeddingScorer, FnScorer,
    PosteriorScorer, TripletScorer,
};

use crate::data::DatasetBundle;
use crate::error::Result;
use crate::model::Model;
use crate::oracle::{Attribute, Query, Triplet};

/// Notes recorded in every report about how the metrics are computed.
pub fn method_notes() -> Vec<String> {
    vec![
        format!("labels: multinomial logistic probe on posterior means (L2 {LOGISTIC_L2}, standardised)"),
        format!("angles: ridge probe on posterior means (lambda {RIDGE_LAMBDA}), RMSD in degrees"),
        "triplets: native distance per model (masked sym-KL with the query's mean mask for masked OPBN, \
         sym-KL for VAE and OPBN, squared Euclidean for MetricL); ties count one half"
            .into(),
    ]
}

/// All metrics the datasets support for one model. Probes train on `train`
/// and score on `test`; `held_out` triplets index rows of `test`.
pub fn evaluate_model(
    model: &Model,
    name: &str,
    setting: &str,
    train: &DatasetBundle,
    test: &DatasetBundle,
    held_out: &[Triplet],
    queries: &[Query],
) -> Result<EvalRow> {
    let rtr = model.represent(&train.x)?;
    let rte = model.represent(&test.x)?;
    let classification_error = match (train.labels(), test.labels()) {
        (Some(a), Some(b)) => {
            Some(fit_probe_split(&rtr, ProbeTarget::Classes(&a), &rte, ProbeTarget::Classes(&b))?.metric)
        }
        _ => None,
    };
    let rmsd = |attr: Attribute| -> Result<Option<f64>> {
        match (train.attribute(attr), test.attribute(attr)) {
            (Some(a), Some(b)) => Ok(Some(
                fit_probe_split(&rtr, ProbeTarget::Values(&a), &rte, ProbeTarget::Values(&b))?.metric,
            )),
            _ => Ok(None),
        }
    };
    let azimuth_rmsd = rmsd(Attribute::Azimuth)?;
    let elevation_rmsd = rmsd(Attribute::Elevation)?;
    let (triplet_error, per_query) = if held_out.is_empty() {
        (None, Vec::new())
    } else {
        let scorer = scorer_for(model, &test.x)?;
        let per = triplet_pred_error_by_query(scorer.as_ref(), held_out, queries.len());
        (
            Some(triplet_pred_error(scorer.as_ref(), held_out)),
            queries.iter().map(|q| q.name.clone()).zip(per).collect(),
        )
    };
    Ok(EvalRow {
        model: name.into(),
        setting: setting.into(),
        classification_error,
        azimuth_rmsd,
        elevation_rmsd,
        triplet_error,
        per_query,
    })
}
