//! Finite-difference check of every model variant's analytic gradient on a
//! tiny instance, plus a hand-rolled check against a user-supplied loss.

use opbn::cli::{gradcheck_tiny, GRADCHECK_TOLERANCE};
use opbn::model::{ModelSpec, TripletLikelihood, Variant};
use opbn::numerics::{grad_check, GradCheckOptions};

fn main() -> anyhow::Result<()> {
    for variant in [Variant::Vae, Variant::Opbn, Variant::OpbnMasked, Variant::Metricl] {
        for likelihood in [TripletLikelihood::Ber, TripletLikelihood::Tber] {
            let spec = ModelSpec {
                variant,
                likelihood,
                ..ModelSpec::default()
            };
            let report = gradcheck_tiny(&spec, 0)?;
            println!(
                "{:<12} {:?}: max relative error {:.2e} over {} parameters ({})",
                variant.name(),
                likelihood,
                report.max_rel_error,
                report.numeric.len(),
                if report.max_rel_error < GRADCHECK_TOLERANCE {
                    "ok"
                } else {
                    "FAILED"
                }
            );
        }
    }

    // The checker works on any flat parameter vector.
    let loss = |p: &[f64]| p[0].sin() * p[1] + p[1].powi(3);
    let p = [0.3f64, -1.2];
    let analytic = [p[0].cos() * p[1], p[0].sin() + 3.0 * p[1] * p[1]];
    let report = grad_check(loss, &p, &analytic, GradCheckOptions::default())?;
    println!("sin(a) b + b^3: max relative error {:.2e}", report.max_rel_error);
    Ok(())
}
