use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so coordinates whose
    /// true gradient is zero are judged on absolute error.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-6,
            floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: usize,
    /// Coordinates where the loss was not finite at a perturbed point.
    pub non_finite: Vec<usize>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.non_finite.is_empty() && self.max_rel_error < self.tolerance
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max relative error {:.3e} at coordinate {} (tolerance {:.1e}, {} non-finite)",
            self.max_rel_error,
            self.worst_index,
            self.tolerance,
            self.non_finite.len()
        )
    }
}

/// Compares `analytic` with central differences of `loss` around `params`.
///
/// `loss` must be deterministic: any noise it uses has to be frozen.
pub fn grad_check<F>(mut loss: F, params: &[f64], analytic: &[f64], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(Error::shape("grad_check", params.len(), analytic.len()));
    }
    let h = opts.step;
    let mut p = params.to_vec();
    let mut numeric = Vec::with_capacity(p.len());
    let mut non_finite = Vec::new();
    let mut max_rel_error = 0.0;
    let mut worst_index = 0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss(&p);
        p[i] = orig - h;
        let down = loss(&p);
        p[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            non_finite.push(i);
            numeric.push(f64::NAN);
            continue;
        }
        let n = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(opts.floor);
        if rel > max_rel_error || !rel.is_finite() {
            max_rel_error = rel;
            worst_index = i;
        }
        numeric.push(n);
    }
    Ok(GradCheckReport {
        numeric,
        max_rel_error,
        worst_index,
        non_finite,
        tolerance: opts.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact() {
        let p: Vec<f64> = (0..12).map(|i| 0.5 + 0.125 * i as f64).collect();
        let loss = |q: &[f64]| 0.5 * q.iter().map(|v| v * v).sum::<f64>();
        let opts = GradCheckOptions {
            tolerance: 1e-10,
            ..Default::default()
        };
        let report = grad_check(loss, &p, &p, opts).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn corrupted_coordinate_is_named() {
        let p: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let mut g = p.clone();
        g[4] += 0.1;
        let loss = |q: &[f64]| 0.5 * q.iter().map(|v| v * v).sum::<f64>();
        let report = grad_check(loss, &p, &g, GradCheckOptions::default()).unwrap();
        assert!(!report.passed());
        assert_eq!(report.worst_index, 4);
    }

    #[test]
    fn non_finite_loss_is_flagged() {
        let p = vec![1e-6, 1.0];
        let loss = |q: &[f64]| q[0].ln() + q[1];
        let report = grad_check(loss, &p, &[1e6, 1.0], GradCheckOptions::default()).unwrap();
        assert_eq!(report.non_finite, vec![0]);
        assert!(!report.passed());
    }
}
