use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::numerics::{Algorithm, Matrix, Optimizer, OptimizerConfig, Ridge};

/// Ridge penalty of the regression probe.
pub const RIDGE_LAMBDA: f64 = 1e-3;
/// L2 penalty of the logistic probe (on standardised features).
pub const LOGISTIC_L2: f64 = 1e-4;
pub const PROBE_MAX_STEPS: usize = 5_000;
pub const PROBE_GRAD_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    /// Multinomial logistic regression; metric is test classification error in percent.
    Logistic,
    /// Ridge regression; metric is test RMSD in target units.
    Ridge,
}

#[derive(Debug, Clone, Copy)]
pub enum ProbeTarget<'a> {
    Classes(&'a [i64]),
    Values(&'a [f64]),
}

impl ProbeTarget<'_> {
    fn len(&self) -> usize {
        match self {
            ProbeTarget::Classes(c) => c.len(),
            ProbeTarget::Values(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Probe {
    Logistic {
        classes: Vec<i64>,
        /// `C × H` weights on standardised features.
        weight: Matrix,
        bias: Vec<f64>,
        feature_mean: Vec<f64>,
        feature_scale: Vec<f64>,
    },
    Ridge(Ridge),
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub kind: ProbeKind,
    pub probe: Probe,
    /// Held-out error percentage (logistic) or RMSD (ridge).
    pub metric: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Optimisation steps taken (0 for the closed-form ridge solve).
    pub steps: usize,
    pub converged: bool,
}

impl Probe {
    pub fn predict_class(&self, row: &[f64]) -> Option<i64> {
        match self {
            Probe::Logistic {
                classes,
                weight,
                bias,
                feature_mean,
                feature_scale,
            } => {
                let z: Vec<f64> = row
                    .iter()
                    .zip(feature_mean)
                    .zip(feature_scale)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect();
                let scores =
                    (0..classes.len()).map(|c| bias[c] + weight.row(c).iter().zip(&z).map(|(w, v)| w * v).sum::<f64>());
                let best = scores.enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (c, s)| if s > acc.1 { (c, s) } else { acc },
                );
                Some(classes[best.0])
            }
            Probe::Ridge(_) => None,
        }
    }

    pub fn predict_value(&self, row: &[f64]) -> Option<f64> {
        match self {
            Probe::Ridge(r) => Some(r.predict(row)),
            Probe::Logistic { .. } => None,
        }
    }
}

/// Fits a probe on rows `train` of `features` and scores it on rows `test`.
/// The two index sets must be disjoint.
pub fn fit_probe(features: &Matrix, target: ProbeTarget<'_>, train: &[usize], test: &[usize]) -> Result<ProbeResult> {
    if target.len() != features.rows() {
        return Err(Error::shape(
            "fit_probe",
            format!("{} targets", features.rows()),
            target.len(),
        ));
    }
    let train_set: HashSet<usize> = train.iter().copied().collect();
    if let Some(leak) = test.iter().find(|i| train_set.contains(i)) {
        return Err(Error::contract(
            "fit_probe",
            format!("row {leak} is in both train and test sets"),
        ));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::contract("fit_probe", "train and test sets must be nonempty"));
    }
    if let Some(&bad) = train.iter().chain(test).find(|&&i| i >= features.rows()) {
        return Err(Error::contract(
            "fit_probe",
            format!("row {bad} outside {} rows", features.rows()),
        ));
    }
    features.ensure_finite("fit_probe")?;
    let xtr = features.gather_rows(train);
    let xte = features.gather_rows(test);
    match target {
        ProbeTarget::Values(v) => {
            let ytr: Vec<f64> = train.iter().map(|&i| v[i]).collect();
            let ridge = Ridge::fit(&xtr, &ytr, RIDGE_LAMBDA)?;
            let sq: f64 = test
                .iter()
                .zip(xte.row_iter())
                .map(|(&i, r)| (ridge.predict(r) - v[i]).powi(2))
                .sum();
            Ok(ProbeResult {
                kind: ProbeKind::Ridge,
                probe: Probe::Ridge(ridge),
                metric: (sq / test.len() as f64).sqrt(),
                train_size: train.len(),
                test_size: test.len(),
                steps: 0,
                converged: true,
            })
        }
        ProbeTarget::Classes(c) => {
            let ytr: Vec<i64> = train.iter().map(|&i| c[i]).collect();
            let (probe, steps, converged) = fit_logistic(&xtr, &ytr)?;
            let wrong = test
                .iter()
                .zip(xte.row_iter())
                .filter(|(&i, r)| probe.predict_class(r) != Some(c[i]))
                .count();
            Ok(ProbeResult {
                kind: ProbeKind::Logistic,
                probe,
                metric: 100.0 * wrong as f64 / test.len() as f64,
                train_size: train.len(),
                test_size: test.len(),
                steps,
                converged,
            })
        }
    }
}

/// Convenience wrapper for separate train and test matrices.
pub fn fit_probe_split(
    train_x: &Matrix,
    train_y: ProbeTarget<'_>,
    test_x: &Matrix,
    test_y: ProbeTarget<'_>,
) -> Result<ProbeResult> {
    if train_x.cols() != test_x.cols() {
        return Err(Error::shape("fit_probe", train_x.cols(), test_x.cols()));
    }
    let n = train_x.rows();
    let mut data = train_x.as_slice().to_vec();
    data.extend_from_slice(test_x.as_slice());
    let x = Matrix::new(n + test_x.rows(), train_x.cols(), data)?;
    let train: Vec<usize> = (0..n).collect();
    let test: Vec<usize> = (n..x.rows()).collect();
    match (train_y, test_y) {
        (ProbeTarget::Classes(a), ProbeTarget::Classes(b)) => {
            let y: Vec<i64> = a.iter().chain(b).copied().collect();
            fit_probe(&x, ProbeTarget::Classes(&y), &train, &test)
        }
        (ProbeTarget::Values(a), ProbeTarget::Values(b)) => {
            let y: Vec<f64> = a.iter().chain(b).copied().collect();
            fit_probe(&x, ProbeTarget::Values(&y), &train, &test)
        }
        _ => Err(Error::contract(
            "fit_probe",
            "train and test targets must be of the same kind",
        )),
    }
}

fn fit_logistic(x: &Matrix, y: &[i64]) -> Result<(Probe, usize, bool)> {
    let classes: Vec<i64> = y
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::DegenerateTarget(format!(
            "logistic probe needs at least two classes, found {}",
            classes.len()
        )));
    }
    let index: BTreeMap<i64, usize> = classes.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let (n, h, c) = (x.rows(), x.cols(), classes.len());
    let feature_mean: Vec<f64> = (0..h)
        .map(|k| x.row_iter().map(|r| r[k]).sum::<f64>() / n as f64)
        .collect();
    let feature_scale: Vec<f64> = (0..h)
        .map(|k| {
            let var = x.row_iter().map(|r| (r[k] - feature_mean[k]).powi(2)).sum::<f64>() / n as f64;
            if var > 1e-24 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let xs = Matrix::from_fn(n, h, |r, k| (x[(r, k)] - feature_mean[k]) / feature_scale[k]);
    let labels: Vec<usize> = y.iter().map(|v| index[v]).collect();

    // Flat parameters: weight (C×H) then bias (C).
    let mut theta = vec![0.0; c * h + c];
    let mut opt = Optimizer::new(
        OptimizerConfig {
            algorithm: Algorithm::Adam,
            learning_rate: 0.05,
            clip_norm: None,
            ..Default::default()
        },
        theta.len(),
    );
    let mut steps = 0;
    let mut converged = false;
    while steps < PROBE_MAX_STEPS {
        let w = Matrix::new(c, h, theta[..c * h].to_vec())?;
        let mut g = xs.matmul_nt(&w)?;
        for (r, row) in g.as_mut_slice().chunks_exact_mut(c).enumerate() {
            for (v, b) in row.iter_mut().zip(&theta[c * h..]) {
                *v += b;
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z * n as f64;
            }
            row[labels[r]] -= 1.0 / n as f64;
        }
        let gw = g.matmul_tn(&xs)?;
        let mut grad = gw.into_vec();
        for (gv, wv) in grad.iter_mut().zip(&theta) {
            *gv += LOGISTIC_L2 * wv;
        }
        grad.extend((0..c).map(|k| g.row_iter().map(|r| r[k]).sum::<f64>()));
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < PROBE_GRAD_TOL {
            converged = true;
            break;
        }
        opt.step(&mut theta, &grad)?;
        steps += 1;
    }
    let weight = Matrix::new(c, h, theta[..c * h].to_vec())?;
    let bias = theta[c * h..].to_vec();
    Ok((
        Probe::Logistic {
            classes,
            weight,
            bias,
            feature_mean,
            feature_scale,
        },
        steps,
        converged,
    ))
}
