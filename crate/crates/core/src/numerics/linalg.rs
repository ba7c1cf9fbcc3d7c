use super::Matrix;
use crate::error::{Error, Result};

/// Solves `a x = b` for symmetric positive-definite `a` by Cholesky
/// factorisation. `b` may hold several right-hand sides as columns.
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::shape(
            "cholesky_solve",
            format!("{n}x{n} system"),
            format!("{:?} / {:?}", a.shape(), b.shape()),
        ));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::contract(
                "cholesky_solve",
                format!("matrix not positive definite at pivot {j}"),
            ));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Ridge regression with an unpenalised intercept:
/// minimises `Σ (y − b − w·x)² + λ‖w‖²` in closed form.
#[derive(Debug, Clone)]
pub struct Ridge {
    weights: Vec<f64>,
    intercept: f64,
    x_mean: Vec<f64>,
}

impl Ridge {
    pub fn fit(x: &Matrix, target: &[f64], lambda: f64) -> Result<Self> {
        if x.rows() != target.len() || x.rows() == 0 {
            return Err(Error::shape("Ridge::fit", x.rows(), target.len()));
        }
        let n = x.rows() as f64;
        let d = x.cols();
        let x_mean: Vec<f64> = (0..d).map(|c| x.row_iter().map(|r| r[c]).sum::<f64>() / n).collect();
        let y_mean = target.iter().sum::<f64>() / n;
        let mut xc = x.clone();
        for row in xc.as_mut_slice().chunks_exact_mut(d) {
            for (v, m) in row.iter_mut().zip(&x_mean) {
                *v -= m;
            }
        }
        let mut gram = xc.matmul_tn(&xc)?;
        for k in 0..d {
            gram[(k, k)] += lambda;
        }
        let yc = Matrix::new(target.len(), 1, target.iter().map(|t| t - y_mean).collect())?;
        let rhs = xc.matmul_tn(&yc)?;
        let weights = cholesky_solve(&gram, &rhs)?.into_vec();
        Ok(Self {
            weights,
            intercept: y_mean,
            x_mean,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept_at_mean(&self) -> f64 {
        self.intercept
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.x_mean)
                .zip(&self.weights)
                .map(|((p, m), w)| (p - m) * w)
                .sum::<f64>()
    }
}
