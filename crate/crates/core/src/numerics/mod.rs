//! Dense numerics the models are built on.
//!
//! Everything is `f64`. The MLP graph is fixed (affine + activation per
//! layer), so forward passes record a [`Tape`] and backward passes are
//! written out by hand rather than derived by a general autodiff engine.

mod gradcheck;
mod linalg;
mod matrix;
mod mlp;
mod optim;
mod params;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use linalg::{cholesky_solve, Ridge};
pub use matrix::Matrix;
pub use mlp::{Activation, Layer, Mlp, Tape};
pub use optim::{Algorithm, Optimizer, OptimizerConfig};
pub(crate) use params::{accumulate, prefixed};
pub use params::{flatten, layout, unflatten, FlatParams, LayoutEntry, ParamLayout, Params};

/// Numerically stable `log(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-20.0, -3.0, -0.5, 0.0, 0.5, 3.0, 20.0] {
            let naive = (1.0f64 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12, "x = {x}");
        }
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for &x in &[0.0, 0.3, 4.0, 40.0, 700.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}
