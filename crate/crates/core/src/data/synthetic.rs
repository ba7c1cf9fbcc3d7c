use rand::Rng as _;

use super::{DatasetBundle, MetaRow, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::{self, Rng};

/// Planted shape factor; the discriminant is the `label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Circle = 0,
    Square = 1,
    Triangle = 2,
    Bar = 3,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Circle, Shape::Square, Shape::Triangle, Shape::Bar];

    fn contains(self, u: f64, v: f64) -> bool {
        match self {
            Shape::Circle => u * u + v * v <= 0.36,
            Shape::Square => u.abs() <= 0.5 && v.abs() <= 0.5,
            Shape::Triangle => (-0.5..=0.6).contains(&v) && u.abs() <= 0.6 * (0.6 - v) / 1.1,
            Shape::Bar => u.abs() <= 0.2 && v.abs() <= 0.65,
        }
    }
}

/// Rendering knobs for the two-factor images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFactorParams {
    pub size: usize,
    /// Azimuth range is `[-max_azimuth, max_azimuth]` degrees.
    pub max_azimuth: f64,
    pub max_elevation: f64,
    /// Standard deviation of additive pixel noise.
    pub pixel_noise: f64,
}

impl Default for TwoFactorParams {
    fn default() -> Self {
        Self {
            size: 16,
            max_azimuth: 90.0,
            max_elevation: 40.0,
            pixel_noise: 0.02,
        }
    }
}

/// Renders one image. Light direction enters as a linear shading ramp whose
/// horizontal slope follows azimuth and vertical slope follows elevation,
/// applied to both object and background.
pub fn render_twofactor(shape: Shape, azimuth: f64, elevation: f64, size: usize) -> Vec<f64> {
    let sx = azimuth / 90.0;
    let sy = elevation / 90.0;
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = 2.0 * (x as f64 + 0.5) / size as f64 - 1.0;
            let v = 1.0 - 2.0 * (y as f64 + 0.5) / size as f64;
            let ramp = sx * u + sy * v;
            let value = if shape.contains(u, v) {
                0.55 + 0.3 * ramp
            } else {
                0.12 + 0.07 * ramp
            };
            out.push(value);
        }
    }
    out
}

/// Two independent planted factors: a shape class (`label`) and a lighting
/// direction (`azimuth`, `elevation`), plus mild Gaussian pixel noise.
pub fn gen_twofactor_synthetic(n: usize, params: TwoFactorParams, rng: &mut Rng) -> Result<DatasetBundle> {
    if n < 10 {
        return Err(Error::Data(format!(
            "two-factor dataset needs at least 10 rows, got {n}"
        )));
    }
    let d = params.size * params.size;
    let mut data = Vec::with_capacity(n * d);
    let mut meta = Vec::with_capacity(n);
    for i in 0..n {
        let shape = Shape::ALL[rng.random_range(0..4)];
        let azimuth = rng.random_range(-params.max_azimuth..=params.max_azimuth);
        let elevation = rng.random_range(-params.max_elevation..=params.max_elevation);
        let img = render_twofactor(shape, azimuth, elevation, params.size);
        data.extend(img.into_iter().map(|v| v + params.pixel_noise * rng::normal(rng)));
        meta.push(MetaRow {
            id: i as u64,
            label: Some(shape as i64),
            azimuth: Some(azimuth),
            elevation: Some(elevation),
            ..Default::default()
        });
    }
    let x = Matrix::new(n, d, data)?;
    Ok(DatasetBundle::new(x, meta, Split::Full)?.with_image_shape(params.size, params.size))
}

/// Ridge regression straight from pixels to a scalar target. Serves as the
/// pixel-space reference that reads lighting direction off an image.
pub type PixelRegressor = crate::numerics::Ridge;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    #[test]
    fn identical_factors_render_identically() {
        let a = render_twofactor(Shape::Triangle, 31.0, -7.0, 16);
        let b = render_twofactor(Shape::Triangle, 31.0, -7.0, 16);
        assert_eq!(a, b);
        assert_ne!(a, render_twofactor(Shape::Circle, 31.0, -7.0, 16));
        assert_ne!(a, render_twofactor(Shape::Triangle, -31.0, -7.0, 16));
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn shapes_are_distinct_and_nonempty() {
        let masks: Vec<Vec<bool>> = Shape::ALL
            .iter()
            .map(|s| render_twofactor(*s, 0.0, 0.0, 16).iter().map(|&v| v > 0.3).collect())
            .collect();
        for (i, m) in masks.iter().enumerate() {
            assert!(m.iter().filter(|&&b| b).count() > 10);
            for other in &masks[i + 1..] {
                assert_ne!(m, other);
            }
        }
    }

    #[test]
    fn small_n_rejected() {
        let mut r = rng::stream(0, Purpose::Data, 0);
        assert!(gen_twofactor_synthetic(9, TwoFactorParams::default(), &mut r).is_err());
    }
}
