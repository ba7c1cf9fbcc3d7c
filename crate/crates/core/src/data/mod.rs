//! Datasets: the observation matrix plus the metadata simulated oracles and
//! probes read.

mod bundle;
mod mnist;
mod pgm;
mod synthetic;
mod yale;

pub use bundle::{load_bundle, read_meta_csv, save_bundle, write_meta_csv, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use mnist::{gen_perturbed_mnist, read_idx_images, read_idx_labels, rotate_image, MnistSource, DEFAULT_ANGLES};
pub use pgm::{read_pgm, write_pgm, GrayImage};
pub use synthetic::{gen_twofactor_synthetic, render_twofactor, PixelRegressor, Shape, TwoFactorParams};
pub use yale::{load_yale, parse_yale_name, YaleOptions, YaleSplit};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::Rng;

/// Per-row metadata. Absent fields are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaRow {
    pub id: u64,
    pub label: Option<i64>,
    pub azimuth: Option<f64>,
    pub elevation: Option<f64>,
    pub trajectory: Option<i64>,
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    Full,
}

/// Observations `x` (N x D, values in `[0, 1]` at `f32` precision) and one
/// metadata row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub x: Matrix,
    pub meta: Vec<MetaRow>,
    pub split: Split,
    /// Image side lengths when the rows are images.
    pub image_shape: Option<(usize, usize)>,
}

impl DatasetBundle {
    /// Clamps pixels into `[0, 1]` and rounds them to `f32` so the on-disk
    /// format round-trips exactly.
    pub fn new(mut x: Matrix, meta: Vec<MetaRow>, split: Split) -> Result<Self> {
        if x.rows() != meta.len() {
            return Err(Error::shape(
                "DatasetBundle::new",
                format!("{} metadata rows", x.rows()),
                meta.len(),
            ));
        }
        x.ensure_finite("DatasetBundle::new")?;
        for v in x.as_mut_slice() {
            *v = v.clamp(0.0, 1.0) as f32 as f64;
        }
        Ok(Self {
            x,
            meta,
            split,
            image_shape: None,
        })
    }

    pub fn with_image_shape(mut self, width: usize, height: usize) -> Self {
        if width * height == self.x.cols() {
            self.image_shape = Some((width, height));
        }
        self
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Rows `indices`, in order, tagged `split`.
    pub fn subset(&self, indices: &[usize], split: Split) -> DatasetBundle {
        DatasetBundle {
            x: self.x.gather_rows(indices),
            meta: indices.iter().map(|&i| self.meta[i].clone()).collect(),
            split,
            image_shape: self.image_shape,
        }
    }

    /// Seeded random split into `(train, test)` with `n_test` test rows.
    pub fn split(&self, n_test: usize, rng: &mut Rng) -> Result<(DatasetBundle, DatasetBundle)> {
        if n_test == 0 || n_test >= self.len() {
            return Err(Error::Data(format!("cannot hold out {n_test} of {} rows", self.len())));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        let (test, train) = idx.split_at(n_test);
        let (mut train, mut test) = (train.to_vec(), test.to_vec());
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train, Split::Train), self.subset(&test, Split::Test)))
    }

    /// Seeded split that keeps every trajectory on one side; `n_test_groups`
    /// whole trajectories go to the test set.
    pub fn split_by_trajectory(&self, n_test_groups: usize, rng: &mut Rng) -> Result<(DatasetBundle, DatasetBundle)> {
        let mut groups: Vec<i64> = self
            .meta
            .iter()
            .map(|m| {
                m.trajectory
                    .ok_or_else(|| Error::Data("row without trajectory id".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        groups.sort_unstable();
        groups.dedup();
        if n_test_groups == 0 || n_test_groups >= groups.len() {
            return Err(Error::Data(format!(
                "cannot hold out {n_test_groups} of {} trajectories",
                groups.len()
            )));
        }
        groups.shuffle(rng);
        let test_groups: std::collections::HashSet<i64> = groups[..n_test_groups].iter().copied().collect();
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.len()).partition(|&i| test_groups.contains(&self.meta[i].trajectory.unwrap()));
        Ok((self.subset(&train, Split::Train), self.subset(&test, Split::Test)))
    }

    pub fn labels(&self) -> Option<Vec<i64>> {
        self.meta.iter().map(|m| m.label).collect()
    }

    pub fn attribute(&self, attribute: crate::oracle::Attribute) -> Option<Vec<f64>> {
        self.meta.iter().map(|m| attribute.read(m)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    fn toy(n: usize) -> DatasetBundle {
        let x = Matrix::from_fn(n, 3, |r, c| ((r + c) % 5) as f64 / 4.0);
        let meta = (0..n)
            .map(|i| MetaRow {
                id: i as u64,
                trajectory: Some((i / 3) as i64),
                ..Default::default()
            })
            .collect();
        DatasetBundle::new(x, meta, Split::Full).unwrap()
    }

    #[test]
    fn pixels_are_clamped_and_f32_rounded() {
        let x = Matrix::new(1, 3, vec![-0.5, 0.1, 3.0]).unwrap();
        let b = DatasetBundle::new(x, vec![MetaRow::default()], Split::Full).unwrap();
        assert_eq!(b.x.as_slice(), &[0.0, 0.1f32 as f64, 1.0]);
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let b = toy(30);
        let mut r = rng::stream(0, Purpose::Split, 0);
        let (train, test) = b.split(7, &mut r).unwrap();
        let mut ids: Vec<u64> = train.meta.iter().chain(&test.meta).map(|m| m.id).collect();
        assert_eq!(test.len(), 7);
        ids.sort_unstable();
        assert_eq!(ids, (0..30).collect::<Vec<_>>());

        let (train, test) = b.split_by_trajectory(3, &mut r).unwrap();
        assert_eq!(test.len(), 9);
        let tr: std::collections::HashSet<_> = train.meta.iter().map(|m| m.trajectory).collect();
        assert!(test.meta.iter().all(|m| !tr.contains(&m.trajectory)));
    }
}
