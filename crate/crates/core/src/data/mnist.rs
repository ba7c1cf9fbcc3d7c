use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;

use super::{DatasetBundle, MetaRow, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::Rng;

/// Default rotation sequence in degrees.
pub const DEFAULT_ANGLES: [f64; 5] = [9.0, 18.0, 27.0, 36.0, 45.0];

/// Raw MNIST digits as read from IDX files.
#[derive(Debug, Clone)]
pub struct MnistSource {
    pub width: usize,
    pub height: usize,
    /// One `width * height` byte image per digit.
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl MnistSource {
    pub fn load(images: &Path, labels: &Path) -> Result<Self> {
        let (width, height, images) = read_idx_images(images)?;
        let labels = read_idx_labels(labels)?;
        if images.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            images,
            labels,
        })
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], k: usize) -> usize {
    u32::from_be_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap()) as usize
}

/// Reads an IDX3 `u8` image file (optionally gzip-compressed).
/// Returns `(width, height, images)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let bytes = read_maybe_gz(path)?;
    let bad = |what: &str| Error::Data(format!("{}: {what}", path.display()));
    if bytes.len() < 16 || be_u32(&bytes, 0) != 0x0803 {
        return Err(bad("not an IDX3 unsigned-byte image file"));
    }
    let (n, rows, cols) = (be_u32(&bytes, 1), be_u32(&bytes, 2), be_u32(&bytes, 3));
    if bytes.len() != 16 + n * rows * cols {
        return Err(bad("truncated image data"));
    }
    let images = bytes[16..].chunks_exact(rows * cols).map(<[u8]>::to_vec).collect();
    Ok((cols, rows, images))
}

/// Reads an IDX1 `u8` label file (optionally gzip-compressed).
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    let bad = |what: &str| Error::Data(format!("{}: {what}", path.display()));
    if bytes.len() < 8 || be_u32(&bytes, 0) != 0x0801 {
        return Err(bad("not an IDX1 unsigned-byte label file"));
    }
    let n = be_u32(&bytes, 1);
    if bytes.len() != 8 + n {
        return Err(bad("truncated label data"));
    }
    Ok(bytes[8..].to_vec())
}

/// Rotates a row-major `width x height` image about its centre by `degrees`
/// (positive = clockwise on screen) with bilinear interpolation and zero
/// padding outside the source.
pub fn rotate_image(image: &[f64], width: usize, height: usize, degrees: f64) -> Vec<f64> {
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let px = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
            0.0
        } else {
            image[y as usize * width + x as usize]
        }
    };
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // inverse map of the clockwise rotation (y axis points down)
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let top = px(x0, y0) * (1.0 - fx) + px(x0 + 1, y0) * fx;
            let bottom = px(x0, y0 + 1) * (1.0 - fx) + px(x0 + 1, y0 + 1) * fx;
            out[y * width + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    out
}

/// Perturbed MNIST: `per_class` digits of every class, each expanded into a
/// trajectory of the original followed by one rotated copy per angle.
///
/// Rows are trajectory-major; metadata carries `label`, `trajectory` and
/// `angle` (0 for the original).
pub fn gen_perturbed_mnist(
    source: &MnistSource,
    per_class: usize,
    angles: &[f64],
    rng: &mut Rng,
) -> Result<DatasetBundle> {
    if angles.iter().any(|&a| a <= 0.0 || !a.is_finite()) || angles.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data(
            "rotation angles must be positive and strictly increasing".into(),
        ));
    }
    let mut chosen = Vec::with_capacity(per_class * 10);
    for class in 0..10u8 {
        let mut idx: Vec<usize> = (0..source.labels.len())
            .filter(|&i| source.labels[i] == class)
            .collect();
        if idx.len() < per_class {
            return Err(Error::Data(format!(
                "class {class} has only {} digits, need {per_class}",
                idx.len()
            )));
        }
        idx.shuffle(rng);
        chosen.extend_from_slice(&idx[..per_class]);
    }
    chosen.shuffle(rng);

    let (w, h) = (source.width, source.height);
    let per_traj = angles.len() + 1;
    let mut data = Vec::with_capacity(chosen.len() * per_traj * w * h);
    let mut meta = Vec::with_capacity(chosen.len() * per_traj);
    for (t, &src) in chosen.iter().enumerate() {
        let img: Vec<f64> = source.images[src].iter().map(|&b| b as f64 / 255.0).collect();
        for (k, &angle) in std::iter::once(&0.0).chain(angles).enumerate() {
            if k == 0 {
                data.extend_from_slice(&img);
            } else {
                data.extend(rotate_image(&img, w, h, angle));
            }
            meta.push(MetaRow {
                id: meta.len() as u64,
                label: Some(source.labels[src] as i64),
                trajectory: Some(t as i64),
                angle: Some(angle),
                ..Default::default()
            });
        }
    }
    let x = Matrix::new(meta.len(), w * h, data)?;
    Ok(DatasetBundle::new(x, meta, Split::Full)?.with_image_shape(w, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};

    fn fake_source(per_class: usize) -> MnistSource {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for c in 0..10u8 {
            for k in 0..per_class {
                let mut img = vec![0u8; 8 * 8];
                img[(c as usize % 8) * 8 + k % 8] = 255;
                img[27] = 100 + c;
                images.push(img);
                labels.push(c);
            }
        }
        MnistSource {
            width: 8,
            height: 8,
            images,
            labels,
        }
    }

    #[test]
    fn zero_rotation_is_identity() {
        let img: Vec<f64> = (0..28 * 28).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
        assert_eq!(rotate_image(&img, 28, 28, 0.0), img);
    }

    #[test]
    fn quarter_turn_moves_pixels_clockwise() {
        // 3x3, mark top-middle; a clockwise quarter turn moves it to middle-right.
        let mut img = vec![0.0; 9];
        img[1] = 1.0;
        let out = rotate_image(&img, 3, 3, 90.0);
        assert!((out[5] - 1.0).abs() < 1e-12, "{out:?}");
        assert!(out[1].abs() < 1e-12);
    }

    #[test]
    fn trajectories_have_expected_shape() {
        let src = fake_source(4);
        let mut r = rng::stream(0, Purpose::Data, 0);
        let b = gen_perturbed_mnist(&src, 3, &DEFAULT_ANGLES, &mut r).unwrap();
        assert_eq!(b.len(), 30 * 6);
        let mut per_label = [0usize; 10];
        for m in &b.meta {
            per_label[m.label.unwrap() as usize] += 1;
        }
        assert!(per_label.iter().all(|&c| c == 18));
        for (t, rows) in b.meta.chunks(6).enumerate() {
            assert!(rows.iter().all(|m| m.trajectory == Some(t as i64)));
            let angles: Vec<f64> = rows.iter().map(|m| m.angle.unwrap()).collect();
            assert_eq!(angles, vec![0.0, 9.0, 18.0, 27.0, 36.0, 45.0]);
        }
        assert!(b.x.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn invalid_angles_and_short_classes_fail() {
        let src = fake_source(2);
        let mut r = rng::stream(0, Purpose::Data, 0);
        assert!(gen_perturbed_mnist(&src, 1, &[10.0, 5.0], &mut r).is_err());
        assert!(gen_perturbed_mnist(&src, 1, &[-1.0], &mut r).is_err());
        assert!(gen_perturbed_mnist(&src, 3, &[10.0], &mut r).is_err());
    }

    #[test]
    fn idx_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3];
        img.extend(0u8..12);
        let mut lab = vec![0, 0, 8, 1, 0, 0, 0, 2];
        lab.extend([7u8, 1]);
        std::fs::write(dir.path().join("i"), &img).unwrap();
        std::fs::write(dir.path().join("l"), &lab).unwrap();
        let src = MnistSource::load(&dir.path().join("i"), &dir.path().join("l")).unwrap();
        assert_eq!((src.width, src.height), (3, 2));
        assert_eq!(src.images[1], (6u8..12).collect::<Vec<_>>());
        assert_eq!(src.labels, vec![7, 1]);
        std::fs::write(dir.path().join("i"), &img[..20]).unwrap();
        assert!(read_idx_images(&dir.path().join("i")).is_err());
        assert!(read_idx_images(&dir.path().join("missing")).is_err());
    }
}
