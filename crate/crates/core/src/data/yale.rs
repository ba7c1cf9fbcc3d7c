use std::path::Path;

use rand::seq::SliceRandom;

use super::{read_pgm, DatasetBundle, MetaRow, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
pub struct YaleOptions {
    /// Output side length; images are area-downscaled to `resolution²`.
    pub resolution: usize,
    pub n_test: usize,
}

impl Default for YaleOptions {
    fn default() -> Self {
        Self {
            resolution: 32,
            n_test: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct YaleSplit {
    pub train: DatasetBundle,
    pub test: DatasetBundle,
}

/// Parses an Extended-Yale-B file name such as `yaleB03_P00A+010E-20.pgm`
/// into `(subject, azimuth, elevation)`.
pub fn parse_yale_name(name: &str) -> Option<(i64, f64, f64)> {
    let stem = name.strip_suffix(".pgm").unwrap_or(name);
    let subject: i64 = {
        let rest = stem.strip_prefix("yaleB")?;
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        digits.parse().ok()?
    };
    let bytes = stem.as_bytes();
    // A{±ddd}E{±dd}
    for start in 0..bytes.len() {
        let tail = &stem[start..];
        if tail.len() < 9 || !tail.starts_with('A') {
            continue;
        }
        let t = tail.as_bytes();
        let sign = |b: u8| matches!(b, b'+' | b'-');
        let digits = |s: &[u8]| s.iter().all(u8::is_ascii_digit);
        if sign(t[1]) && digits(&t[2..5]) && t[5] == b'E' && sign(t[6]) && digits(&t[7..9]) {
            let az: f64 = tail[1..5].parse().ok()?;
            let el: f64 = tail[6..9].parse().ok()?;
            return Some((subject, az, el));
        }
    }
    None
}

/// Loads every parsable P5 PGM in `dir`, normalises to `[0, 1]`, downscales
/// and splits deterministically into train and test sets. Unparsable names
/// (ambient shots, stray files) are skipped with a warning.
pub fn load_yale(dir: &Path, options: YaleOptions, rng: &mut Rng) -> Result<YaleSplit> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let res = options.resolution;
    let mut data = Vec::new();
    let mut meta = Vec::new();
    for path in entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let Some((subject, azimuth, elevation)) = parse_yale_name(name) else {
            log::warn!("skipping {}: not an Extended-Yale-B image name", path.display());
            continue;
        };
        let img = match read_pgm(&path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        data.extend(img.resize_area(res, res).pixels);
        meta.push(MetaRow {
            id: meta.len() as u64,
            label: Some(subject),
            azimuth: Some(azimuth),
            elevation: Some(elevation),
            ..Default::default()
        });
    }
    if meta.is_empty() {
        return Err(Error::Data(format!(
            "no Extended-Yale-B images found in {}",
            dir.display()
        )));
    }
    if options.n_test >= meta.len() {
        return Err(Error::Data(format!(
            "cannot hold out {} of {} images",
            options.n_test,
            meta.len()
        )));
    }
    let x = Matrix::new(meta.len(), res * res, data)?;
    let all = DatasetBundle::new(x, meta, Split::Full)?.with_image_shape(res, res);
    let mut idx: Vec<usize> = (0..all.len()).collect();
    idx.shuffle(rng);
    let (test, train) = idx.split_at(options.n_test);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok(YaleSplit {
        train: all.subset(&train, Split::Train),
        test: all.subset(&test, Split::Test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_pgm, GrayImage};
    use crate::rng::{self, Purpose};

    #[test]
    fn parses_naming_convention() {
        assert_eq!(parse_yale_name("yaleB01_P00A+010E+00.pgm"), Some((1, 10.0, 0.0)));
        assert_eq!(parse_yale_name("yaleB39_P00A-130E+20.pgm"), Some((39, -130.0, 20.0)));
        assert_eq!(parse_yale_name("yaleB11_P00A+000E-35.pgm"), Some((11, 0.0, -35.0)));
        assert_eq!(parse_yale_name("yaleB01_P00_Ambient.pgm"), None);
        assert_eq!(parse_yale_name("readme.txt"), None);
    }

    #[test]
    fn loads_and_splits_directory() {
        let dir = tempfile::tempdir().unwrap();
        let names = [
            "yaleB01_P00A+010E+00.pgm",
            "yaleB01_P00A-020E+10.pgm",
            "yaleB02_P00A+000E+00.pgm",
            "yaleB02_P00A+050E-20.pgm",
            "yaleB03_P00A+110E+65.pgm",
        ];
        for (k, n) in names.iter().enumerate() {
            let img = GrayImage {
                width: 8,
                height: 8,
                pixels: (0..64).map(|p| ((p + k) % 9) as f64 / 8.0).collect(),
            };
            write_pgm(&dir.path().join(n), &img).unwrap();
        }
        std::fs::write(dir.path().join("yaleB01_P00_Ambient.pgm"), b"P5\n1 1\n255\n\x00").unwrap();
        let opts = YaleOptions {
            resolution: 4,
            n_test: 2,
        };
        let mut r = rng::stream(0, Purpose::Split, 0);
        let split = load_yale(dir.path(), opts, &mut r).unwrap();
        assert_eq!(split.train.len() + split.test.len(), 5);
        assert_eq!(split.test.len(), 2);
        assert_eq!(split.train.dim(), 16);
        for m in split.train.meta.iter().chain(&split.test.meta) {
            assert!((-130.0..=130.0).contains(&m.azimuth.unwrap()));
            assert!((-40.0..=90.0).contains(&m.elevation.unwrap()));
        }
        let again = load_yale(dir.path(), opts, &mut rng::stream(0, Purpose::Split, 0)).unwrap();
        assert_eq!(again.test.meta, split.test.meta);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = rng::stream(0, Purpose::Split, 0);
        assert!(matches!(
            load_yale(dir.path(), YaleOptions::default(), &mut r),
            Err(Error::Data(_))
        ));
    }
}
