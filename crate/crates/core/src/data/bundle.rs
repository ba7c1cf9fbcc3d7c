use std::io::{Read, Write};
use std::path::Path;

use super::{DatasetBundle, MetaRow, Split};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const BUNDLE_MAGIC: &[u8; 4] = b"OPBN";
pub const BUNDLE_VERSION: u32 = 1;

const META_HEADER: [&str; 6] = ["id", "label", "azimuth", "elevation", "trajectory", "angle"];

/// Writes `bundle.bin` and `meta.csv` into `dir` (created if missing).
///
/// `bundle.bin` is `"OPBN"`, then version, N and D as little-endian `u32`,
/// then N·D little-endian `f32` pixels in row-major order.
pub fn save_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join("bundle.bin");
    let (n, d) = bundle.x.shape();
    let to_u32 = |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::Data(format!("{what} {v} exceeds u32")));
    let mut buf = Vec::with_capacity(16 + 4 * n * d);
    buf.extend_from_slice(BUNDLE_MAGIC);
    buf.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(n, "row count")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(d, "dimension")?.to_le_bytes());
    for &v in bundle.x.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(&bin, buf).map_err(|e| Error::io(&bin, e))?;
    write_meta_csv(&dir.join("meta.csv"), &bundle.meta)
}

/// Reads a bundle written by [`save_bundle`].
pub fn load_bundle(dir: &Path, split: Split) -> Result<DatasetBundle> {
    let bin = dir.join("bundle.bin");
    let mut bytes = Vec::new();
    std::fs::File::open(&bin)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&bin, e))?;
    let bad = |what: &str| Error::Data(format!("{}: {what}", bin.display()));
    if bytes.len() < 16 || &bytes[..4] != BUNDLE_MAGIC {
        return Err(bad("missing OPBN magic"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let version = word(1);
    if version != BUNDLE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let (n, d) = (word(2) as usize, word(3) as usize);
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(16))
        .ok_or_else(|| bad("header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "expected {expected} bytes for {n}x{d}, found {}",
            bytes.len()
        )));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let x = Matrix::new(n, d, data)?;
    let meta = read_meta_csv(&dir.join("meta.csv"))?;
    if meta.len() != n {
        return Err(Error::Data(format!("meta.csv has {} rows, bundle has {n}", meta.len())));
    }
    let side = (d as f64).sqrt().round() as usize;
    let b = DatasetBundle::new(x, meta, split)?;
    Ok(if side * side == d {
        b.with_image_shape(side, side)
    } else {
        b
    })
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_meta_csv(path: &Path, meta: &[MetaRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", META_HEADER.join(",")).map_err(io)?;
    for m in meta {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.id,
            cell(m.label),
            cell(m.azimuth),
            cell(m.elevation),
            cell(m.trajectory),
            cell(m.angle)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_meta_csv(path: &Path) -> Result<Vec<MetaRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
    if r.headers()?.iter().collect::<Vec<_>>() != META_HEADER {
        return Err(Error::Data(format!(
            "{}: expected header {}",
            path.display(),
            META_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| Error::Data(format!("{} row {}: bad `{col}` value", path.display(), line + 1));
        fn opt<T: std::str::FromStr>(s: &str) -> std::result::Result<Option<T>, ()> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| ())
            }
        }
        out.push(MetaRow {
            id: rec[0].parse().map_err(|_| bad("id"))?,
            label: opt(&rec[1]).map_err(|_| bad("label"))?,
            azimuth: opt(&rec[2]).map_err(|_| bad("azimuth"))?,
            elevation: opt(&rec[3]).map_err(|_| bad("elevation"))?,
            trajectory: opt(&rec[4]).map_err(|_| bad("trajectory"))?,
            angle: opt(&rec[5]).map_err(|_| bad("angle"))?,
        });
    }
    Ok(out)
}
