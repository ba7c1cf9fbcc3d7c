use std::path::Path;

use super::masks::active_dims;
use crate::data::MetaRow;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `id,label,azimuth,elevation,trajectory,angle,z…` with one row per
/// datapoint. With a mask only its active dimensions are written; column
/// names keep the original dimension index.
pub fn export_embeddings(
    means: &Matrix,
    meta: &[MetaRow],
    mask: Option<&[f64]>,
    threshold: f64,
    path: &Path,
) -> Result<usize> {
    if meta.len() != means.rows() {
        return Err(Error::shape(
            "export_embeddings",
            format!("{} meta rows", means.rows()),
            meta.len(),
        ));
    }
    let dims: Vec<usize> = match mask {
        Some(m) if m.len() != means.cols() => {
            return Err(Error::shape(
                "export_embeddings",
                format!("mask of length {}", means.cols()),
                m.len(),
            ))
        }
        Some(m) => active_dims(m, threshold),
        None => (0..means.cols()).collect(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    let mut header: Vec<String> = ["id", "label", "azimuth", "elevation", "trajectory", "angle"]
        .map(String::from)
        .to_vec();
    header.extend(dims.iter().map(|h| format!("z{h}")));
    w.write_record(&header)?;
    for (m, row) in meta.iter().zip(means.row_iter()) {
        let mut rec = vec![
            m.id.to_string(),
            opt(m.label),
            opt(m.azimuth),
            opt(m.elevation),
            opt(m.trajectory),
            opt(m.angle),
        ];
        rec.extend(dims.iter().map(|&h| row[h].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(dims.len())
}
