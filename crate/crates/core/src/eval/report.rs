use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Metrics of one model under one oracle setting. Missing metrics are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub model: String,
    pub setting: String,
    /// Logistic-probe test error on `label`, percent.
    pub classification_error: Option<f64>,
    /// Ridge-probe test RMSD on azimuth, degrees.
    pub azimuth_rmsd: Option<f64>,
    pub elevation_rmsd: Option<f64>,
    /// Held-out triplet prediction error over all queries, percent.
    pub triplet_error: Option<f64>,
    pub per_query: Vec<(String, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
    /// Free-form remarks printed under the table (probe kinds, distance rules).
    pub notes: Vec<String>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

impl EvalReport {
    fn query_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            for (n, _) in &r.per_query {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        names
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let names = self.query_names();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        let mut header: Vec<String> = [
            "model",
            "setting",
            "classification_error_pct",
            "azimuth_rmsd_deg",
            "elevation_rmsd_deg",
            "triplet_error_pct",
        ]
        .map(String::from)
        .to_vec();
        header.extend(names.iter().map(|n| format!("triplet_error_pct_{n}")));
        header.extend(["config_hash".to_string(), "seed".to_string()]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.model.clone(),
                r.setting.clone(),
                cell(r.classification_error),
                cell(r.azimuth_rmsd),
                cell(r.elevation_rmsd),
                cell(r.triplet_error),
            ];
            for n in &names {
                rec.push(cell(r.per_query.iter().find(|(q, _)| q == n).and_then(|(_, v)| *v)));
            }
            rec.push(self.config_hash.clone());
            rec.push(self.seed.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.query_names();
        let mut header = vec![
            "model".to_string(),
            "setting".into(),
            "class err %".into(),
            "azim RMSD".into(),
            "elev RMSD".into(),
            "triplet err %".into(),
        ];
        header.extend(names.iter().map(|n| format!("{n} %")));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.model.clone(),
                    r.setting.clone(),
                    cell(r.classification_error),
                    cell(r.azimuth_rmsd),
                    cell(r.elevation_rmsd),
                    cell(r.triplet_error),
                ];
                v.extend(
                    names
                        .iter()
                        .map(|n| cell(r.per_query.iter().find(|(q, _)| q == n).and_then(|(_, v)| *v))),
                );
                v.iter()
                    .map(|s| if s.is_empty() { "-".into() } else { s.clone() })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |f: &mut fmt::Formatter<'_>, cells: &[String]| -> fmt::Result {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            writeln!(f, "{}", parts.join("  "))
        };
        line(f, &header)?;
        writeln!(
            f,
            "{}",
            "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
        )?;
        for r in &rows {
            line(f, r)?;
        }
        writeln!(f, "config {}  seed {}", self.config_hash, self.seed)?;
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}
