use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use syntagraph::decoupling::SimilarityReport;
use syntagraph::RunManifest;

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("output serializes");
    out.push(b'\n');
    out
}

/// CSV preceded by `#` comment lines holding the manifest as JSON.
pub fn csv_bytes(manifest: &RunManifest, header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(b"# manifest: ");
    out.extend_from_slice(&serde_json::to_vec(manifest)?);
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    drop(w);
    Ok(out)
}

/// Square similarity matrix as CSV; the first column repeats the labels.
pub fn similarity_csv(manifest: &RunManifest, labels: &[String], report: &SimilarityReport) -> Result<Vec<u8>> {
    let mut header = vec!["label".to_string()];
    header.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = report
        .matrix
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, label)| {
            std::iter::once(label.clone())
                .chain(row.iter().map(|v| v.to_string()))
                .collect()
        })
        .collect();
    csv_bytes(manifest, &header, &rows)
}

/// `dir/stem.csv` -> `dir/stem.<suffix>.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

#[derive(Serialize)]
pub struct ReportSummary {
    pub max_offdiag_abs: f64,
    pub mean_offdiag_abs: f64,
}

impl From<&SimilarityReport> for ReportSummary {
    fn from(r: &SimilarityReport) -> Self {
        ReportSummary {
            max_offdiag_abs: r.max_offdiag_abs,
            mean_offdiag_abs: r.mean_offdiag_abs,
        }
    }
}
