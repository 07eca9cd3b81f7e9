//! CSV and JSON emission.

use std::io::Write;
use std::path::Path;

use cwsim::analysis::LocalizationProfile;
use cwsim::SimilarityHeatmap;

use crate::CliError;

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

pub fn heatmap_csv(h: &SimilarityHeatmap) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(h.col_labels.iter().map(ToString::to_string));
    w.write_record(&header)?;
    for (label, row) in h.row_labels.iter().zip(&h.values) {
        let mut record = vec![label.to_string()];
        record.extend(row.iter().map(|v| v.map(format_value).unwrap_or_default()));
        w.write_record(&record)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// Column labels and cell values of a parsed heatmap CSV.
pub type ParsedHeatmap = (Vec<String>, Vec<Vec<Option<f64>>>);

/// Parses a heatmap CSV back into labels and values.
pub fn parse_heatmap_csv(bytes: &[u8]) -> Result<ParsedHeatmap, csv::Error> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut records = r.records();
    let header = records.next().transpose()?.unwrap_or_default();
    let labels = header.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::new();
    for rec in records {
        let rec = rec?;
        values.push(
            rec.iter()
                .skip(1)
                .map(|s| if s.is_empty() { None } else { s.parse().ok() })
                .collect(),
        );
    }
    Ok((labels, values))
}

pub fn localization_csv(p: &LocalizationProfile) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "layer", "neuronsim_mean", "svsim_mean", "localization_score"])?;
    for e in &p.entries {
        w.write_record([
            e.layer.model.clone(),
            e.layer.layer.to_string(),
            format_value(e.neuronsim_mean),
            format_value(e.svsim_mean),
            format_value(e.localization_score),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::data(format!("stdout: {e}")))
}
