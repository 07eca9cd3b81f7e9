use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::format::{LayerFile, LayerKind};
use super::manifest::{DumpKind, DumpManifest};
use super::types::{attention_payload_len, ROW_SUM_TOLERANCE};

/// Row-sum violations reported per layer before summarizing.
const MAX_ROW_REPORTS: usize = 16;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentence: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    pub message: String,
}

impl Violation {
    fn general(message: impl Into<String>) -> Self {
        Violation {
            message: message.into(),
            ..Default::default()
        }
    }

    fn layer(layer: usize, message: impl Into<String>) -> Self {
        Violation {
            layer: Some(layer),
            message: message.into(),
            ..Default::default()
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = [
            ("layer", self.layer),
            ("sentence", self.sentence),
            ("head", self.head),
            ("row", self.row),
        ];
        for (name, value) in parts {
            if let Some(v) = value {
                write!(f, "{name} {v}: ")?;
            }
        }
        f.write_str(&self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks a dump's manifest and every layer file, one layer at a time.
/// Problems are collected rather than returned as errors.
pub fn validate_dump(manifest_path: impl AsRef<Path>) -> ValidationReport {
    let manifest_path = manifest_path.as_ref();
    let mut violations = Vec::new();
    match DumpManifest::from_path(manifest_path) {
        Err(e) => violations.push(Violation::general(e.to_string())),
        Ok(manifest) => {
            let structural = manifest.structural_violations();
            let readable = structural.is_empty();
            violations.extend(structural.into_iter().map(Violation::general));
            if readable {
                let base = manifest_path.parent().unwrap_or(Path::new(""));
                for entry in &manifest.layers {
                    check_layer(&manifest, base, entry.index, &mut violations);
                }
            }
        }
    }
    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn check_layer(manifest: &DumpManifest, base: &Path, index: usize, out: &mut Vec<Violation>) {
    let entry = &manifest.layers[index];
    let path = base.join(&entry.file);
    if !path.is_file() {
        out.push(Violation::layer(
            index,
            format!("missing layer file {}", path.display()),
        ));
        return;
    }
    let file = match LayerFile::read(&path) {
        Ok(f) => f,
        Err(e) => {
            out.push(Violation::layer(index, e.to_string()));
            return;
        }
    };
    let expected_kind = match manifest.kind {
        DumpKind::Representation => LayerKind::Matrix,
        DumpKind::Attention => LayerKind::Attention,
    };
    if file.header.kind != expected_kind {
        out.push(Violation::layer(
            index,
            format!("header kind {:?} does not match a {} dump", file.header.kind, manifest.kind.as_str()),
        ));
        return;
    }
    if file.header.rows != entry.rows || file.header.cols != entry.cols {
        out.push(Violation::layer(
            index,
            format!(
                "header says {}x{}, manifest declares {}x{}",
                file.header.rows, file.header.cols, entry.rows, entry.cols
            ),
        ));
        return;
    }
    let lengths = match manifest.stored_sentence_lengths() {
        Ok(l) => l,
        Err(e) => {
            out.push(Violation::layer(index, e.to_string()));
            return;
        }
    };
    let heads = entry.cols as usize;
    let expected = match manifest.kind {
        DumpKind::Representation => (entry.rows * entry.cols) as usize,
        DumpKind::Attention => attention_payload_len(heads, &lengths),
    };
    if let Err(e) = file.expect_len(&path, expected) {
        out.push(Violation::layer(index, e.to_string()));
        return;
    }
    if let Some(i) = file.first_non_finite() {
        out.push(Violation::layer(index, format!("non-finite value at element {i}")));
    }
    if manifest.kind == DumpKind::Attention {
        check_attention_rows(&file.payload, heads, &lengths, !manifest.is_subword_level(), index, out);
    } else if entry.rows < 2 {
        out.push(Violation::layer(index, "fewer than two words"));
    }
}

fn check_attention_rows(
    payload: &[f32],
    heads: usize,
    lengths: &[usize],
    aligned: bool,
    layer: usize,
    out: &mut Vec<Violation>,
) {
    let mut negatives = 0usize;
    let mut bad_rows = 0usize;
    let mut offset = 0;
    for (s, &t) in lengths.iter().enumerate() {
        for h in 0..heads {
            for r in 0..t {
                let row = &payload[offset..offset + t];
                offset += t;
                if let Some(c) = row.iter().position(|&v| v < 0.0) {
                    negatives += 1;
                    if negatives <= MAX_ROW_REPORTS {
                        out.push(Violation {
                            layer: Some(layer),
                            sentence: Some(s),
                            head: Some(h),
                            row: Some(r),
                            message: format!("negative attention weight {} at column {c}", row[c]),
                        });
                    }
                }
                if aligned {
                    let sum: f64 = row.iter().map(|&v| v as f64).sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        bad_rows += 1;
                        if bad_rows <= MAX_ROW_REPORTS {
                            out.push(Violation {
                                layer: Some(layer),
                                sentence: Some(s),
                                head: Some(h),
                                row: Some(r),
                                message: format!("row sums to {sum}, expected 1"),
                            });
                        }
                    }
                }
            }
        }
    }
    if negatives > MAX_ROW_REPORTS {
        out.push(Violation::layer(
            layer,
            format!("{} more rows with negative weights", negatives - MAX_ROW_REPORTS),
        ));
    }
    if bad_rows > MAX_ROW_REPORTS {
        out.push(Violation::layer(
            layer,
            format!("{} more rows not summing to 1", bad_rows - MAX_ROW_REPORTS),
        ));
    }
}
