use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// A layer of a named model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerRef {
    pub model: String,
    pub layer: usize,
}

impl LayerRef {
    pub fn new(model: impl Into<String>, layer: usize) -> Self {
        LayerRef {
            model: model.into(),
            layer,
        }
    }
}

impl fmt::Display for LayerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.model, self.layer)
    }
}

/// A contiguous run of heatmap rows/columns, e.g. the base and fine-tuned
/// halves of a model-set comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub row: usize,
    pub col: usize,
    pub message: String,
}

/// Layer-pair scores. `values[r][c]` is `measure(row_labels[r],
/// col_labels[c])`; `None` marks a pair that could not be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityHeatmap {
    pub measure: String,
    pub symmetric: bool,
    pub orientation: String,
    pub row_labels: Vec<LayerRef>,
    pub col_labels: Vec<LayerRef>,
    pub values: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<LayerGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<CellFailure>,
}

impl SimilarityHeatmap {
    pub fn nrows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row][col]
    }

    pub fn present_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().flatten().copied()
    }

    pub fn absent_count(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_none()).count()
    }

    /// Whether mirrored cells agree within `tol` wherever both are present.
    pub fn is_symmetric_within(&self, tol: f64) -> bool {
        if self.nrows() != self.ncols() {
            return false;
        }
        (0..self.nrows()).all(|i| {
            (0..i).all(|j| match (self.values[i][j], self.values[j][i]) {
                (Some(a), Some(b)) => (a - b).abs() <= tol,
                _ => true,
            })
        })
    }

    /// Mean of the present cells in a block, optionally skipping the cells
    /// where the row and column index coincide.
    pub fn block_mean(&self, rows: Range<usize>, cols: Range<usize>, skip_diagonal: bool) -> Option<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for r in rows {
            for c in cols.clone() {
                if skip_diagonal && r == c {
                    continue;
                }
                if let Some(v) = self.values[r][c] {
                    total += v;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| total / n as f64)
    }
}

/// Localization score of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEntry {
    pub layer: LayerRef,
    pub neuronsim_mean: f64,
    pub svsim_mean: f64,
    /// `neuronsim_mean - svsim_mean`.
    pub localization_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationProfile {
    pub entries: Vec<LocalizationEntry>,
    pub neuronsim: SimilarityHeatmap,
    pub svsim: SimilarityHeatmap,
}
