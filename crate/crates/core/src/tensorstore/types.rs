use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// Row-sum tolerance for word-level attention distributions.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

/// One layer's word representations: `W` words by `N` neurons.
///
/// Values are held in `f64` regardless of the storage precision of the dump
/// they came from. Every entry is finite, `W >= 2` and `N >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMatrix {
    data: Mat<f64>,
}

impl ActivationMatrix {
    pub fn new(data: Mat<f64>) -> Result<Self> {
        let (rows, cols) = data.shape();
        if rows < 2 || cols < 1 {
            return Err(Error::DimensionMismatch(format!(
                "activation matrix must be at least 2x1, got {rows}x{cols}"
            )));
        }
        for j in 0..cols {
            if let Some(i) = data.col_as_slice(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::InvariantViolation(format!(
                    "non-finite activation at row {i}, column {j}"
                )));
            }
        }
        Ok(ActivationMatrix { data })
    }

    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Self::new(Mat::from_fn(rows, cols, |i, j| values[i * cols + j]))
    }

    pub fn from_row_major_f32(rows: usize, cols: usize, values: &[f32]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Self::new(Mat::from_fn(rows, cols, |i, j| values[i * cols + j] as f64))
    }

    /// Builds from a list of columns (neurons), each of length `W`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Self::new(Mat::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.data.col_as_slice(j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn to_row_major_f32(&self) -> Vec<f32> {
        let (rows, cols) = self.data.shape();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                out.push(self.data[(i, j)] as f32);
            }
        }
        out
    }

    /// Approximate heap footprint, for cache accounting.
    pub fn size_bytes(&self) -> usize {
        self.nrows() * self.ncols() * std::mem::size_of::<f64>()
    }
}

/// A row of an attention matrix that fails the distribution invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct RowViolation {
    pub sentence: usize,
    pub head: usize,
    pub row: usize,
    pub sum: f64,
}

/// One layer's attention heads over a corpus: for every sentence `i` and
/// every head `k`, a `t_i x t_i` matrix of non-negative weights.
///
/// Storage is the on-disk order: sentence-major, then head, then row-major
/// matrix entries.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionLayer {
    heads: usize,
    lengths: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
    aligned: bool,
}

pub(crate) fn attention_payload_len(heads: usize, lengths: &[usize]) -> usize {
    lengths.iter().map(|t| heads * t * t).sum()
}

impl AttentionLayer {
    pub fn new(heads: usize, lengths: Vec<usize>, data: Vec<f64>, aligned: bool) -> Result<Self> {
        if heads == 0 {
            return Err(Error::DimensionMismatch("attention layer with zero heads".into()));
        }
        let expected = attention_payload_len(heads, &lengths);
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "attention payload has {} values, sentence lengths imply {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "non-finite attention weight at element {i}"
            )));
        }
        if let Some(i) = data.iter().position(|&v| v < 0.0) {
            return Err(Error::InvariantViolation(format!(
                "negative attention weight {} at element {i}",
                data[i]
            )));
        }
        let mut offsets = Vec::with_capacity(lengths.len());
        let mut acc = 0;
        for &t in &lengths {
            offsets.push(acc);
            acc += heads * t * t;
        }
        let layer = AttentionLayer {
            heads,
            lengths,
            offsets,
            data,
            aligned,
        };
        if aligned {
            if let Some(v) = layer.row_sum_violations(ROW_SUM_TOLERANCE, 1).first() {
                return Err(Error::InvariantViolation(format!(
                    "sentence {} head {} row {} sums to {}",
                    v.sentence, v.head, v.row, v.sum
                )));
            }
        }
        Ok(layer)
    }

    /// Builds a layer by evaluating `f(sentence, head, row, col)`.
    pub fn from_fn(
        heads: usize,
        lengths: Vec<usize>,
        aligned: bool,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(attention_payload_len(heads, &lengths));
        for (s, &t) in lengths.iter().enumerate() {
            for h in 0..heads {
                for r in 0..t {
                    for c in 0..t {
                        data.push(f(s, h, r, c));
                    }
                }
            }
        }
        Self::new(heads, lengths, data, aligned)
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn num_sentences(&self) -> usize {
        self.lengths.len()
    }

    pub fn sentence_lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    pub fn word_count(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// `Σ t_i²`, the number of word pairs.
    pub fn pair_count(&self) -> usize {
        self.lengths.iter().map(|t| t * t).sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// The `t x t` row-major matrix of `head` on `sentence`.
    pub fn matrix(&self, sentence: usize, head: usize) -> &[f64] {
        let t = self.lengths[sentence];
        let start = self.offsets[sentence] + head * t * t;
        &self.data[start..start + t * t]
    }

    pub fn row(&self, sentence: usize, head: usize, row: usize) -> &[f64] {
        let t = self.lengths[sentence];
        &self.matrix(sentence, head)[row * t..(row + 1) * t]
    }

    /// Rows whose sum is off by more than `tol`, up to `limit` of them.
    pub fn row_sum_violations(&self, tol: f64, limit: usize) -> Vec<RowViolation> {
        let mut out = Vec::new();
        for (s, &t) in self.lengths.iter().enumerate() {
            for h in 0..self.heads {
                for r in 0..t {
                    let sum: f64 = self.row(s, h, r).iter().sum();
                    if (sum - 1.0).abs() > tol {
                        out.push(RowViolation {
                            sentence: s,
                            head: h,
                            row: r,
                            sum,
                        });
                        if out.len() >= limit {
                            return out;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn size_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
}
