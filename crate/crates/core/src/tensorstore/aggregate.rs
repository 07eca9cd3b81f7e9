//! Subword to word aggregation.
//!
//! A word's representation is the representation of its last subword.
//! Attention to a word is the sum over its subwords; attention from a word is
//! the mean over its subwords, taken after the columns are merged.

use faer::Mat;

use super::manifest::{subword_counts, SubwordSpan};
use super::types::{ActivationMatrix, AttentionLayer, ROW_SUM_TOLERANCE};
use crate::error::{Error, Result};

pub fn aggregate_subword_representations(
    raw: &ActivationMatrix,
    alignment: &[Vec<SubwordSpan>],
) -> Result<ActivationMatrix> {
    let counts = subword_counts(alignment)?;
    let total: usize = counts.iter().sum();
    if total != raw.nrows() {
        return Err(Error::Alignment(format!(
            "alignment covers {total} subwords, matrix has {} rows",
            raw.nrows()
        )));
    }
    let mut picks = Vec::new();
    let mut offset = 0;
    for (spans, count) in alignment.iter().zip(&counts) {
        picks.extend(spans.iter().map(|&[_, end]| offset + end - 1));
        offset += count;
    }
    let src = raw.as_mat();
    ActivationMatrix::new(Mat::from_fn(picks.len(), raw.ncols(), |i, j| {
        src[(picks[i], j)]
    }))
}

pub fn aggregate_subword_attention(
    raw: &AttentionLayer,
    alignment: &[Vec<SubwordSpan>],
) -> Result<AttentionLayer> {
    let counts = subword_counts(alignment)?;
    if counts != raw.sentence_lengths() {
        return Err(Error::Alignment(format!(
            "alignment implies subword lengths {:?}, layer has {:?}",
            counts,
            raw.sentence_lengths()
        )));
    }
    if let Some(v) = raw.row_sum_violations(ROW_SUM_TOLERANCE, 1).first() {
        return Err(Error::InvariantViolation(format!(
            "input sentence {} head {} row {} sums to {}",
            v.sentence, v.head, v.row, v.sum
        )));
    }
    let heads = raw.heads();
    let lengths: Vec<usize> = alignment.iter().map(Vec::len).collect();
    let mut data = Vec::with_capacity(lengths.iter().map(|t| heads * t * t).sum());
    for (s, spans) in alignment.iter().enumerate() {
        let sub = counts[s];
        let words = spans.len();
        let mut merged = vec![0.0; sub * words];
        for h in 0..heads {
            let m = raw.matrix(s, h);
            for r in 0..sub {
                for (w, &[start, end]) in spans.iter().enumerate() {
                    merged[r * words + w] = m[r * sub + start..r * sub + end].iter().sum();
                }
            }
            for &[start, end] in spans {
                let n = (end - start) as f64;
                for w in 0..words {
                    let total: f64 = (start..end).map(|r| merged[r * words + w]).sum();
                    data.push(total / n);
                }
            }
        }
    }
    AttentionLayer::new(heads, lengths, data, true)
}
