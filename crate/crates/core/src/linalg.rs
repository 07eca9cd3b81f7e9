//! Dense kernels shared by the measures. All accumulation is in `f64`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};

use crate::error::{Error, Result};
use crate::parallel::map_range;

/// Column block width for the cross products. Fixed so that results do not
/// depend on how many workers run.
const COL_BLOCK: usize = 128;

/// Relative singular-value cutoff below which directions count as numerical
/// noise.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Subtracts each column's mean.
pub fn center_columns(m: MatRef<'_, f64>) -> Mat<f64> {
    let (rows, cols) = m.shape();
    let mut out = Mat::<f64>::zeros(rows, cols);
    for j in 0..cols {
        let src = m.col(j);
        let mut sum = 0.0;
        for i in 0..rows {
            sum += src[i];
        }
        let mean = sum / rows as f64;
        let dst = out.col_as_slice_mut(j);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = src[i] - mean;
        }
    }
    out
}

/// True when every entry of column `j` is identical.
pub fn column_is_constant(m: MatRef<'_, f64>, j: usize) -> bool {
    let col = m.col(j);
    let first = col[0];
    (1..m.nrows()).all(|i| col[i] == first)
}

/// Euclidean norm of a column, summed sequentially.
pub fn column_norm(m: MatRef<'_, f64>, j: usize) -> f64 {
    let col = m.col(j);
    let mut ss = 0.0;
    for i in 0..m.nrows() {
        ss += col[i] * col[i];
    }
    ss.sqrt()
}

/// Sum of squared entries, column by column.
pub fn frobenius_sq(m: MatRef<'_, f64>) -> f64 {
    let mut ss = 0.0;
    for j in 0..m.ncols() {
        let col = m.col(j);
        for i in 0..m.nrows() {
            ss += col[i] * col[i];
        }
    }
    ss
}

/// `aᵀ b`, computed over fixed column blocks of `b` that may run in parallel.
pub fn cross_product(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    assert_eq!(a.nrows(), b.nrows(), "cross_product: row counts differ");
    let n = b.ncols();
    let blocks = n.div_ceil(COL_BLOCK);
    let parts = map_range(blocks, |blk| {
        let start = blk * COL_BLOCK;
        let width = COL_BLOCK.min(n - start);
        let mut part = Mat::<f64>::zeros(a.ncols(), width);
        matmul(
            part.as_mut(),
            Accum::Replace,
            a.transpose(),
            b.subcols(start, width),
            1.0,
            Par::Seq,
        );
        part
    });
    let mut out = Mat::<f64>::zeros(a.ncols(), n);
    for (blk, part) in parts.into_iter().enumerate() {
        let start = blk * COL_BLOCK;
        out.as_mut()
            .subcols_mut(start, part.ncols())
            .copy_from(part.as_ref());
    }
    out
}

/// Plain product `a b` on the calling thread.
pub fn product(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// Left singular vectors and singular values, sorted descending, with
/// directions below `RANK_CUTOFF * s_max` removed.
pub struct RankedBasis {
    pub u: Mat<f64>,
    pub singular_values: Vec<f64>,
}

pub fn ranked_left_basis(m: MatRef<'_, f64>) -> Result<RankedBasis> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Degenerate(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let s_max = if s.nrows() > 0 { s[0] } else { 0.0 };
    if !(s_max > 0.0) {
        return Err(Error::Degenerate("matrix is zero after centering".into()));
    }
    let rank = (0..s.nrows())
        .take_while(|&i| s[i] >= RANK_CUTOFF * s_max)
        .count();
    let u = svd.U().subcols(0, rank).to_owned();
    let singular_values = (0..rank).map(|i| s[i]).collect();
    Ok(RankedBasis { u, singular_values })
}

/// Singular value decomposition of a small matrix: `(u, s, v)` with `s`
/// descending and `min(rows, cols)` long.
pub fn small_svd(m: MatRef<'_, f64>) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Degenerate(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((svd.U().to_owned(), values, svd.V().to_owned()))
}
