//! Distributed similarity between whole layers: SVCCA, projection-weighted
//! CCA and linear CKA. All three operate on column-centered layers.

use std::cmp::Ordering;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, cross_product, frobenius_sq, product};
use crate::tensorstore::ActivationMatrix;

pub use crate::linalg::center_columns;

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.99;

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "variance threshold must lie in (0, 1], got {t}"
        )));
    }
    Ok(())
}

fn check_rows(x: usize, y: usize) -> Result<()> {
    if x != y {
        return Err(Error::DimensionMismatch(format!("layers cover {x} and {y} words")));
    }
    Ok(())
}

/// A centered layer together with its leading left singular vectors: the
/// smallest prefix whose squared singular values reach the variance
/// threshold.
#[derive(Clone, Debug)]
pub struct TruncatedBasis {
    centered: Mat<f64>,
    basis: Mat<f64>,
    singular_values: Vec<f64>,
}

impl TruncatedBasis {
    pub fn new(x: &ActivationMatrix, variance_threshold: f64) -> Result<Self> {
        check_threshold(variance_threshold)?;
        let centered = center_columns(x.as_mat());
        let ranked = linalg::ranked_left_basis(centered.as_ref())?;
        let keep = truncation_index(&ranked.singular_values, variance_threshold);
        Ok(TruncatedBasis {
            basis: ranked.u.subcols(0, keep).to_owned(),
            singular_values: ranked.singular_values,
            centered,
        })
    }

    /// Number of retained directions.
    pub fn dims(&self) -> usize {
        self.basis.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.centered.nrows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn size_bytes(&self) -> usize {
        8 * (self.centered.nrows() * (self.centered.ncols() + self.basis.ncols())
            + self.singular_values.len())
    }
}

/// Smallest `l` with `Σ_{i<l} s_i² >= threshold · Σ s_i²`.
pub fn truncation_index(singular_values: &[f64], threshold: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let target = threshold * total;
    let mut cum = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        cum += s * s;
        if cum >= target {
            return i + 1;
        }
    }
    singular_values.len()
}

/// Everything computed on the way to the SVCCA and PWCCA scores.
#[derive(Clone, Debug)]
pub struct CcaDecomposition {
    /// Truncated left singular vectors of each centered layer.
    pub u_x: Mat<f64>,
    pub u_y: Mat<f64>,
    pub l_x: usize,
    pub l_y: usize,
    /// Canonical correlations, descending, `min(l_x, l_y)` of them.
    pub rho: Vec<f64>,
    /// Singular vectors of `u_xᵀ u_y`, truncated to `rho.len()` columns.
    pub u: Mat<f64>,
    pub v: Mat<f64>,
    /// Canonical vectors `u_x u` and `u_y v`.
    pub h_x: Mat<f64>,
    pub h_y: Mat<f64>,
    /// Absolute alignment of the canonical vectors with the centered layers.
    pub a_x: Mat<f64>,
    pub a_y: Mat<f64>,
    /// Normalized row sums of the alignments.
    pub alpha_x: Vec<f64>,
    pub alpha_y: Vec<f64>,
}

struct CanonicalCore {
    rho: Vec<f64>,
    u: Mat<f64>,
    v: Mat<f64>,
}

fn canonical_core(a: &TruncatedBasis, b: &TruncatedBasis) -> Result<CanonicalCore> {
    check_rows(a.nrows(), b.nrows())?;
    let cross = cross_product(a.basis.as_ref(), b.basis.as_ref());
    let (u, mut rho, v) = linalg::small_svd(cross.as_ref())?;
    rho.iter_mut().for_each(|r| *r = r.min(1.0));
    let k = rho.len();
    Ok(CanonicalCore {
        rho,
        u: u.subcols(0, k).to_owned(),
        v: v.subcols(0, k).to_owned(),
    })
}

/// `abs(Hᵀ X)` and its normalized row sums.
fn alignment_weights(h: &Mat<f64>, centered: &Mat<f64>) -> Result<(Mat<f64>, Vec<f64>)> {
    let mut a = cross_product(h.as_ref(), centered.as_ref());
    for j in 0..a.ncols() {
        a.col_as_slice_mut(j).iter_mut().for_each(|v| *v = v.abs());
    }
    let mut sums = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        for (s, v) in sums.iter_mut().zip(a.col_as_slice(j)) {
            *s += v;
        }
    }
    let total: f64 = sums.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("canonical vectors have no alignment".into()));
    }
    sums.iter_mut().for_each(|s| *s /= total);
    Ok((a, sums))
}

pub fn svcca_decompose_prepared(a: &TruncatedBasis, b: &TruncatedBasis) -> Result<CcaDecomposition> {
    let core = canonical_core(a, b)?;
    let h_x = product(a.basis.as_ref(), core.u.as_ref());
    let h_y = product(b.basis.as_ref(), core.v.as_ref());
    let (a_x, alpha_x) = alignment_weights(&h_x, &a.centered)?;
    let (a_y, alpha_y) = alignment_weights(&h_y, &b.centered)?;
    Ok(CcaDecomposition {
        u_x: a.basis.clone(),
        u_y: b.basis.clone(),
        l_x: a.dims(),
        l_y: b.dims(),
        rho: core.rho,
        u: core.u,
        v: core.v,
        h_x,
        h_y,
        a_x,
        a_y,
        alpha_x,
        alpha_y,
    })
}

pub fn svcca_decompose(
    x: &ActivationMatrix,
    y: &ActivationMatrix,
    variance_threshold: f64,
) -> Result<CcaDecomposition> {
    check_rows(x.nrows(), y.nrows())?;
    svcca_decompose_prepared(
        &TruncatedBasis::new(x, variance_threshold)?,
        &TruncatedBasis::new(y, variance_threshold)?,
    )
}

pub fn svsim_prepared(a: &TruncatedBasis, b: &TruncatedBasis) -> Result<f64> {
    let rho = canonical_core(a, b)?.rho;
    Ok(rho.iter().sum::<f64>() / rho.len() as f64)
}

/// Mean canonical correlation after SVD truncation.
pub fn svsim(x: &ActivationMatrix, y: &ActivationMatrix, variance_threshold: f64) -> Result<f64> {
    check_rows(x.nrows(), y.nrows())?;
    svsim_prepared(
        &TruncatedBasis::new(x, variance_threshold)?,
        &TruncatedBasis::new(y, variance_threshold)?,
    )
}

/// Canonical correlations weighted by how strongly the first layer's
/// canonical vectors align with its neurons.
pub fn pwsim_prepared(a: &TruncatedBasis, b: &TruncatedBasis) -> Result<f64> {
    let core = canonical_core(a, b)?;
    let h_x = product(a.basis.as_ref(), core.u.as_ref());
    let (_, alpha) = alignment_weights(&h_x, &a.centered)?;
    Ok(alpha.iter().zip(&core.rho).map(|(w, r)| w * r).sum())
}

pub fn pwsim(x: &ActivationMatrix, y: &ActivationMatrix, variance_threshold: f64) -> Result<f64> {
    check_rows(x.nrows(), y.nrows())?;
    pwsim_prepared(
        &TruncatedBasis::new(x, variance_threshold)?,
        &TruncatedBasis::new(y, variance_threshold)?,
    )
}

/// A centered layer and `‖XᵀX‖_F`.
#[derive(Clone, Debug)]
pub struct CkaOperand {
    centered: Mat<f64>,
    self_norm: f64,
}

impl CkaOperand {
    pub fn new(x: &ActivationMatrix) -> Result<Self> {
        let centered = center_columns(x.as_mat());
        // ‖XᵀX‖_F = ‖XXᵀ‖_F; take whichever Gram matrix is smaller.
        let gram = if centered.nrows() < centered.ncols() {
            cross_product(centered.transpose(), centered.transpose())
        } else {
            cross_product(centered.as_ref(), centered.as_ref())
        };
        let self_norm = frobenius_sq(gram.as_ref()).sqrt();
        if !(self_norm > 0.0) {
            return Err(Error::Degenerate("layer is constant after centering".into()));
        }
        Ok(CkaOperand { centered, self_norm })
    }

    pub fn nrows(&self) -> usize {
        self.centered.nrows()
    }

    pub fn size_bytes(&self) -> usize {
        8 * self.centered.nrows() * self.centered.ncols()
    }

    /// Total order on operand contents, used to fix argument order.
    fn content_cmp(&self, other: &Self) -> Ordering {
        self.centered
            .shape()
            .cmp(&other.centered.shape())
            .then_with(|| {
                for j in 0..self.centered.ncols() {
                    let a = self.centered.col_as_slice(j);
                    let b = other.centered.col_as_slice(j);
                    for (p, q) in a.iter().zip(b) {
                        match p.to_bits().cmp(&q.to_bits()) {
                            Ordering::Equal => {}
                            ord => return ord,
                        }
                    }
                }
                Ordering::Equal
            })
    }
}

/// Linear CKA. Arguments are put in a canonical order first so that
/// `ckasim_prepared(a, b) == ckasim_prepared(b, a)` bit for bit.
pub fn ckasim_prepared(a: &CkaOperand, b: &CkaOperand) -> Result<f64> {
    check_rows(a.nrows(), b.nrows())?;
    let (a, b) = if a.content_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let cross = cross_product(a.centered.as_ref(), b.centered.as_ref());
    Ok((frobenius_sq(cross.as_ref()) / (a.self_norm * b.self_norm)).min(1.0))
}

pub fn ckasim(x: &ActivationMatrix, y: &ActivationMatrix) -> Result<f64> {
    check_rows(x.nrows(), y.nrows())?;
    ckasim_prepared(&CkaOperand::new(x)?, &CkaOperand::new(y)?)
}
