//! Localized similarity between individual neurons.
//!
//! `neuronsim` matches every neuron of the first layer with its most
//! correlated neuron (by absolute Pearson correlation) in the second layer.
//! `mixedsim` regresses every neuron of the first layer on all neurons of the
//! second and scores the fit. Both average over the first layer's neurons, so
//! they are asymmetric.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, center_columns, column_is_constant, column_norm, cross_product};
use crate::tensorstore::ActivationMatrix;

/// Column-centered, unit-norm neurons. Zero-variance neurons are flagged
/// absent and left as zero columns.
#[derive(Clone, Debug)]
pub struct StandardizedColumns {
    unit: Mat<f64>,
    present: Vec<bool>,
}

impl StandardizedColumns {
    pub fn new(x: &ActivationMatrix) -> Self {
        let mut unit = center_columns(x.as_mat());
        let mut present = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let norm = column_norm(unit.as_ref(), j);
            let ok = !column_is_constant(x.as_mat(), j) && norm > 0.0;
            let col = unit.col_as_slice_mut(j);
            if ok {
                col.iter_mut().for_each(|v| *v /= norm);
            } else {
                col.fill(0.0);
            }
            present.push(ok);
        }
        StandardizedColumns { unit, present }
    }

    pub fn nrows(&self) -> usize {
        self.unit.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.unit.ncols()
    }

    pub fn is_present(&self, j: usize) -> bool {
        self.present[j]
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn size_bytes(&self) -> usize {
        self.unit.nrows() * self.unit.ncols() * 8 + self.present.len()
    }

    fn require_some(&self, side: &str) -> Result<()> {
        if self.present_count() == 0 {
            return Err(Error::ZeroVariance(format!("every neuron of {side} is constant")));
        }
        Ok(())
    }

    fn warn_absent(&self, side: &str) {
        let absent = self.ncols() - self.present_count();
        if absent > 0 {
            log::warn!("{absent} zero-variance neurons in {side} excluded");
        }
    }
}

fn check_rows(x: usize, y: usize) -> Result<()> {
    if x != y {
        return Err(Error::DimensionMismatch(format!(
            "layers cover {x} and {y} words"
        )));
    }
    Ok(())
}

/// Pearson correlations between every neuron of `x` and every neuron of `y`.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix {
    data: Mat<f64>,
    rows_present: Vec<bool>,
    cols_present: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// `None` when either neuron has zero variance.
    pub fn get(&self, k: usize, k2: usize) -> Option<f64> {
        (self.rows_present[k] && self.cols_present[k2]).then(|| self.data[(k, k2)])
    }
}

pub fn pearson_matrix(x: &ActivationMatrix, y: &ActivationMatrix) -> Result<CorrelationMatrix> {
    check_rows(x.nrows(), y.nrows())?;
    let sx = StandardizedColumns::new(x);
    let sy = StandardizedColumns::new(y);
    sx.require_some("the first layer")?;
    sy.require_some("the second layer")?;
    Ok(correlations(&sx, &sy))
}

fn correlations(sx: &StandardizedColumns, sy: &StandardizedColumns) -> CorrelationMatrix {
    let mut data = cross_product(sx.unit.as_ref(), sy.unit.as_ref());
    // Unit columns give |ρ| ≤ 1 up to rounding; keep it exact.
    for j in 0..data.ncols() {
        data.col_as_slice_mut(j).iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    }
    CorrelationMatrix {
        data,
        rows_present: sx.present.clone(),
        cols_present: sy.present.clone(),
    }
}

/// A neuron's best match in another layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronMatch {
    pub score: f64,
    /// Lowest-index neuron attaining the maximum.
    pub partner: usize,
}

/// Best absolute correlation of every neuron of the first layer, `None` for
/// zero-variance neurons.
pub fn neuron_matches(sx: &StandardizedColumns, sy: &StandardizedColumns) -> Vec<Option<NeuronMatch>> {
    let c = correlations(sx, sy);
    let mut best: Vec<Option<NeuronMatch>> = vec![None; sx.ncols()];
    for j in 0..sy.ncols() {
        if !sy.present[j] {
            continue;
        }
        let col = c.data.col_as_slice(j);
        for (i, slot) in best.iter_mut().enumerate() {
            if !sx.present[i] {
                continue;
            }
            let score = col[i].abs();
            match slot {
                Some(m) if m.score >= score => {}
                _ => *slot = Some(NeuronMatch { score, partner: j }),
            }
        }
    }
    best
}

pub fn neuronsim_neuron(x: &ActivationMatrix, k: usize, y: &ActivationMatrix) -> Result<NeuronMatch> {
    check_rows(x.nrows(), y.nrows())?;
    if k >= x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "neuron {k} out of range for {} neurons",
            x.ncols()
        )));
    }
    let single = ActivationMatrix::from_columns(&[x.column(k).to_vec()])?;
    let sx = StandardizedColumns::new(&single);
    if !sx.present[0] {
        return Err(Error::ZeroVariance(format!("neuron {k} is constant")));
    }
    let sy = StandardizedColumns::new(y);
    sy.require_some("the second layer")?;
    Ok(neuron_matches(&sx, &sy)[0].expect("present neuron has a match"))
}

/// Mean of `scores`, or of the `top_k` largest when given.
fn mean_of(mut scores: Vec<f64>, top_k: Option<usize>) -> Result<f64> {
    if let Some(k) = top_k {
        if k == 0 {
            return Err(Error::InvalidArgument("top_k must be positive".into()));
        }
        scores.sort_by(|a, b| b.total_cmp(a));
        scores.truncate(k);
    }
    let n = scores.len() as f64;
    Ok(scores.iter().sum::<f64>() / n)
}

pub fn neuronsim_layer_prepared(
    sx: &StandardizedColumns,
    sy: &StandardizedColumns,
    top_k: Option<usize>,
) -> Result<f64> {
    check_rows(sx.nrows(), sy.nrows())?;
    sx.require_some("the first layer")?;
    sy.require_some("the second layer")?;
    sx.warn_absent("the first layer");
    sy.warn_absent("the second layer");
    let scores = neuron_matches(sx, sy)
        .into_iter()
        .flatten()
        .map(|m| m.score)
        .collect();
    mean_of(scores, top_k)
}

pub fn neuronsim_layer(x: &ActivationMatrix, y: &ActivationMatrix, top_k: Option<usize>) -> Result<f64> {
    check_rows(x.nrows(), y.nrows())?;
    neuronsim_layer_prepared(&StandardizedColumns::new(x), &StandardizedColumns::new(y), top_k)
}

/// Orthonormal basis of the centered column span of a layer, used as the
/// regressors for `mixedsim`. Directions with singular value below
/// `1e-10 * s_max` are dropped.
#[derive(Clone, Debug)]
pub struct RegressorBasis {
    u: Mat<f64>,
}

impl RegressorBasis {
    pub fn new(y: &ActivationMatrix) -> Result<Self> {
        let centered = center_columns(y.as_mat());
        if linalg::frobenius_sq(centered.as_ref()) == 0.0 {
            return Ok(RegressorBasis {
                u: Mat::zeros(y.nrows(), 0),
            });
        }
        Ok(RegressorBasis {
            u: linalg::ranked_left_basis(centered.as_ref())?.u,
        })
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn size_bytes(&self) -> usize {
        self.u.nrows() * self.u.ncols() * 8
    }
}

/// r-value of regressing each neuron of the first layer on the basis:
/// the norm of the centered prediction over the norm of the centered
/// regressand. `None` for zero-variance neurons.
pub fn mixedsim_scores(sx: &StandardizedColumns, basis: &RegressorBasis) -> Vec<Option<f64>> {
    if basis.rank() == 0 {
        return sx.present.iter().map(|&p| p.then_some(0.0)).collect();
    }
    let proj = cross_product(basis.u.as_ref(), sx.unit.as_ref());
    (0..sx.ncols())
        .map(|j| sx.present[j].then(|| column_norm(proj.as_ref(), j).min(1.0)))
        .collect()
}

pub fn mixedsim_neuron(x: &ActivationMatrix, k: usize, y: &ActivationMatrix) -> Result<f64> {
    check_rows(x.nrows(), y.nrows())?;
    if k >= x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "neuron {k} out of range for {} neurons",
            x.ncols()
        )));
    }
    let single = ActivationMatrix::from_columns(&[x.column(k).to_vec()])?;
    let sx = StandardizedColumns::new(&single);
    if !sx.present[0] {
        return Err(Error::ZeroVariance(format!("neuron {k} is constant")));
    }
    Ok(mixedsim_scores(&sx, &RegressorBasis::new(y)?)[0].expect("present"))
}

pub fn mixedsim_layer_prepared(sx: &StandardizedColumns, basis: &RegressorBasis) -> Result<f64> {
    check_rows(sx.nrows(), basis.nrows())?;
    sx.require_some("the first layer")?;
    sx.warn_absent("the first layer");
    let scores = mixedsim_scores(sx, basis).into_iter().flatten().collect();
    mean_of(scores, None)
}

pub fn mixedsim_layer(x: &ActivationMatrix, y: &ActivationMatrix) -> Result<f64> {
    check_rows(x.nrows(), y.nrows())?;
    mixedsim_layer_prepared(&StandardizedColumns::new(x), &RegressorBasis::new(y)?)
}
