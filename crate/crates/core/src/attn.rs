//! Attention-head similarity.
//!
//! Localized: every head of the first layer is matched with its most similar
//! head in the second layer, under a Frobenius-norm distance, a per-word
//! Pearson correlation, or a per-word Jensen–Shannon divergence; scores are
//! averaged over the first layer's heads. Distances are oriented so that
//! larger always means more similar: the norm distance is negated and the
//! divergence (base 2) is reported as `1 - JSD`.
//!
//! Distributed: all heads of a layer are flattened into one word-pair by head
//! matrix and compared with the representation-level measures.

use std::fmt;
use std::str::FromStr;

use faer::Mat;

use crate::error::{Error, Result};
use crate::parallel::map_range;
use crate::rep;
use crate::tensorstore::{ActivationMatrix, AttentionLayer, ROW_SUM_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadSimilarityMethod {
    Norm,
    Pearson,
    Js,
}

impl HeadSimilarityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadSimilarityMethod::Norm => "norm",
            HeadSimilarityMethod::Pearson => "pearson",
            HeadSimilarityMethod::Js => "js",
        }
    }
}

impl fmt::Display for HeadSimilarityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadSimilarityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(HeadSimilarityMethod::Norm),
            "pearson" => Ok(HeadSimilarityMethod::Pearson),
            "js" => Ok(HeadSimilarityMethod::Js),
            other => Err(Error::InvalidArgument(format!("unknown head similarity {other:?}"))),
        }
    }
}

/// One head of an attention layer.
#[derive(Clone, Copy, Debug)]
pub struct Head<'a> {
    layer: &'a AttentionLayer,
    index: usize,
}

impl<'a> Head<'a> {
    pub fn new(layer: &'a AttentionLayer, index: usize) -> Result<Self> {
        if index >= layer.heads() {
            return Err(Error::InvalidArgument(format!(
                "head {index} out of range for {} heads",
                layer.heads()
            )));
        }
        Ok(Head { layer, index })
    }

    fn matrix(&self, sentence: usize) -> &'a [f64] {
        self.layer.matrix(sentence, self.index)
    }

    fn row(&self, sentence: usize, row: usize) -> &'a [f64] {
        self.layer.row(sentence, self.index, row)
    }
}

fn same_structure(a: &AttentionLayer, b: &AttentionLayer) -> Result<()> {
    if a.sentence_lengths() != b.sentence_lengths() {
        return Err(Error::DimensionMismatch(
            "attention layers cover different sentence structures".into(),
        ));
    }
    if a.num_sentences() == 0 {
        return Err(Error::Degenerate("attention layers cover no sentences".into()));
    }
    Ok(())
}

/// Negated mean over sentences of `‖a(s) - b(s)‖_F`.
pub fn head_norm_similarity(a: Head<'_>, b: Head<'_>) -> Result<f64> {
    same_structure(a.layer, b.layer)?;
    let n = a.layer.num_sentences();
    let total: f64 = (0..n)
        .map(|s| {
            a.matrix(s)
                .iter()
                .zip(b.matrix(s))
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(-(total / n as f64))
}

fn is_flat(row: &[f64]) -> bool {
    row.iter().all(|&v| v == row[0])
}

/// Pearson correlation of two equal-length vectors, `None` if either is
/// constant.
pub(crate) fn row_pearson(p: &[f64], q: &[f64]) -> Option<f64> {
    if is_flat(p) || is_flat(q) {
        return None;
    }
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let mq = q.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in p.iter().zip(q) {
        let (dx, dy) = (x - mp, y - mq);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Mean over words of the Pearson correlation between the two heads'
/// attention rows. Rows that are constant in either head are skipped.
pub fn head_pearson_similarity(a: Head<'_>, b: Head<'_>) -> Result<f64> {
    same_structure(a.layer, b.layer)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (s, &t) in a.layer.sentence_lengths().iter().enumerate() {
        for r in 0..t {
            if let Some(rho) = row_pearson(a.row(s, r), b.row(s, r)) {
                total += rho;
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "every attention row is constant; Pearson correlation undefined".into(),
        ));
    }
    Ok(total / used as f64)
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen–Shannon divergence in bits, clamped to `[0, 1]`.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let jsd = 0.5 * (kl_to_mixture(p, &m) + kl_to_mixture(q, &m));
    jsd.clamp(0.0, 1.0)
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE || row.iter().any(|&v| v < 0.0) {
        return Err(Error::InvariantViolation(format!(
            "{what} is not a probability distribution (sums to {sum})"
        )));
    }
    Ok(())
}

/// One minus the mean over words of the Jensen–Shannon divergence between
/// the two heads' attention rows.
pub fn head_js_similarity(a: Head<'_>, b: Head<'_>) -> Result<f64> {
    same_structure(a.layer, b.layer)?;
    let mut total = 0.0;
    let mut words = 0usize;
    for (s, &t) in a.layer.sentence_lengths().iter().enumerate() {
        for r in 0..t {
            let (p, q) = (a.row(s, r), b.row(s, r));
            check_distribution(p, "attention row")?;
            check_distribution(q, "attention row")?;
            total += jensen_shannon(p, q);
            words += 1;
        }
    }
    Ok(1.0 - total / words as f64)
}

pub fn head_similarity(method: HeadSimilarityMethod, a: Head<'_>, b: Head<'_>) -> Result<f64> {
    match method {
        HeadSimilarityMethod::Norm => head_norm_similarity(a, b),
        HeadSimilarityMethod::Pearson => head_pearson_similarity(a, b),
        HeadSimilarityMethod::Js => head_js_similarity(a, b),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadMatch {
    pub score: f64,
    /// Lowest-index head of the second layer attaining the maximum.
    pub partner: usize,
}

/// The best-matching head of `b` for every head of `a`.
pub fn head_matches(
    a: &AttentionLayer,
    b: &AttentionLayer,
    method: HeadSimilarityMethod,
) -> Result<Vec<HeadMatch>> {
    same_structure(a, b)?;
    if method == HeadSimilarityMethod::Js {
        for layer in [a, b] {
            if let Some(v) = layer.row_sum_violations(ROW_SUM_TOLERANCE, 1).first() {
                return Err(Error::InvariantViolation(format!(
                    "sentence {} head {} row {} sums to {}",
                    v.sentence, v.head, v.row, v.sum
                )));
            }
        }
    }
    map_range(a.heads(), |k| {
        let head = Head { layer: a, index: k };
        let mut best: Option<HeadMatch> = None;
        for k2 in 0..b.heads() {
            let score = head_similarity(method, Head { layer: b, index: k2 }, head)?;
            if best.is_none_or(|m| score > m.score) {
                best = Some(HeadMatch { score, partner: k2 });
            }
        }
        Ok(best.expect("layers have at least one head"))
    })
    .into_iter()
    .collect()
}

/// Mean over heads of `a` of the best similarity to any head of `b`.
pub fn attnsim_layer(a: &AttentionLayer, b: &AttentionLayer, method: HeadSimilarityMethod) -> Result<f64> {
    let matches = head_matches(a, b, method)?;
    Ok(matches.iter().map(|m| m.score).sum::<f64>() / matches.len() as f64)
}

/// All heads of a layer flattened into a `Σ t_i²` by `H` matrix. Rows run
/// over sentences in corpus order and, within a sentence, over word pairs
/// `(i, j)` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionRepresentation {
    matrix: ActivationMatrix,
    lengths: Vec<usize>,
}

impl AttentionRepresentation {
    pub fn matrix(&self) -> &ActivationMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ActivationMatrix {
        self.matrix
    }

    /// Restores the per-sentence head matrices.
    pub fn unflatten(&self) -> Result<AttentionLayer> {
        let heads = self.matrix.ncols();
        let m = self.matrix.as_mat();
        let mut offsets = Vec::with_capacity(self.lengths.len());
        let mut acc = 0;
        for &t in &self.lengths {
            offsets.push(acc);
            acc += t * t;
        }
        AttentionLayer::from_fn(heads, self.lengths.clone(), true, |s, h, r, c| {
            m[(offsets[s] + r * self.lengths[s] + c, h)]
        })
    }
}

pub fn attention_representation(layer: &AttentionLayer) -> Result<AttentionRepresentation> {
    if !layer.is_aligned() {
        return Err(Error::InvalidArgument(
            "attention representation needs a word-aligned layer".into(),
        ));
    }
    let heads = layer.heads();
    let mut data = Mat::<f64>::zeros(layer.pair_count(), heads);
    let mut offset = 0;
    for (s, &t) in layer.sentence_lengths().iter().enumerate() {
        for h in 0..heads {
            let src = layer.matrix(s, h);
            data.col_as_slice_mut(h)[offset..offset + t * t].copy_from_slice(src);
        }
        offset += t * t;
    }
    Ok(AttentionRepresentation {
        matrix: ActivationMatrix::new(data)?,
        lengths: layer.sentence_lengths().to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistributedMeasure {
    SvSim,
    PwSim,
    CkaSim,
}

pub fn distributed_attnsim(
    a: &AttentionLayer,
    b: &AttentionLayer,
    measure: DistributedMeasure,
    variance_threshold: f64,
) -> Result<f64> {
    same_structure(a, b)?;
    let x = attention_representation(a)?.into_matrix();
    let y = attention_representation(b)?.into_matrix();
    match measure {
        DistributedMeasure::SvSim => rep::svsim(&x, &y, variance_threshold),
        DistributedMeasure::PwSim => rep::pwsim(&x, &y, variance_threshold),
        DistributedMeasure::CkaSim => rep::ckasim(&x, &y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(lengths: Vec<usize>, rows: &[&[f64]]) -> AttentionLayer {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        AttentionLayer::new(1, lengths, data, true).unwrap()
    }

    fn head(l: &AttentionLayer) -> Head<'_> {
        Head::new(l, 0).unwrap()
    }

    #[test]
    fn norm_examples() {
        let a = layer(vec![2, 2], &[&[0.5, 0.5], &[0.3, 0.7], &[0.6, 0.4], &[0.2, 0.8]]);
        let b = layer(vec![2, 2], &[&[0.4, 0.6], &[0.3, 0.7], &[0.6, 0.4], &[0.0, 1.0]]);
        assert_eq!(head_norm_similarity(head(&a), head(&a)).unwrap(), 0.0);
        let expected = -((0.02f64).sqrt() + (0.08f64).sqrt()) / 2.0;
        assert!((head_norm_similarity(head(&a), head(&b)).unwrap() - expected).abs() < 1e-12);

        let one = layer(vec![1], &[&[1.0]]);
        assert_eq!(head_norm_similarity(head(&one), head(&one)).unwrap(), 0.0);
    }

    #[test]
    fn pearson_examples() {
        let a = layer(vec![3], &[&[0.5, 0.3, 0.2], &[0.1, 0.1, 0.8], &[0.2, 0.2, 0.6]]);
        assert!((head_pearson_similarity(head(&a), head(&a)).unwrap() - 1.0).abs() < 1e-12);

        let p = layer(vec![1, 2], &[&[1.0], &[0.3, 0.7], &[0.9, 0.1]]);
        let q = layer(vec![1, 2], &[&[1.0], &[0.7, 0.3], &[0.1, 0.9]]);
        assert!((head_pearson_similarity(head(&p), head(&q)).unwrap() + 1.0).abs() < 1e-12);

        let single_a = layer(vec![3], &[&[0.5, 0.3, 0.2], &[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]]);
        let single_b = layer(vec![3], &[&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]]);
        let s = head_pearson_similarity(head(&single_a), head(&single_b)).unwrap();
        // rows 1 and 2 agree exactly; row 0 correlates at -13/14
        assert!(((s * 3.0 - 2.0) - (-13.0 / 14.0)).abs() < 1e-12, "{s}");
    }

    #[test]
    fn pearson_all_rows_flat_errors() {
        let u = layer(vec![1, 2], &[&[1.0], &[0.5, 0.5], &[0.5, 0.5]]);
        assert!(matches!(
            head_pearson_similarity(head(&u), head(&u)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn js_examples() {
        assert_eq!(jensen_shannon(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(jensen_shannon(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        let d = jensen_shannon(&[0.5, 0.5], &[1.0, 0.0]);
        assert!((d - 0.311_278_124_459_132_8).abs() < 1e-12, "{d}");

        let p = layer(vec![2], &[&[1.0, 0.0], &[0.5, 0.5]]);
        let q = layer(vec![2], &[&[0.0, 1.0], &[0.5, 0.5]]);
        assert_eq!(head_js_similarity(head(&p), head(&p)).unwrap(), 1.0);
        assert!((head_js_similarity(head(&p), head(&q)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn js_rejects_non_distributions() {
        let p = AttentionLayer::new(1, vec![2], vec![0.9, 0.3, 0.5, 0.5], false).unwrap();
        assert!(matches!(
            head_js_similarity(head(&p), head(&p)),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn layer_aggregation_composes_head_scores() {
        // head 0 identical across layers, head 1 differs
        let a = AttentionLayer::new(2, vec![2], vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.5], true)
            .unwrap();
        let b = AttentionLayer::new(2, vec![2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0], true)
            .unwrap();
        let m = head_matches(&a, &b, HeadSimilarityMethod::Js).unwrap();
        assert_eq!(m[0], HeadMatch { score: 1.0, partner: 0 });
        let expected_second = 1.0 - jensen_shannon(&[0.5, 0.5], &[1.0, 0.0]);
        assert!((m[1].score - expected_second).abs() < 1e-15);
        let s = attnsim_layer(&a, &b, HeadSimilarityMethod::Js).unwrap();
        assert!((s - (1.0 + expected_second) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn flatten_layout_and_round_trip() {
        let l = layer(vec![2], &[&[0.7, 0.3], &[0.4, 0.6]]);
        let rep = attention_representation(&l).unwrap();
        assert_eq!(rep.matrix().column(0), &[0.7, 0.3, 0.4, 0.6]);
        assert_eq!(rep.unflatten().unwrap(), l);

        let l = AttentionLayer::from_fn(4, vec![2, 3], true, |s, _, _, _| if s == 0 { 0.5 } else { 1.0 / 3.0 })
            .unwrap();
        let rep = attention_representation(&l).unwrap();
        assert_eq!((rep.matrix().nrows(), rep.matrix().ncols()), (13, 4));
        assert_eq!(rep.unflatten().unwrap(), l);
    }

    #[test]
    fn structure_mismatch() {
        let a = layer(vec![2], &[&[0.7, 0.3], &[0.4, 0.6]]);
        let b = layer(vec![1, 1], &[&[1.0], &[1.0]]);
        assert!(matches!(
            attnsim_layer(&a, &b, HeadSimilarityMethod::Norm),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
