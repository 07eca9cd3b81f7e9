//! Seeded synthetic layers for tests, benchmarks and demos.

use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::product;
use crate::tensorstore::{ActivationMatrix, AttentionLayer};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(rows, cols);
    for j in 0..cols {
        for v in m.col_as_slice_mut(j) {
            *v = rng.sample(StandardNormal);
        }
    }
    m
}

pub fn gaussian_layer<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> ActivationMatrix {
    ActivationMatrix::new(gaussian_matrix(rows, cols, rng)).expect("gaussian entries are finite")
}

/// Haar-distributed orthogonal matrix.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> Mat<f64> {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.col_as_slice_mut(j).iter_mut().for_each(|v| *v = -*v);
        }
    }
    q
}

/// `Q1 diag(s) Q2` with singular values drawn uniformly from `[lo, hi]`.
pub fn random_invertible<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Mat<f64> {
    let q1 = random_orthogonal(n, rng);
    let q2 = random_orthogonal(n, rng);
    let mut scaled = q1;
    for j in 0..n {
        let s: f64 = rng.random_range(lo..=hi);
        scaled.col_as_slice_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    product(scaled.as_ref(), q2.as_ref())
}

pub fn random_permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn random_signs<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Column `j` of the result is `signs[j] * x[:, perm[j]]`.
pub fn permute_columns(x: MatRef<'_, f64>, perm: &[usize], signs: &[f64]) -> Mat<f64> {
    Mat::from_fn(x.nrows(), perm.len(), |i, j| signs[j] * x[(i, perm[j])])
}

/// Rows are softmax distributions over gaussian logits scaled by `sharpness`.
pub fn softmax_attention<R: Rng>(
    heads: usize,
    lengths: &[usize],
    sharpness: f64,
    rng: &mut R,
) -> AttentionLayer {
    let mut data = Vec::with_capacity(lengths.iter().map(|t| heads * t * t).sum());
    for &t in lengths {
        for _ in 0..heads * t {
            let logits: Vec<f64> = (0..t)
                .map(|_| sharpness * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            data.extend(exps.iter().map(|e| e / z));
        }
    }
    AttentionLayer::new(heads, lengths.to_vec(), data, true).expect("softmax rows are distributions")
}

/// A toy residual network over shared word inputs: the first layer is a
/// random `tanh` projection of the inputs and each later layer adds a random
/// `tanh` mixing of the previous one. Neurons keep their identity along the
/// residual stream, so layers of one model resemble each other neuron by
/// neuron while two independently drawn models do not.
pub fn residual_model<R: Rng>(
    inputs: MatRef<'_, f64>,
    width: usize,
    layers: usize,
    residual_scale: f64,
    rng: &mut R,
) -> Result<Vec<ActivationMatrix>> {
    let d = inputs.ncols();
    let mut embed = gaussian_matrix(d, width, rng);
    scale(&mut embed, 1.0 / (d as f64).sqrt());
    let mut h = product(inputs, embed.as_ref());
    tanh_in_place(&mut h);
    let mut out = vec![ActivationMatrix::new(h.clone())?];
    for _ in 1..layers {
        let mut mix = gaussian_matrix(width, width, rng);
        scale(&mut mix, 1.0 / (width as f64).sqrt());
        let mut delta = product(h.as_ref(), mix.as_ref());
        tanh_in_place(&mut delta);
        for j in 0..width {
            let dst = h.col_as_slice_mut(j);
            for (v, dv) in dst.iter_mut().zip(delta.col_as_slice(j)) {
                *v += residual_scale * dv;
            }
        }
        out.push(ActivationMatrix::new(h.clone())?);
    }
    Ok(out)
}

fn scale(m: &mut Mat<f64>, s: f64) {
    for j in 0..m.ncols() {
        m.col_as_slice_mut(j).iter_mut().for_each(|v| *v *= s);
    }
}

fn tanh_in_place(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        m.col_as_slice_mut(j).iter_mut().for_each(|v| *v = v.tanh());
    }
}
