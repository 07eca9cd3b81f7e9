//! Naive reference implementations over plain column vectors. They share no
//! code with the library and favour directness over speed.
#![allow(dead_code)]

use cwsim::ActivationMatrix;

pub type Cols = Vec<Vec<f64>>;

pub fn cols_of(m: &ActivationMatrix) -> Cols {
    (0..m.ncols()).map(|j| m.column(j).to_vec()).collect()
}

pub fn matrix(c: &Cols) -> ActivationMatrix {
    ActivationMatrix::from_columns(c).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    v.iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa.sqrt() * sbb.sqrt()))
    }
}

pub fn neuronsim(x: &Cols, y: &Cols) -> f64 {
    let scores: Vec<f64> = x
        .iter()
        .filter_map(|xk| {
            y.iter()
                .filter_map(|yk| pearson(xk, yk))
                .map(f64::abs)
                .reduce(f64::max)
        })
        .collect();
    mean(&scores)
}

/// Solves `a z = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * z[c]).sum();
        z[r] = (b[r] - s) / a[r][r];
    }
    z
}

/// Least squares with an intercept through the normal equations. Needs a
/// full-rank design.
pub fn r_value(x: &[f64], y: &Cols) -> f64 {
    let w = x.len();
    let mut design: Cols = vec![vec![1.0; w]];
    design.extend(y.iter().cloned());
    let p = design.len();
    let gram: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dot(&design[i], &design[j])).collect())
        .collect();
    let rhs: Vec<f64> = design.iter().map(|d| dot(d, x)).collect();
    let beta = solve(gram, rhs);
    let mx = mean(x);
    let pred: Vec<f64> = (0..w)
        .map(|i| (0..p).map(|j| beta[j] * design[j][i]).sum::<f64>() - mx)
        .collect();
    norm(&pred) / norm(&centered(x))
}

pub fn mixedsim(x: &Cols, y: &Cols) -> f64 {
    let r: Vec<f64> = x.iter().map(|xk| r_value(xk, y)).collect();
    mean(&r)
}

pub fn cka(x: &Cols, y: &Cols) -> f64 {
    let x: Cols = x.iter().map(|c| centered(c)).collect();
    let y: Cols = y.iter().map(|c| centered(c)).collect();
    let fro_sq = |a: &Cols, b: &Cols| -> f64 {
        a.iter()
            .flat_map(|ai| b.iter().map(move |bj| dot(ai, bj).powi(2)))
            .sum()
    };
    fro_sq(&x, &y) / (fro_sq(&x, &x).sqrt() * fro_sq(&y, &y).sqrt())
}

/// One-sided Jacobi SVD of a tall matrix given by columns. Returns the left
/// singular vectors and singular values in descending order.
pub fn jacobi_svd(a: &Cols) -> (Cols, Vec<f64>) {
    let mut u = a.clone();
    let n = u.len();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u[p].len() {
                    let (up, uq) = (u[p][i], u[q][i]);
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = u
        .into_iter()
        .map(|c| {
            let s = norm(&c);
            let v = if s > 0.0 { c.iter().map(|x| x / s).collect() } else { c };
            (s, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let s = pairs.iter().map(|p| p.0).collect();
    (pairs.into_iter().map(|p| p.1).collect(), s)
}

fn transpose(a: &Cols) -> Cols {
    let rows = a[0].len();
    (0..rows).map(|i| a.iter().map(|c| c[i]).collect()).collect()
}

/// `aᵀ b` for column lists.
fn at_b(a: &Cols, b: &Cols) -> Cols {
    b.iter()
        .map(|bj| a.iter().map(|ai| dot(ai, bj)).collect())
        .collect()
}

fn truncated_basis(x: &Cols, threshold: f64) -> Cols {
    let xc: Cols = x.iter().map(|c| centered(c)).collect();
    let (u, s) = jacobi_svd(&xc);
    let total: f64 = s.iter().map(|v| v * v).sum();
    let mut cum = 0.0;
    let mut keep = s.len();
    for (i, v) in s.iter().enumerate() {
        cum += v * v;
        if cum >= threshold * total {
            keep = i + 1;
            break;
        }
    }
    u.into_iter().take(keep).collect()
}

/// Canonical correlations and the matching left singular vectors of
/// `X'ᵀY'`.
fn canonical(xp: &Cols, yp: &Cols) -> (Cols, Vec<f64>) {
    let m = at_b(xp, yp); // columns indexed by y dims, rows by x dims
    let k = xp.len().min(yp.len());
    if xp.len() >= yp.len() {
        // m is tall: left singular vectors come straight out.
        let (u, s) = jacobi_svd(&m);
        (u.into_iter().take(k).collect(), s.into_iter().take(k).collect())
    } else {
        // mᵀ is tall; its right singular vectors are m's left ones.
        let mt = transpose(&m);
        let (u_t, s) = jacobi_svd(&mt);
        let left: Cols = (0..k)
            .map(|j| {
                // m v_j = s_j u_j with v_j = u_t[j]
                let mut out = vec![0.0; xp.len()];
                for (c, col) in m.iter().enumerate() {
                    for (r, v) in col.iter().enumerate() {
                        out[r] += v * u_t[j][c];
                    }
                }
                out.iter().map(|v| v / s[j]).collect()
            })
            .collect();
        (left, s.into_iter().take(k).collect())
    }
}

pub fn svsim(x: &Cols, y: &Cols, threshold: f64) -> f64 {
    let (_, rho) = canonical(&truncated_basis(x, threshold), &truncated_basis(y, threshold));
    mean(&rho)
}

pub fn pwsim(x: &Cols, y: &Cols, threshold: f64) -> f64 {
    let xp = truncated_basis(x, threshold);
    let yp = truncated_basis(y, threshold);
    let (u, rho) = canonical(&xp, &yp);
    let w = x[0].len();
    let h: Cols = u
        .iter()
        .map(|uj| (0..w).map(|i| xp.iter().zip(uj).map(|(c, a)| c[i] * a).sum()).collect())
        .collect();
    let xc: Cols = x.iter().map(|c| centered(c)).collect();
    let weights: Vec<f64> = h
        .iter()
        .map(|hj| xc.iter().map(|c| dot(hj, c).abs()).sum())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter().zip(&rho).map(|(w, r)| w / total * r).sum()
}

/// Deterministic integer-valued fixture.
pub fn fixture() -> (ActivationMatrix, ActivationMatrix) {
    let w = 12;
    let x: Vec<f64> = (0..w)
        .flat_map(|i| (0..4).map(move |j| ((7 * i + 13 * j + 3 * i * j) % 17) as f64 - 8.0))
        .collect();
    let y: Vec<f64> = (0..w)
        .flat_map(|i| {
            (0..3).map(move |j| ((5 * i * i + 11 * j + 2 * i * j + 1) % 19) as f64 - 9.0)
        })
        .collect();
    (
        ActivationMatrix::from_row_major(w, 4, &x).unwrap(),
        ActivationMatrix::from_row_major(w, 3, &y).unwrap(),
    )
}
