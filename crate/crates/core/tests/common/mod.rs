//! Test-side oracles and random instance generators. Nothing here calls the
//! library routine it is used to check.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;

pub type Mat = DMatrix<f64>;

/// Dense Kronecker product.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `x⁺ = [I_N ⊗ A - μ L ⊗ BF] x` with the full dense matrix.
pub fn dense_step(x: &DVector<f64>, l: &Mat, a: &Mat, b: &Mat, f: &Mat, mu: f64) -> DVector<f64> {
    let n_agents = l.nrows();
    let big = kron(&Mat::identity(n_agents, n_agents), a) - kron(l, &(b * f)) * mu;
    big * x
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn rotation(theta: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[theta.cos(), theta.sin(), -theta.sin(), theta.cos()])
}

/// `σ̄[C (zI - A)⁻¹ B]` at an arbitrary complex point.
pub fn gain_at(a: &Mat, b: &Mat, c: &Mat, z: Complex<f64>) -> DMatrix<Complex<f64>> {
    let n = a.nrows();
    let ac = a.map(|v| Complex::new(v, 0.0));
    let bc = b.map(|v| Complex::new(v, 0.0));
    let cc = c.map(|v| Complex::new(v, 0.0));
    let m = DMatrix::<Complex<f64>>::identity(n, n) * z - ac;
    let x = m.lu().solve(&bc).expect("z is not an eigenvalue");
    cc * x
}

pub fn sigma_max(m: &DMatrix<Complex<f64>>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Brute-force sweep of `σ̄` on `[0, π]` with `points` samples.
pub fn sweep_hinf(a: &Mat, b: &Mat, c: &Mat, points: usize) -> f64 {
    (0..=points)
        .map(|i| {
            let th = std::f64::consts::PI * i as f64 / points as f64;
            sigma_max(&gain_at(a, b, c, Complex::from_polar(1.0, th)))
        })
        .fold(0.0, f64::max)
}

/// Symmetric eigenvalues, ascending.
pub fn sym_eigs(m: &Mat) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Random similarity `I + s·E` with entries of E in [-1, 1].
fn similarity(n: usize, entries: &[f64], scale: f64) -> Mat {
    Mat::identity(n, n) + Mat::from_fn(n, n, |i, j| scale * entries[i * 4 + j])
}

fn block_diag(blocks: &[Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(b);
        at += k;
    }
    out
}

/// Semi-simple A with unit-circle spectrum (rotations and ±1 under a random
/// similarity), plus a random B. Pairs may be unreachable; callers filter.
pub fn semisimple_pair() -> impl Strategy<Value = (Mat, Mat)> {
    (
        1usize..=4,
        1usize..=2,
        prop::collection::vec(0.2f64..2.9, 2),
        prop::collection::vec(prop::bool::ANY, 4),
        prop::collection::vec(-1.0f64..1.0, 16),
        prop::collection::vec(-1.0f64..1.0, 8),
        prop::bool::ANY,
    )
        .prop_map(|(n, m, angles, signs, t, bv, prefer_rot)| {
            let mut blocks = Vec::new();
            let mut size = 0;
            let mut r = 0;
            while size < n {
                if n - size >= 2 && (prefer_rot || r == 0) && r < 2 {
                    blocks.push(rotation(angles[r]));
                    r += 1;
                    size += 2;
                } else {
                    let s = if signs[size] { 1.0 } else { -1.0 };
                    blocks.push(Mat::from_element(1, 1, s));
                    size += 1;
                }
            }
            let j = block_diag(&blocks);
            let t = similarity(n, &t, 0.3);
            let t_inv = t.clone().try_inverse().expect("near-identity similarity");
            let a = &t * j * t_inv;
            let b = Mat::from_fn(n, m, |i, k| bv[i * 2 + k]);
            (a, b)
        })
}

/// A with a Jordan chain on the unit circle (at 1, at -1, or a repeated
/// rotation), plus a random B.
pub fn jordan_pair() -> impl Strategy<Value = (Mat, Mat)> {
    (
        2usize..=4,
        1usize..=2,
        0u8..3,
        0.3f64..2.8,
        prop::collection::vec(-1.0f64..1.0, 16),
        prop::collection::vec(-1.0f64..1.0, 8),
    )
        .prop_map(|(n, m, kind, theta, t, bv)| {
            let j = match kind {
                0 | 1 if true => {
                    let lambda = if kind == 0 { 1.0 } else { -1.0 };
                    let mut j = Mat::identity(n, n) * lambda;
                    for i in 0..n - 1 {
                        j[(i, i + 1)] = 1.0;
                    }
                    j
                }
                _ => {
                    if n == 4 {
                        let mut j = block_diag(&[rotation(theta), rotation(theta)]);
                        j[(0, 2)] = 1.0;
                        j[(1, 3)] = 1.0;
                        j
                    } else {
                        let mut j = Mat::identity(n, n);
                        j[(0, 1)] = 1.0;
                        j
                    }
                }
            };
            let t = similarity(n, &t, 0.3);
            let t_inv = t.clone().try_inverse().expect("near-identity similarity");
            let a = &t * j * t_inv;
            let b = Mat::from_fn(n, m, |i, k| bv[i * 2 + k]);
            (a, b)
        })
}

/// Random symmetric Laplacian on `n` nodes from edge gains in `[0, 1]`
/// (a gain below 0.3 drops the edge).
pub fn symmetric_laplacian(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |g| {
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = g[i * n + j];
                if w >= 0.3 {
                    l[(i, j)] = -w;
                    l[(j, i)] = -w;
                }
            }
        }
        for i in 0..n {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
            l[(i, i)] = -s;
        }
        l
    })
}

/// Random directed Laplacian on `n` nodes.
pub fn directed_laplacian(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |g| {
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && g[i * n + j] >= 0.5 {
                    l[(i, j)] = -g[i * n + j];
                }
            }
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
            l[(i, i)] = -s;
        }
        l
    })
}
