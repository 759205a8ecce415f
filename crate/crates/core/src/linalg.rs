//! Dense linear-algebra helpers shared by the analysis modules.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. The matrices in this
//! problem are desk scale (a few dozen rows at most), so the helpers favour
//! clarity over blocking or in-place tricks.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
            }
        }
    }
    out
}

/// `I_k ⊗ a`, a block-diagonal stack of `k` copies of `a`.
pub fn block_diag_repeat(k: usize, a: &Mat) -> Mat {
    let (r, c) = a.shape();
    let mut out = Mat::zeros(k * r, k * c);
    for i in 0..k {
        out.view_mut((i * r, i * c), (r, c)).copy_from(a);
    }
    out
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn eigenvalues(a: &Mat) -> Vec<Complex<f64>> {
    a.clone().complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn max_singular_value(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Largest singular value of a complex matrix.
pub fn max_singular_value_c(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Numerical rank: singular values above `rel_tol * σ_max` (and above
/// `abs_floor`) are counted.
pub fn rank(m: &Mat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// 2-norm condition number.
pub fn condition_number(m: &Mat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Solve `a x = b` by LU with a condition-number guard.
pub fn solve_guarded(a: &Mat, b: &Mat, cond_limit: f64) -> Result<Mat> {
    let cond = condition_number(a);
    if !(cond <= cond_limit) {
        return Err(Error::IllConditioned {
            cond,
            limit: cond_limit,
        });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::IllConditioned {
            cond: f64::INFINITY,
            limit: cond_limit,
        })
}

/// Ascending eigenvalues and matching eigenvectors of a symmetric matrix.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = symmetrize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_sym_eig(m: &Mat) -> f64 {
    sym_eigen(m).0.first().copied().unwrap_or(0.0)
}

pub fn max_sym_eig(m: &Mat) -> f64 {
    sym_eigen(m).0.last().copied().unwrap_or(0.0)
}

/// Orthonormal basis (columns) for the range of a symmetric PSD matrix `den`
/// scaled by `den^{-1/2}`, keeping eigenvalues above `reg * λ_max`.
/// Returns `None` when the range is empty.
fn whitening_on_range(den: &Mat, reg: f64) -> Option<Mat> {
    let (vals, vecs) = sym_eigen(den);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return None;
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > reg * top).collect();
    let mut r = Mat::zeros(den.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        r.set_column(c, &(vecs.column(i) / vals[i].sqrt()));
    }
    Some(r)
}

/// Extreme generalized Rayleigh quotients `v'Nv / v'Dv` over `v` in the range
/// of the PSD matrix `den`. Returns `(min, max)`, or `None` if `den` is zero.
pub fn generalized_extremes_on_range(num: &Mat, den: &Mat, reg: f64) -> Option<(f64, f64)> {
    let r = whitening_on_range(den, reg)?;
    let reduced = r.transpose() * num * &r;
    let (vals, _) = sym_eigen(&reduced);
    Some((*vals.first()?, *vals.last()?))
}

/// Null space basis (orthonormal columns) of `m`, using singular values
/// below `rel_tol * σ_max` (or all directions when `m` is zero).
pub fn null_space(m: &Mat, rel_tol: f64) -> Mat {
    let top = singular_values(m).first().copied().unwrap_or(0.0);
    null_space_abs(m, rel_tol * top)
}

/// Null space basis (orthonormal columns) of `m`, using singular values
/// at or below the absolute cutoff `abs_tol`.
pub fn null_space_abs(m: &Mat, abs_tol: f64) -> Mat {
    let (r, c) = m.shape();
    // pad to at least square so the SVD exposes the full right basis
    let mut sq = Mat::zeros(r.max(c), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let cols: Vec<DVector<f64>> = (0..c)
        .filter(|&i| svd.singular_values[i] <= abs_tol)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(c, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// `[B, AB, …, A^{k-1}B]`.
pub fn reachability_matrix(a: &Mat, b: &Mat, k: usize) -> Mat {
    let (n, m) = b.shape();
    let mut out = Mat::zeros(n, m * k);
    let mut blk = b.clone();
    for i in 0..k {
        out.view_mut((0, i * m), (n, m)).copy_from(&blk);
        blk = a * blk;
    }
    out
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex::new(v, 0.0))
}

/// Build a matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
