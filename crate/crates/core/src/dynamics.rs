//! Single-agent dynamics `x⁺ = Ax + Bu`, spectral checks, the disagreement
//! reduction basis and the blockwise global closed-loop step.

use nalgebra::{Complex, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Eigenvalues closer than this (relative) are treated as one cluster when
/// testing semi-simplicity. A Jordan block of size k splits its eigenvalue by
/// roughly `eps^(1/k)` under roundoff, so this has to be loose.
const CLUSTER_TOL: f64 = 1e-4;

/// The pair (A, B) shared by every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDynamics {
    a: Mat,
    b: Mat,
}

impl AgentDynamics {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        if a.nrows() == 0 || !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B must be {}xm with m >= 1, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("A and B must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    /// State dimension n.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension m.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

/// Spectral facts about A used to pick a gain design.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralClassification {
    pub eigenvalues: Vec<Complex<f64>>,
    pub semi_simple: bool,
    pub mahler_measure: f64,
    pub controllability_index: usize,
}

/// `M(A) = ∏ max(1, |λᵢ|)`.
pub fn mahler_measure(a: &Mat) -> f64 {
    linalg::eigenvalues(a)
        .iter()
        .map(|z| z.norm().max(1.0))
        .product()
}

/// Smallest `d` with `rank [B AB … A^{d-1}B] = n`, if any.
pub fn controllability_index(a: &Mat, b: &Mat) -> Option<usize> {
    let n = a.nrows();
    (1..=n).find(|&d| linalg::rank(&linalg::reachability_matrix(a, b, d), 1e-10) == n)
}

struct Cluster {
    center: Complex<f64>,
    count: usize,
}

fn cluster_eigenvalues(eigs: &[Complex<f64>]) -> Vec<Cluster> {
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    for &z in eigs {
        let scale = z.norm().max(1.0);
        match clusters
            .iter_mut()
            .find(|(c, k)| (c / *k as f64 - z).norm() < CLUSTER_TOL * scale)
        {
            Some((sum, k)) => {
                *sum += z;
                *k += 1;
            }
            None => clusters.push((z, 1)),
        }
    }
    clusters
        .into_iter()
        .map(|(sum, k)| Cluster {
            center: sum / k as f64,
            count: k,
        })
        .collect()
}

fn nullity(m: &Mat, abs_tol: f64) -> usize {
    linalg::singular_values(m)
        .iter()
        .filter(|&&s| s <= abs_tol)
        .count()
}

/// Returns the first non-semi-simple eigenvalue, if any.
///
/// Eigenvalues come from the real Schur form. For every cluster the geometric
/// multiplicity is read off the nullity of `A - λI` (real λ) or of the real
/// quadratic factor `A² - 2Re(λ)A + |λ|²I` (complex pairs).
pub fn defective_eigenvalue(a: &Mat, tol_jordan: f64) -> Option<Complex<f64>> {
    let n = a.nrows();
    let norm_a = linalg::max_singular_value(a).max(1.0);
    let eye = Mat::identity(n, n);
    for c in cluster_eigenvalues(&linalg::eigenvalues(a)) {
        let lam = c.center;
        let scale = lam.norm().max(1.0);
        if lam.im.abs() <= CLUSTER_TOL * scale {
            let shifted = a - &eye * lam.re;
            if nullity(&shifted, tol_jordan * norm_a) < c.count {
                return Some(Complex::new(lam.re, 0.0));
            }
        } else if lam.im > 0.0 {
            let quad = a * a - a * (2.0 * lam.re) + &eye * lam.norm_sqr();
            if nullity(&quad, tol_jordan * norm_a * norm_a) < 2 * c.count {
                return Some(lam);
            }
        }
    }
    None
}

/// Check that every eigenvalue of A lies on the unit circle and that (A, B)
/// is reachable, then classify the spectrum.
pub fn validate_assumption_a(
    dynamics: &AgentDynamics,
    tol_spec: f64,
    tol_jordan: f64,
) -> Result<SpectralClassification> {
    let a = dynamics.a();
    let eigenvalues = linalg::eigenvalues(a);
    if let Some(z) = eigenvalues
        .iter()
        .find(|z| (z.norm() - 1.0).abs() > tol_spec)
    {
        return Err(Error::NotUnitCircle {
            re: z.re,
            im: z.im,
            modulus: z.norm(),
            tol: tol_spec,
        });
    }
    let n = dynamics.n();
    let controllability_index = controllability_index(a, dynamics.b()).ok_or_else(|| {
        Error::NotReachable {
            rank: linalg::rank(&linalg::reachability_matrix(a, dynamics.b(), n), 1e-10),
            n,
        }
    })?;
    Ok(SpectralClassification {
        semi_simple: defective_eigenvalue(a, tol_jordan).is_none(),
        mahler_measure: mahler_measure(a),
        controllability_index,
        eigenvalues,
    })
}

/// Orthonormal basis `V = [1/√N, V̂]` splitting agreement from disagreement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionBasis {
    v: Mat,
}

impl ReductionBasis {
    /// Householder completion: `V = I - 2ww'/(w'w)` with `w = e₁ - 1/√N`, so
    /// the first column is exactly the normalized ones vector.
    pub fn householder(n_agents: usize) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::InvalidInput(format!(
                "reduction needs N >= 2 agents, got {n_agents}"
            )));
        }
        let v1 = DVector::from_element(n_agents, 1.0 / (n_agents as f64).sqrt());
        let mut w = -v1;
        w[0] += 1.0;
        let h = Mat::identity(n_agents, n_agents) - (&w * w.transpose()) * (2.0 / w.norm_squared());
        Ok(Self { v: h })
    }

    /// Use a caller-chosen orthonormal complement `V̂` (N×(N-1)), which must be
    /// orthogonal to the ones vector.
    pub fn from_complement(vhat: Mat, tol_orth: f64) -> Result<Self> {
        let n_agents = vhat.nrows();
        if n_agents < 2 || vhat.ncols() + 1 != n_agents {
            return Err(Error::DimensionMismatch(format!(
                "complement must be N x (N-1), got {}x{}",
                vhat.nrows(),
                vhat.ncols()
            )));
        }
        let mut v = Mat::zeros(n_agents, n_agents);
        v.column_mut(0)
            .fill(1.0 / (n_agents as f64).sqrt());
        v.view_mut((0, 1), (n_agents, n_agents - 1)).copy_from(&vhat);
        let dev = linalg::max_abs(&(v.transpose() * &v - Mat::identity(n_agents, n_agents)));
        if dev > tol_orth {
            return Err(Error::InvalidInput(format!(
                "[1/sqrt(N), Vhat] is not orthonormal (max deviation {dev:e})"
            )));
        }
        Ok(Self { v })
    }

    pub fn n_agents(&self) -> usize {
        self.v.nrows()
    }

    pub fn v(&self) -> &Mat {
        &self.v
    }

    /// Columns 2..N of V.
    pub fn vhat(&self) -> Mat {
        self.v.columns(1, self.v.ncols() - 1).into_owned()
    }

    /// `x̂ = (V̂' ⊗ I_n) x`.
    pub fn disagreement(&self, x: &DVector<f64>, n: usize) -> DVector<f64> {
        let vhat = self.vhat();
        let nm1 = vhat.ncols();
        let mut out = DVector::zeros(nm1 * n);
        for j in 0..nm1 {
            let mut acc = DVector::zeros(n);
            for i in 0..self.n_agents() {
                acc += x.rows(i * n, n) * vhat[(i, j)];
            }
            out.rows_mut(j * n, n).copy_from(&acc);
        }
        out
    }

    /// Global state `(V̂ ⊗ I_n) x̂` with zero agreement component.
    pub fn lift(&self, xhat: &DVector<f64>, n: usize) -> DVector<f64> {
        let vhat = self.vhat();
        let mut out = DVector::zeros(self.n_agents() * n);
        for i in 0..self.n_agents() {
            let mut acc = DVector::zeros(n);
            for j in 0..vhat.ncols() {
                acc += xhat.rows(j * n, n) * vhat[(i, j)];
            }
            out.rows_mut(i * n, n).copy_from(&acc);
        }
        out
    }
}

/// Default reduction basis for `n_agents` agents.
pub fn build_reduction(n_agents: usize) -> Result<ReductionBasis> {
    ReductionBasis::householder(n_agents)
}

fn check_step_dims(
    x: &DVector<f64>,
    laplacian: &Mat,
    dynamics: &AgentDynamics,
    gain: &Mat,
) -> Result<usize> {
    let n_agents = laplacian.nrows();
    if !laplacian.is_square() {
        return Err(Error::DimensionMismatch("Laplacian must be square".into()));
    }
    if x.len() != n_agents * dynamics.n() {
        return Err(Error::DimensionMismatch(format!(
            "state has length {}, expected N*n = {}",
            x.len(),
            n_agents * dynamics.n()
        )));
    }
    if gain.shape() != (dynamics.m(), dynamics.n()) {
        return Err(Error::DimensionMismatch(format!(
            "gain must be {}x{}, got {}x{}",
            dynamics.m(),
            dynamics.n(),
            gain.nrows(),
            gain.ncols()
        )));
    }
    Ok(n_agents)
}

/// Protocol inputs `uᵢ = -μ F Σⱼ Lᵢⱼ xⱼ`, stacked agent by agent.
///
/// Evaluated as `Σ_{j≠i} Lᵢⱼ (F xⱼ - F xᵢ)`, equal for zero row sums, so that
/// agents in agreement produce exactly zero input.
pub fn agent_inputs(
    x: &DVector<f64>,
    laplacian: &Mat,
    dynamics: &AgentDynamics,
    gain: &Mat,
    mu: f64,
) -> Result<DVector<f64>> {
    let n_agents = check_step_dims(x, laplacian, dynamics, gain)?;
    let (n, m) = (dynamics.n(), dynamics.m());
    let fx: Vec<DVector<f64>> = (0..n_agents).map(|j| gain * x.rows(j * n, n)).collect();
    let mut u = DVector::zeros(n_agents * m);
    for i in 0..n_agents {
        let mut acc = DVector::zeros(m);
        for (j, fxj) in fx.iter().enumerate() {
            let l = laplacian[(i, j)];
            if j != i && l != 0.0 {
                acc += (fxj - &fx[i]) * l;
            }
        }
        u.rows_mut(i * m, m).copy_from(&(acc * -mu));
    }
    Ok(u)
}

/// One step of `x⁺ = [I_N ⊗ A - μ L ⊗ (BF)] x`, evaluated agent by agent.
pub fn global_step(
    x: &DVector<f64>,
    laplacian: &Mat,
    dynamics: &AgentDynamics,
    gain: &Mat,
    mu: f64,
) -> Result<DVector<f64>> {
    let u = agent_inputs(x, laplacian, dynamics, gain, mu)?;
    let (n, m) = (dynamics.n(), dynamics.m());
    let mut out = DVector::zeros(x.len());
    for i in 0..laplacian.nrows() {
        let xi = dynamics.a() * x.rows(i * n, n) + dynamics.b() * u.rows(i * m, m);
        out.rows_mut(i * n, n).copy_from(&xi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn rotation(theta: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[theta.cos(), theta.sin(), -theta.sin(), theta.cos()])
    }

    #[test]
    fn rotation_is_semi_simple_with_index_two() {
        let dynamics = AgentDynamics::new(rotation(FRAC_PI_4), Mat::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let c = validate_assumption_a(&dynamics, 1e-8, 1e-8).unwrap();
        assert!(c.semi_simple);
        assert_eq!(c.controllability_index, 2);
        assert!((c.mahler_measure - 1.0).abs() < 1e-12);
        for z in &c.eigenvalues {
            assert!((z.re - FRAC_PI_4.cos()).abs() < 1e-12);
            assert!((z.im.abs() - FRAC_PI_4.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_identity() {
        let d = AgentDynamics::new(Mat::identity(1, 1), Mat::identity(1, 1)).unwrap();
        let c = validate_assumption_a(&d, 1e-8, 1e-8).unwrap();
        assert!(c.semi_simple);
        assert_eq!(c.controllability_index, 1);
        assert_eq!(c.mahler_measure, 1.0);
    }

    #[test]
    fn jordan_block_is_not_semi_simple() {
        let a = Mat::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let b = Mat::from_column_slice(3, 1, &[-1.0, 1.0, -1.0]);
        let c = validate_assumption_a(&AgentDynamics::new(a, b).unwrap(), 1e-8, 1e-8).unwrap();
        assert!(!c.semi_simple);
        assert_eq!(c.controllability_index, 3);
        assert!((c.mahler_measure - 1.0).abs() < 1e-8);
    }

    #[test]
    fn repeated_rotation_blocks() {
        // diag(R, R): semi-simple repeated complex pair
        let r = rotation(0.3);
        let mut a = Mat::zeros(4, 4);
        a.view_mut((0, 0), (2, 2)).copy_from(&r);
        a.view_mut((2, 2), (2, 2)).copy_from(&r);
        assert!(defective_eigenvalue(&a, 1e-8).is_none());
        // [[R, I], [0, R]] is defective
        a.view_mut((0, 2), (2, 2)).copy_from(&Mat::identity(2, 2));
        assert!(defective_eigenvalue(&a, 1e-8).is_some());
        // repeated real eigenvalue -1 with identity block
        assert!(defective_eigenvalue(&(-Mat::identity(3, 3)), 1e-8).is_none());
    }

    #[test]
    fn off_circle_and_unreachable_are_rejected() {
        let a = Mat::from_row_slice(2, 2, &[1.01, 0.0, 0.0, 1.0]);
        let b = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            validate_assumption_a(&AgentDynamics::new(a, b.clone()).unwrap(), 1e-8, 1e-8),
            Err(Error::NotUnitCircle { .. })
        ));
        let a = Mat::identity(2, 2);
        assert!(matches!(
            validate_assumption_a(&AgentDynamics::new(a, b).unwrap(), 1e-8, 1e-8),
            Err(Error::NotReachable { rank: 1, n: 2 })
        ));
    }

    #[test]
    fn mahler_examples() {
        assert!((mahler_measure(&Mat::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]))) - 2.0).abs() < 1e-12);
        assert!((mahler_measure(&(rotation(0.7) * 1.5)) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn householder_basis() {
        let b2 = build_reduction(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((b2.v()[(0, 0)] - s).abs() < 1e-15 && (b2.v()[(1, 0)] - s).abs() < 1e-15);
        assert!((b2.v()[(0, 1)].abs() - s).abs() < 1e-15);
        assert!((b2.v()[(0, 1)] + b2.v()[(1, 1)]).abs() < 1e-15);
        for n in 2..9 {
            let b = build_reduction(n).unwrap();
            let dev = linalg::max_abs(&(b.v().transpose() * b.v() - Mat::identity(n, n)));
            assert!(dev < 1e-12);
            assert_eq!(b, build_reduction(n).unwrap());
        }
        assert!(build_reduction(1).is_err());
    }

    #[test]
    fn complement_validation() {
        let vhat = build_reduction(3).unwrap().vhat();
        assert!(ReductionBasis::from_complement(vhat, 1e-10).is_ok());
        let bad = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(ReductionBasis::from_complement(bad, 1e-10).is_err());
    }

    #[test]
    fn zero_coupling_step() {
        let a = rotation(0.4);
        let d = AgentDynamics::new(a.clone(), Mat::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let f = Mat::from_row_slice(1, 2, &[0.3, -0.2]);
        let x = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let next = global_step(&x, &Mat::zeros(3, 3), &d, &f, 0.5).unwrap();
        for i in 0..3 {
            let expect = &a * x.rows(2 * i, 2);
            assert!((next.rows(2 * i, 2) - expect).norm() < 1e-15);
        }
        assert!(global_step(&x, &Mat::zeros(2, 2), &d, &f, 0.5).is_err());
    }

    #[test]
    fn lift_inverts_disagreement() {
        let basis = build_reduction(4).unwrap();
        let xhat = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        let x = basis.lift(&xhat, 2);
        assert!((basis.disagreement(&x, 2) - xhat).norm() < 1e-13);
    }
}
