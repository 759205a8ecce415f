//! Feedback gain design.
//!
//! Semi-simple A (neutrally stable agents) uses `F = B'XA` with `X = A'XA`,
//! `I - B'XB ⪰ 0`. General unit-circle A (neutrally unstable agents) uses the
//! γ-parametrised Riccati equation
//! `X = A'X[I + (1-γ⁻²)BB'X]⁻¹A + ε_γ I` and
//! `F = [I + (1-γ⁻²)B'XB]⁻¹B'XA`.

use crate::analysis::closed_loop_hinf;
use crate::dynamics::{validate_assumption_a, AgentDynamics};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::tolerances::Tolerances;

pub use crate::dynamics::mahler_measure;

/// Linear solves inside the Riccati iteration refuse matrices worse than this.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct StableGainCertificate {
    pub x: Mat,
    pub rho: f64,
    pub f: Mat,
    /// Similarity with `S_a A S_a⁻¹` orthogonal; `X = ρ S_a'S_a`.
    pub s_a: Mat,
    /// Spectral radius of `A - BF`.
    pub schur_radius: f64,
    /// `λ_min(I - B'XB)`.
    pub slack: f64,
    /// `max |A'XA - X|`.
    pub lyapunov_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnstableGainCertificate {
    pub gamma: f64,
    pub eps_gamma: f64,
    pub x: Mat,
    pub f: Mat,
    pub hinf_tf: f64,
    /// `λ_min(γ²I - B'XB)`.
    pub gain_margin: f64,
    pub schur_radius: f64,
    pub iterations: usize,
    /// `max |X - A'X[I + (1-γ⁻²)BB'X]⁻¹A - ε_γ I|`.
    pub are_residual: f64,
    /// Iterations where `X_{j+1} - X_j` had a negative eigenvalue.
    pub monotonicity_violations: usize,
}

/// The gain a pipeline runs with.
#[derive(Debug, Clone, PartialEq)]
pub enum GainCertificate {
    Stable(StableGainCertificate),
    Unstable(UnstableGainCertificate),
    Explicit(Mat),
}

impl GainCertificate {
    pub fn gain(&self) -> &Mat {
        match self {
            GainCertificate::Stable(c) => &c.f,
            GainCertificate::Unstable(c) => &c.f,
            GainCertificate::Explicit(f) => f,
        }
    }
}

/// Column-major vectorization of `Y ↦ A'YA`.
fn congruence_operator(a: &Mat) -> Mat {
    let at = a.transpose();
    linalg::kron(&at, &at)
}

/// Ergodic average of the identity under `Y ↦ A'YA`, i.e. the component of
/// `I` in `ker(𝒜 - 1)` along `range(𝒜 - 1)`. For a semi-simple A with
/// unit-circle spectrum this is a positive-definite solution of `X = A'XA`.
fn invariant_metric(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let nn = n * n;
    let m = Mat::identity(nn, nn) - congruence_operator(a);
    // measured against the scale of I and A'⊗A', not of their difference
    let scale = 1.0 + linalg::max_singular_value(a).powi(2);
    let kernel = linalg::null_space_abs(&m, 1e-9 * scale);
    let d = kernel.ncols();
    let mut system = Mat::zeros(nn, d + nn);
    system.view_mut((0, 0), (nn, d)).copy_from(&kernel);
    system.view_mut((0, d), (nn, nn)).copy_from(&m);
    let rhs = Mat::identity(n, n).reshape_generic(nalgebra::Dyn(nn), nalgebra::Dyn(1));
    let sol = system
        .svd(true, true)
        .solve(&rhs, 1e-10)
        .map_err(|_| Error::NormalizationFailure { deviation: f64::INFINITY })?;
    let coeffs = sol.rows(0, d).into_owned();
    let x0 = (kernel * coeffs).reshape_generic(nalgebra::Dyn(n), nalgebra::Dyn(n));
    Ok(linalg::symmetrize(&x0))
}

/// Stable-case design: `X = ρ S_a'S_a`, `ρ = min(1, 1/λ_max(B'S_a'S_aB))`,
/// `F = B'XA`.
pub fn design_stable_gain(dynamics: &AgentDynamics, tol: &Tolerances) -> Result<StableGainCertificate> {
    let class = validate_assumption_a(dynamics, tol.spec, tol.jordan)?;
    if !class.semi_simple {
        let z = crate::dynamics::defective_eigenvalue(dynamics.a(), tol.jordan)
            .unwrap_or_default();
        return Err(Error::NotSemiSimple { re: z.re, im: z.im });
    }
    let (a, b) = (dynamics.a(), dynamics.b());
    let n = dynamics.n();
    let x0 = invariant_metric(a)?;
    let chol = x0
        .clone()
        .cholesky()
        .ok_or(Error::NormalizationFailure { deviation: f64::INFINITY })?;
    let s_a = chol.l().transpose();
    let s_inv = s_a
        .clone()
        .try_inverse()
        .ok_or(Error::NormalizationFailure { deviation: f64::INFINITY })?;
    let q = &s_a * a * s_inv;
    let deviation = linalg::max_abs(&(q.transpose() * &q - Mat::identity(n, n)));
    if deviation > 1e-8 {
        return Err(Error::NormalizationFailure { deviation });
    }
    let rho = (1.0 / linalg::max_sym_eig(&(b.transpose() * &x0 * b))).min(1.0);
    let x = x0 * rho;
    let f = b.transpose() * &x * a;
    let a_cl = a - b * &f;
    let m = dynamics.m();
    Ok(StableGainCertificate {
        schur_radius: linalg::spectral_radius(&a_cl),
        slack: linalg::min_sym_eig(&(Mat::identity(m, m) - b.transpose() * &x * b)),
        lyapunov_residual: linalg::max_abs(&(a.transpose() * &x * a - &x)),
        x,
        rho,
        f,
        s_a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    pub max_iter: usize,
    /// Stop when `max |X_{j+1} - X_j|` drops to `tol * max(1, max |X_j|)`.
    /// Relative, since rounding alone keeps the step near `eps * |X|`.
    pub tol: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            max_iter: 1_000_000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub x: Mat,
    pub iterations: usize,
    pub last_step: f64,
    pub monotonicity_violations: usize,
}

fn riccati_map(a: &Mat, bbt: &Mat, x: &Mat, coupling: f64, eps: f64) -> Result<Mat> {
    let n = a.nrows();
    let lhs = Mat::identity(n, n) + bbt * x * coupling;
    let y = linalg::solve_guarded(&lhs, a, CONDITION_LIMIT)?;
    Ok(linalg::symmetrize(&(a.transpose() * x * y)) + Mat::identity(n, n) * eps)
}

/// Fixed-point iteration `X_{j+1} = A'X_j[I + (1-γ⁻²)BB'X_j]⁻¹A + ε_γ I`
/// from `X₀ = ε_γ I`.
pub fn solve_gamma_riccati(
    dynamics: &AgentDynamics,
    gamma: f64,
    eps_gamma: f64,
    opts: RiccatiOptions,
) -> Result<RiccatiSolution> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidInput(format!("gamma must be > 1, got {gamma}")));
    }
    if !(eps_gamma > 0.0) {
        return Err(Error::InvalidInput(format!("eps_gamma must be > 0, got {eps_gamma}")));
    }
    let (a, b) = (dynamics.a(), dynamics.b());
    let n = dynamics.n();
    let bbt = b * b.transpose();
    let coupling = 1.0 - gamma.powi(-2);
    let mut x = Mat::identity(n, n) * eps_gamma;
    let mut last_step = f64::INFINITY;
    let mut monotonicity_violations = 0;
    for it in 1..=opts.max_iter {
        let next = riccati_map(a, &bbt, &x, coupling, eps_gamma)?;
        let diff = &next - &x;
        last_step = linalg::max_abs(&diff);
        if !last_step.is_finite() {
            break;
        }
        if linalg::min_sym_eig(&diff) < -1e-10 * linalg::max_abs(&next).max(1.0) {
            monotonicity_violations += 1;
        }
        x = next;
        if last_step <= opts.tol * linalg::max_abs(&x).max(1.0) {
            return Ok(RiccatiSolution {
                x,
                iterations: it,
                last_step,
                monotonicity_violations,
            });
        }
    }
    Err(Error::AreDiverged {
        iterations: opts.max_iter,
        last_step,
    })
}

/// `F = [I + (1-γ⁻²)B'XB]⁻¹B'XA`.
pub fn gamma_gain(dynamics: &AgentDynamics, x: &Mat, gamma: f64) -> Result<Mat> {
    let (a, b) = (dynamics.a(), dynamics.b());
    let m = dynamics.m();
    let btx = b.transpose() * x;
    let lhs = Mat::identity(m, m) + &btx * b * (1.0 - gamma.powi(-2));
    linalg::solve_guarded(&lhs, &(btx * a), CONDITION_LIMIT)
}

/// Unstable-case design with full certificate.
///
/// Bound violations (`B'XB ⊀ γ²I`, `‖T_F‖ ≥ γ`) are returned as errors that
/// carry the computed certificate.
pub fn design_unstable_gain(
    dynamics: &AgentDynamics,
    gamma: f64,
    eps_gamma: f64,
    opts: RiccatiOptions,
    tol: &Tolerances,
) -> Result<UnstableGainCertificate> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidInput(format!("gamma must be > 1, got {gamma}")));
    }
    validate_assumption_a(dynamics, tol.spec, tol.jordan)?;
    let sol = solve_gamma_riccati(dynamics, gamma, eps_gamma, opts)?;
    let (a, b) = (dynamics.a(), dynamics.b());
    let x = sol.x;
    let f = gamma_gain(dynamics, &x, gamma)?;
    let schur_radius = linalg::spectral_radius(&(a - b * &f));
    if schur_radius >= 1.0 {
        return Err(Error::NotStabilizing {
            spectral_radius: schur_radius,
        });
    }
    let hinf_tf = closed_loop_hinf(dynamics, &f, tol.hinf)?;
    let n = dynamics.n();
    let m = dynamics.m();
    let bxb = b.transpose() * &x * b;
    let are_residual = {
        let y = linalg::solve_guarded(
            &(Mat::identity(n, n) + b * b.transpose() * &x * (1.0 - gamma.powi(-2))),
            a,
            CONDITION_LIMIT,
        )?;
        linalg::max_abs(&(&x - a.transpose() * &x * y - Mat::identity(n, n) * eps_gamma))
    };
    let cert = UnstableGainCertificate {
        gamma,
        eps_gamma,
        gain_margin: linalg::min_sym_eig(&(Mat::identity(m, m) * (gamma * gamma) - &bxb)),
        x,
        f,
        hinf_tf,
        schur_radius,
        iterations: sol.iterations,
        are_residual,
        monotonicity_violations: sol.monotonicity_violations,
    };
    if cert.gain_margin <= 0.0 {
        return Err(Error::GainBoundViolated {
            max_eig: linalg::max_sym_eig(&bxb),
            bound: gamma * gamma,
            certificate: Box::new(cert),
        });
    }
    if cert.hinf_tf >= gamma {
        return Err(Error::HinfBoundViolated {
            hinf: cert.hinf_tf,
            gamma,
            certificate: Box::new(cert),
        });
    }
    Ok(cert)
}

/// Rank of the observability matrix `[F; FA; …; FA^{n-1}]`.
pub fn observability_rank(a: &Mat, f: &Mat) -> usize {
    let ot = linalg::reachability_matrix(&a.transpose(), &f.transpose(), a.nrows());
    linalg::rank(&ot, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn rotation_example() {
        let c = FRAC_PI_4.cos();
        let s = FRAC_PI_4.sin();
        let a = Mat::from_row_slice(2, 2, &[c, s, -s, c]);
        let b = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let cert = design_stable_gain(&AgentDynamics::new(a, b).unwrap(), &Tolerances::default()).unwrap();
        assert!(linalg::max_abs(&(&cert.x - Mat::identity(2, 2))) < 1e-12);
        assert_eq!(cert.rho, 1.0);
        assert!((cert.f[(0, 0)] + s).abs() < 1e-12 && (cert.f[(0, 1)] - c).abs() < 1e-12);
        assert!(cert.schur_radius < 1.0);
    }

    #[test]
    fn scalar_case() {
        let d = AgentDynamics::new(Mat::identity(1, 1), Mat::identity(1, 1)).unwrap();
        let cert = design_stable_gain(&d, &Tolerances::default()).unwrap();
        assert!((cert.x[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((cert.f[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(cert.schur_radius < 1e-12);
        assert!(cert.slack.abs() < 1e-12);
    }

    #[test]
    fn non_orthogonal_semi_simple() {
        // T R T^{-1} with a non-orthogonal T, plus a -1 mode
        let th: f64 = 1.1;
        let mut r = Mat::zeros(3, 3);
        r[(0, 0)] = th.cos();
        r[(0, 1)] = -th.sin();
        r[(1, 0)] = th.sin();
        r[(1, 1)] = th.cos();
        r[(2, 2)] = -1.0;
        let t = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 0.5, 0.3, 0.0, 1.0]);
        let a = &t * r * t.clone().try_inverse().unwrap();
        let b = Mat::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        let cert = design_stable_gain(&AgentDynamics::new(a, b).unwrap(), &Tolerances::default()).unwrap();
        assert!(cert.lyapunov_residual < 1e-10);
        assert!(cert.slack >= -1e-12);
        assert!(cert.schur_radius < 1.0);
    }

    #[test]
    fn jordan_rejected_by_stable_design() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            design_stable_gain(&AgentDynamics::new(a, b).unwrap(), &Tolerances::default()),
            Err(Error::NotSemiSimple { .. })
        ));
    }

    #[test]
    fn gamma_must_exceed_one() {
        let d = AgentDynamics::new(Mat::identity(1, 1), Mat::identity(1, 1)).unwrap();
        let tol = Tolerances::default();
        assert!(matches!(
            design_unstable_gain(&d, 1.0, 1e-5, RiccatiOptions::default(), &tol),
            Err(Error::InvalidInput(_))
        ));
        assert!(design_unstable_gain(&d, 1.5, 0.0, RiccatiOptions::default(), &tol).is_err());
    }

    #[test]
    fn iteration_budget_exhaustion_is_reported() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let d = AgentDynamics::new(a, b).unwrap();
        let opts = RiccatiOptions { max_iter: 3, tol: 1e-12 };
        assert!(matches!(
            solve_gamma_riccati(&d, 1.1, 1e-5, opts),
            Err(Error::AreDiverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn semi_simple_with_large_gamma() {
        let th: f64 = 0.9;
        let a = Mat::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let b = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let cert = design_unstable_gain(
            &AgentDynamics::new(a, b).unwrap(),
            10.0,
            1e-4,
            RiccatiOptions::default(),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(cert.schur_radius < 1.0);
        assert!(cert.are_residual < 1e-10);
        assert!(cert.gain_margin > 0.0);
        assert!(cert.hinf_tf < 10.0);
    }
}
