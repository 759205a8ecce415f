//! Consensus certificates: observability gramians, H∞ norms, the ε and δ
//! bounds of the small-gain argument and the two consensus verdicts.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::Complex;

use crate::dynamics::{AgentDynamics, ReductionBasis};
use crate::error::{Error, Result};
use crate::gain_design::GainCertificate;
use crate::graphs::{reduced_laplacian, AssumptionLReport, LaplacianSchedule};
use crate::linalg::{self, kron, CMat, Mat};

/// Number of frequency points in the coarse H∞ sweep over `[0, π]`.
pub const HINF_SWEEP_POINTS: usize = 4096;
/// Peaks of the coarse sweep refined by golden-section search.
pub const HINF_REFINED_PEAKS: usize = 8;

/// `σ̄[C (e^{iθ} I - A)^{-1} B]`.
pub fn frequency_gain(a: &Mat, b: &Mat, c: &Mat, theta: f64) -> f64 {
    let n = a.nrows();
    let z = Complex::from_polar(1.0, theta);
    let mut shifted: CMat = linalg::to_complex(a) * Complex::new(-1.0, 0.0);
    for i in 0..n {
        shifted[(i, i)] += z;
    }
    let rhs = linalg::to_complex(b);
    match shifted.lu().solve(&rhs) {
        Some(x) => linalg::max_singular_value_c(&(linalg::to_complex(c) * x)),
        None => f64::INFINITY,
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > width {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// H∞ norm of `C(zI - A)^{-1}B` together with the peak frequency θ.
///
/// The real-coefficient transfer matrix is swept on `θ ∈ [0, π]`, then the
/// largest local maxima are refined by golden-section search.
pub fn hinf_norm_with_peak(a_cl: &Mat, b: &Mat, c: &Mat, rel_tol: f64) -> Result<(f64, f64)> {
    if !a_cl.is_square() || b.nrows() != a_cl.nrows() || c.ncols() != a_cl.nrows() {
        return Err(Error::DimensionMismatch("state-space (A, B, C) shapes differ".into()));
    }
    let rho = linalg::spectral_radius(a_cl);
    if rho >= 1.0 - 1e-12 {
        return Err(Error::NotSchur { spectral_radius: rho });
    }
    if linalg::max_abs(c) == 0.0 || linalg::max_abs(b) == 0.0 {
        return Ok((0.0, 0.0));
    }
    hinf_sweep(a_cl, b, c, HINF_SWEEP_POINTS, rel_tol)
}

fn hinf_sweep(a: &Mat, b: &Mat, c: &Mat, points: usize, rel_tol: f64) -> Result<(f64, f64)> {
    let step = PI / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|i| frequency_gain(a, b, c, i as f64 * step))
        .collect();
    let mut peaks: Vec<usize> = (0..points)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { grid[i - 1] };
            let right = if i + 1 == points { f64::NEG_INFINITY } else { grid[i + 1] };
            grid[i] >= left && grid[i] >= right
        })
        .collect();
    peaks.sort_by(|&i, &j| grid[j].total_cmp(&grid[i]));
    peaks.truncate(HINF_REFINED_PEAKS);
    let mut best = (0.0, 0.0);
    for &i in &peaks {
        if grid[i] > best.1 {
            best = (i as f64 * step, grid[i]);
        }
        let lo = (i as f64 - 1.0).max(0.0) * step;
        let hi = (i as f64 + 1.0).min((points - 1) as f64) * step;
        // near a peak the gain error is quadratic in the bracket width
        let width = (rel_tol * 1e-4).clamp(1e-13, 1e-6);
        let (theta, val) = golden_max(|t| frequency_gain(a, b, c, t), lo, hi, width);
        if val > best.1 {
            best = (theta, val);
        }
    }
    Ok((best.1, best.0))
}

/// `‖C(zI - A_cl)^{-1}B‖_{H∞}` for a Schur-stable `A_cl`.
pub fn hinf_norm(a_cl: &Mat, b: &Mat, c: &Mat, rel_tol: f64) -> Result<f64> {
    hinf_norm_with_peak(a_cl, b, c, rel_tol).map(|(v, _)| v)
}

/// `T_F(z) = F(zI - A + BF)^{-1}B`.
pub fn closed_loop_hinf(dynamics: &AgentDynamics, gain: &Mat, rel_tol: f64) -> Result<f64> {
    let a_cl = dynamics.a() - dynamics.b() * gain;
    hinf_norm(&a_cl, dynamics.b(), gain, rel_tol)
}

fn check_gain_shape(dynamics: &AgentDynamics, gain: &Mat) -> Result<()> {
    if gain.shape() != (dynamics.m(), dynamics.n()) {
        return Err(Error::DimensionMismatch(format!(
            "gain must be {}x{}, got {}x{}",
            dynamics.m(),
            dynamics.n(),
            gain.nrows(),
            gain.ncols()
        )));
    }
    Ok(())
}

/// Observability gramian over `k = k₀ … k₀+T_o` (inclusive):
///
/// `O = Σ Â'^k F̂' L̂_m(k)' L̂_m(k) F̂ Â^k`, scaled by `output_weight²`.
///
/// With `Â = I⊗A`, `F̂ = I⊗F`, `L̂_m = L̂⊗I_m` each term factors as
/// `(L̂'L̂) ⊗ (A'^k F'F A^k)`, which is what is accumulated. An
/// `output_weight` of 1 gives the plain gramian; passing the coupling μ gives
/// the gramian of the signal `μL̂_m ŷ` actually fed back.
pub fn observability_gramian(
    dynamics: &AgentDynamics,
    gain: &Mat,
    schedule: &LaplacianSchedule,
    basis: &ReductionBasis,
    k0: usize,
    t_o: usize,
    output_weight: f64,
) -> Result<Mat> {
    check_gain_shape(dynamics, gain)?;
    let a = dynamics.a();
    let mut power = a.pow(k0 as u32);
    let n = dynamics.n();
    let nm1 = basis.n_agents() - 1;
    let mut gram = Mat::zeros(nm1 * n, nm1 * n);
    for k in k0..=k0 + t_o {
        let (lhat, _) = reduced_laplacian(schedule.at(k), basis)?;
        let fa = gain * &power;
        gram += kron(&(lhat.transpose() * &lhat), &(fa.transpose() * fa));
        power = a * power;
    }
    Ok(linalg::symmetrize(&gram) * (output_weight * output_weight))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianSample {
    pub k0: usize,
    pub min_eigenvalue: f64,
    pub rank: usize,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub t_o: usize,
    pub samples: Vec<GramianSample>,
    pub weak_verdict: bool,
    pub strong_verdict: bool,
    /// Smallest sampled eigenvalue, the candidate ε_o.
    pub eps_o: f64,
    /// Full dimension `(N-1)n`.
    pub dimension: usize,
    /// True when the k₀ range covered a full schedule period.
    pub exhaustive: bool,
}

/// Window starts to scan: one period for periodic schedules, otherwise
/// `0..=k_scan` (a sampled, not exhaustive, verdict).
pub fn k0_scan_range(schedule: &LaplacianSchedule, k_scan: usize) -> (Range<usize>, bool) {
    match schedule.period() {
        Some(p) => (0..p, true),
        None => (0..k_scan + 1, false),
    }
}

/// Eigenvalues above `dim · ε_mach · λ_max`, the usual floating-point rank.
/// The verdicts use the stricter `tol_pd` threshold instead.
pub fn numerical_rank(sym_eigenvalues: &[f64]) -> usize {
    let max = sym_eigenvalues.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let cutoff = sym_eigenvalues.len() as f64 * f64::EPSILON * max;
    sym_eigenvalues.iter().filter(|&&v| v > cutoff).count()
}

/// Eigen-analysis of `O(k₀, T_o)` for every `k₀` in `k0_range`.
///
/// Weak observability needs every sampled minimum eigenvalue above
/// `tol_pd · trace`; strong observability additionally needs the smallest of
/// them, ε_o, above `tol_pd`.
#[allow(clippy::too_many_arguments)]
pub fn check_observability(
    dynamics: &AgentDynamics,
    gain: &Mat,
    schedule: &LaplacianSchedule,
    basis: &ReductionBasis,
    t_o: usize,
    k0_range: Range<usize>,
    output_weight: f64,
    tol_pd: f64,
) -> Result<ObservabilityReport> {
    let dimension = (basis.n_agents() - 1) * dynamics.n();
    let exhaustive = schedule.period().is_some_and(|p| k0_range.len() >= p);
    let mut samples = Vec::with_capacity(k0_range.len());
    for k0 in k0_range {
        let gram = observability_gramian(dynamics, gain, schedule, basis, k0, t_o, output_weight)?;
        let (vals, _) = linalg::sym_eigen(&gram);
        let trace = gram.trace();
        samples.push(GramianSample {
            k0,
            min_eigenvalue: vals.first().copied().unwrap_or(0.0),
            rank: numerical_rank(&vals),
            trace,
        });
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty k0 range".into()));
    }
    let weak_verdict = samples
        .iter()
        .all(|s| s.trace > 0.0 && s.min_eigenvalue > tol_pd * s.trace);
    let eps_o = samples
        .iter()
        .map(|s| s.min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    Ok(ObservabilityReport {
        t_o,
        strong_verdict: weak_verdict && eps_o > tol_pd,
        weak_verdict,
        eps_o,
        dimension,
        exhaustive,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonEstimate {
    pub epsilon: f64,
    pub argmin_k0: usize,
    pub t_c: usize,
    /// Always "unforced": the bound is certified for ŷ(k) = F̂Â^{k-k₀}x̂(k₀).
    pub signal_class: &'static str,
}

/// Largest ε with `Σ‖L̂_m ŷ‖² ≥ ε Σ‖ŷ‖²` over windows `k₀ … k₀+T_c`, for
/// unforced outputs `ŷ(k) = F̂Â^{k-k₀}x̂(k₀)`.
///
/// Per window this is the smallest generalized eigenvalue of the weighted
/// gramian against the output gramian, restricted to the range of the latter.
pub fn estimate_epsilon(
    dynamics: &AgentDynamics,
    gain: &Mat,
    schedule: &LaplacianSchedule,
    basis: &ReductionBasis,
    t_c: usize,
    k0_range: Range<usize>,
) -> Result<EpsilonEstimate> {
    check_gain_shape(dynamics, gain)?;
    if t_c == 0 {
        return Err(Error::InvalidInput("T_c must be >= 1".into()));
    }
    let a = dynamics.a();
    let nm1 = basis.n_agents() - 1;
    let eye = Mat::identity(nm1, nm1);
    let dim = nm1 * dynamics.n();
    let mut best = (f64::INFINITY, 0);
    for k0 in k0_range {
        let mut num = Mat::zeros(dim, dim);
        let mut out = Mat::zeros(dynamics.n(), dynamics.n());
        let mut power = Mat::identity(dynamics.n(), dynamics.n());
        for k in 0..=t_c {
            let fa = gain * &power;
            let term = fa.transpose() * fa;
            let (lhat, _) = reduced_laplacian(schedule.at(k0 + k), basis)?;
            num += kron(&(lhat.transpose() * lhat), &term);
            out += term;
            power = a * power;
        }
        let den = kron(&eye, &out);
        let (lo, _) = linalg::generalized_extremes_on_range(&num, &den, 1e-12)
            .ok_or(Error::DegenerateDenominator { k0 })?;
        if lo < best.0 {
            best = (lo, k0);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::InvalidInput("empty k0 range".into()));
    }
    Ok(EpsilonEstimate {
        epsilon: best.0.max(0.0),
        argmin_k0: best.1,
        t_c,
        signal_class: "unforced",
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBound {
    /// `√(1 - εμ(μ̄ - μ))`.
    pub analytic: f64,
    /// `max_k σ̄(I - μL̂(k))` over the tested k.
    pub direct: f64,
}

impl DeltaBound {
    /// Both are valid upper bounds; the smaller one is used.
    pub fn best(&self) -> f64 {
        self.analytic.min(self.direct)
    }
}

/// Analytic `δ = √(1 - εμ(μ̄ - μ))` and the direct per-step estimate.
pub fn delta_bound(
    schedule: &LaplacianSchedule,
    basis: &ReductionBasis,
    mu: f64,
    mu_bar: f64,
    epsilon: f64,
    ks: Range<usize>,
) -> Result<DeltaBound> {
    if !(mu > 0.0 && mu < mu_bar) {
        return Err(Error::InvalidInput(format!(
            "need 0 < mu < mu_bar, got mu = {mu}, mu_bar = {mu_bar}"
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let analytic = if epsilon == 0.0 || !mu_bar.is_finite() {
        1.0
    } else {
        (1.0 - epsilon * mu * (mu_bar - mu)).max(0.0).sqrt()
    };
    let nm1 = basis.n_agents() - 1;
    let mut direct = 0.0_f64;
    for k in ks {
        let (lhat, _) = reduced_laplacian(schedule.at(k), basis)?;
        let delta = Mat::identity(nm1, nm1) - lhat * mu;
        direct = direct.max(linalg::max_singular_value(&delta));
    }
    Ok(DeltaBound { analytic, direct })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallGainCertificate {
    pub hinf_tf: f64,
    pub gamma: f64,
    pub epsilon: EpsilonEstimate,
    pub mu: f64,
    pub mu_bar: f64,
    pub delta: DeltaBound,
    /// `γ·δ_analytic`, the quantity bounded by 1 in the theorem.
    pub gamma_delta: f64,
    /// `‖T_F‖·min(δ_analytic, δ_direct)`.
    pub product: f64,
    pub verdict: bool,
}

impl SmallGainCertificate {
    pub fn new(
        hinf_tf: f64,
        gamma: f64,
        epsilon: EpsilonEstimate,
        mu: f64,
        mu_bar: f64,
        delta: DeltaBound,
        tol_margin: f64,
    ) -> Self {
        let product = hinf_tf * delta.best();
        Self {
            hinf_tf,
            gamma,
            mu,
            mu_bar,
            gamma_delta: gamma * delta.analytic,
            product,
            verdict: product < 1.0 - tol_margin,
            delta,
            epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    /// Theorem 2 fails but the direct small-gain product is below one.
    ConservativePass,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::ConservativePass => "conservative-pass",
            Verdict::NotApplicable => "n/a",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inputs to [`consensus_verdict`].
#[derive(Debug, Clone, Copy)]
pub struct CertificateBundle<'a> {
    pub assumption_a: bool,
    pub assumption_l: &'a AssumptionLReport,
    pub gain: &'a GainCertificate,
    pub observability: Option<&'a ObservabilityReport>,
    pub small_gain: Option<&'a SmallGainCertificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusVerdict {
    pub theorem1: Verdict,
    pub theorem2: Verdict,
    /// Individual conditions, `(name, holds)`.
    pub conditions: Vec<(&'static str, bool)>,
}

/// Theorem 1 for the stable-case gain (A, L, weak observability) and
/// Theorem 2 for the unstable-case gain (A, L, ε > 0, ‖T_F‖ < γ, γδ ≤ 1).
pub fn consensus_verdict(bundle: &CertificateBundle<'_>) -> Result<ConsensusVerdict> {
    let a_ok = bundle.assumption_a;
    let l_ok = bundle.assumption_l.holds;
    let mut conditions = vec![("assumption_a", a_ok), ("assumption_l", l_ok)];
    match bundle.gain {
        GainCertificate::Stable(_) => {
            let obs = bundle.observability.ok_or_else(|| {
                Error::ModeMismatch("theorem 1 needs an observability report".into())
            })?;
            conditions.push(("weak_observability", obs.weak_verdict));
            let yes = a_ok && l_ok && obs.weak_verdict;
            Ok(ConsensusVerdict {
                theorem1: if yes { Verdict::Yes } else { Verdict::No },
                theorem2: Verdict::NotApplicable,
                conditions,
            })
        }
        GainCertificate::Unstable(cert) => {
            let sg = bundle.small_gain.ok_or_else(|| {
                Error::ModeMismatch("theorem 2 needs a small-gain certificate".into())
            })?;
            let eps_ok = sg.epsilon.epsilon > 0.0;
            let hinf_ok = sg.hinf_tf < cert.gamma;
            let gd_ok = sg.gamma_delta <= 1.0;
            conditions.push(("epsilon_positive", eps_ok));
            conditions.push(("hinf_below_gamma", hinf_ok));
            conditions.push(("gamma_delta_le_1", gd_ok));
            conditions.push(("direct_small_gain", sg.verdict));
            let theorem2 = if a_ok && l_ok && eps_ok && hinf_ok && gd_ok {
                Verdict::Yes
            } else if a_ok && l_ok && sg.verdict {
                Verdict::ConservativePass
            } else {
                Verdict::No
            };
            Ok(ConsensusVerdict {
                theorem1: Verdict::NotApplicable,
                theorem2,
                conditions,
            })
        }
        GainCertificate::Explicit(_) => Ok(ConsensusVerdict {
            theorem1: Verdict::NotApplicable,
            theorem2: Verdict::NotApplicable,
            conditions,
        }),
    }
}
