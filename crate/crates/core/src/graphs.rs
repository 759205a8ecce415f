//! Time-varying graph Laplacians: schedules, window averages, uniform
//! connectivity and the Assumption (L) bound μ̄.

use crate::dynamics::ReductionBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Graph Laplacian with zero row sums and non-positive off-diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian(Mat);

impl Laplacian {
    pub fn new(l: Mat, tol_row: f64) -> Result<Self> {
        if !l.is_square() || l.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Laplacian must be square and non-empty, got {}x{}",
                l.nrows(),
                l.ncols()
            )));
        }
        let n = l.nrows();
        for i in 0..n {
            let row_sum: f64 = l.row(i).iter().sum();
            if row_sum.abs() > tol_row {
                return Err(Error::InvalidInput(format!(
                    "Laplacian row {i} sums to {row_sum:e}"
                )));
            }
            for j in 0..n {
                if i != j && l[(i, j)] > tol_row {
                    return Err(Error::InvalidInput(format!(
                        "Laplacian entry ({i},{j}) = {} is positive",
                        l[(i, j)]
                    )));
                }
            }
        }
        Ok(Self(l))
    }

    /// Laplacian of the edge-gain array `a[i][j] ≥ 0` (gain from j into i).
    pub fn from_edge_gains(gains: &Mat) -> Result<Self> {
        if !gains.is_square() {
            return Err(Error::DimensionMismatch("edge gains must be square".into()));
        }
        if gains.iter().any(|&g| g < 0.0) {
            return Err(Error::InvalidInput("edge gains must be non-negative".into()));
        }
        let n = gains.nrows();
        let mut l = -gains.clone();
        for i in 0..n {
            l[(i, i)] = 0.0;
            let deg: f64 = (0..n).filter(|&j| j != i).map(|j| gains[(i, j)]).sum();
            l[(i, i)] = deg;
        }
        Self::new(l, f64::INFINITY)
    }

    pub fn zero(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    /// Laplacian of the complete graph with unit gains.
    pub fn complete(n: usize) -> Self {
        Self(Mat::identity(n, n) * n as f64 - Mat::from_element(n, n, 1.0))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }
}

/// How a schedule picks L(k) from its palette.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// `L(k) = palette[0]`.
    Constant,
    /// `L(k) = palette[(k / dwell) mod p]`; dwell 1 is the plain periodic table.
    Periodic { dwell: usize },
    /// Independent uniform draw from the palette at each k.
    RandomUniform { seed: u64 },
    /// `L(stride·κ) = palette[κ mod p]`, zero graph in between.
    Sparse { stride: usize },
    /// Cyclic table of palette indices; `None` is the zero graph.
    Custom { sequence: Vec<Option<usize>> },
}

/// A rule producing `L(k)` for every `k ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSchedule {
    kind: ScheduleKind,
    palette: Vec<Laplacian>,
    zero: Laplacian,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl LaplacianSchedule {
    pub fn new(kind: ScheduleKind, palette: Vec<Laplacian>) -> Result<Self> {
        let n = palette
            .first()
            .map(Laplacian::n)
            .ok_or_else(|| Error::InvalidInput("schedule palette is empty".into()))?;
        if palette.iter().any(|l| l.n() != n) {
            return Err(Error::DimensionMismatch(
                "palette Laplacians differ in size".into(),
            ));
        }
        match &kind {
            ScheduleKind::Periodic { dwell: 0 } => {
                return Err(Error::InvalidInput("dwell must be >= 1".into()))
            }
            ScheduleKind::Sparse { stride: 0 } => {
                return Err(Error::InvalidInput("stride must be >= 1".into()))
            }
            ScheduleKind::Custom { sequence } => {
                if sequence.is_empty() {
                    return Err(Error::InvalidInput("custom sequence is empty".into()));
                }
                if let Some(bad) = sequence.iter().flatten().find(|&&i| i >= palette.len()) {
                    return Err(Error::InvalidInput(format!(
                        "custom sequence index {bad} out of palette range"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self {
            kind,
            palette,
            zero: Laplacian::zero(n),
        })
    }

    pub fn constant(l: Laplacian) -> Self {
        Self::new(ScheduleKind::Constant, vec![l]).expect("single-entry palette")
    }

    pub fn periodic(palette: Vec<Laplacian>) -> Result<Self> {
        Self::new(ScheduleKind::Periodic { dwell: 1 }, palette)
    }

    pub fn dwell_switched(palette: Vec<Laplacian>, dwell: usize) -> Result<Self> {
        Self::new(ScheduleKind::Periodic { dwell }, palette)
    }

    pub fn random_uniform(palette: Vec<Laplacian>, seed: u64) -> Result<Self> {
        Self::new(ScheduleKind::RandomUniform { seed }, palette)
    }

    pub fn sparse(palette: Vec<Laplacian>, stride: usize) -> Result<Self> {
        Self::new(ScheduleKind::Sparse { stride }, palette)
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn palette(&self) -> &[Laplacian] {
        &self.palette
    }

    pub fn n_agents(&self) -> usize {
        self.zero.n()
    }

    /// Laplacian at time index `k`.
    pub fn at(&self, k: usize) -> &Laplacian {
        let p = self.palette.len();
        match &self.kind {
            ScheduleKind::Constant => &self.palette[0],
            ScheduleKind::Periodic { dwell } => &self.palette[(k / dwell) % p],
            ScheduleKind::RandomUniform { seed } => {
                let h = splitmix64(seed ^ splitmix64(k as u64));
                let idx = ((h as u128 * p as u128) >> 64) as usize;
                &self.palette[idx]
            }
            ScheduleKind::Sparse { stride } => {
                if k.is_multiple_of(*stride) {
                    &self.palette[(k / stride) % p]
                } else {
                    &self.zero
                }
            }
            ScheduleKind::Custom { sequence } => match sequence[k % sequence.len()] {
                Some(i) => &self.palette[i],
                None => &self.zero,
            },
        }
    }

    /// Period of `k ↦ L(k)`, or `None` for random schedules.
    pub fn period(&self) -> Option<usize> {
        let p = self.palette.len();
        match &self.kind {
            ScheduleKind::Constant => Some(1),
            ScheduleKind::Periodic { dwell } => Some(dwell * p),
            ScheduleKind::RandomUniform { .. } => None,
            ScheduleKind::Sparse { stride } => Some(stride * p),
            ScheduleKind::Custom { sequence } => Some(sequence.len()),
        }
    }
}

/// `(1/T_c) Σ_{i<T_c} L(k+i)`.
pub fn average_laplacian(schedule: &LaplacianSchedule, k: usize, t_c: usize) -> Result<Laplacian> {
    if t_c == 0 {
        return Err(Error::InvalidInput("averaging window T_c must be >= 1".into()));
    }
    let n = schedule.n_agents();
    let mut sum = Mat::zeros(n, n);
    for i in 0..t_c {
        sum += schedule.at(k + i).matrix();
    }
    Ok(Laplacian(sum / t_c as f64))
}

/// Second-smallest eigenvalue modulus of a (possibly directed) Laplacian.
pub fn lambda2_modulus(l: &Laplacian) -> f64 {
    let mut moduli: Vec<f64> = linalg::eigenvalues(l.matrix()).iter().map(|z| z.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    moduli.get(1).copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    pub window: usize,
    /// `(k, |λ₂(L̄_{T_c}(k))|)` for every scanned window start.
    pub lambda2: Vec<(usize, f64)>,
    pub min_lambda2: f64,
    pub argmin_k: usize,
    pub uniformly_connected: bool,
    /// True when the scan covered one full period, so the verdict holds for all k.
    pub exhaustive: bool,
}

/// Scan window averages for `k = 0..=K-T_c` (one period for periodic schedules).
pub fn check_uniform_connectivity(
    schedule: &LaplacianSchedule,
    t_c: usize,
    horizon: usize,
    tol_conn: f64,
) -> Result<ConnectivityReport> {
    if t_c == 0 || horizon < t_c {
        return Err(Error::InvalidInput(format!(
            "need 1 <= T_c <= K, got T_c = {t_c}, K = {horizon}"
        )));
    }
    let (starts, exhaustive) = match schedule.period() {
        Some(p) => (p, true),
        None => (horizon - t_c + 1, false),
    };
    let mut lambda2 = Vec::with_capacity(starts);
    for k in 0..starts {
        lambda2.push((k, lambda2_modulus(&average_laplacian(schedule, k, t_c)?)));
    }
    let (argmin_k, min_lambda2) = lambda2
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one window");
    Ok(ConnectivityReport {
        window: t_c,
        uniformly_connected: min_lambda2 > tol_conn,
        lambda2,
        min_lambda2,
        argmin_k,
        exhaustive,
    })
}

/// Largest μ̄ with `L + L' - μ̄ L'L ⪰ 0` for one Laplacian; `+∞` when `L = 0`,
/// negative when `L + L'` is indefinite.
pub fn mu_bar_single(l: &Laplacian) -> f64 {
    let m = l.matrix();
    let num = m + m.transpose();
    let den = m.transpose() * m;
    // With L + L' ⪰ 0, ker L lies in ker(L + L'), so restricting to the range
    // of L'L is exact. Otherwise no μ̄ > 0 exists.
    let min_sym = linalg::min_sym_eig(&num);
    if min_sym < -1e-12 * linalg::max_abs(&num).max(1.0) {
        return min_sym.min(-f64::MIN_POSITIVE);
    }
    match linalg::generalized_extremes_on_range(&num, &den, 1e-12) {
        Some((lo, _)) => lo,
        None => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionLReport {
    /// `+∞` when every scanned Laplacian is zero (constraint vacuous).
    pub mu_bar: f64,
    pub argmin_k: usize,
    pub mu: f64,
    /// `0 < μ < μ̄`.
    pub holds: bool,
    pub scanned: usize,
    /// Largest `‖ℓ(k)‖` seen; Assumption (L) forces it to zero.
    pub max_ell_norm: f64,
    /// Worst eigenvalue of `L + L' - μ̄L'L` re-substituted (≥ -tol_psd expected).
    pub min_residual_eig: f64,
}

/// Estimate μ̄ of Assumption (L) over `k < K` (one period for periodic
/// schedules) and test `0 < μ < μ̄`.
pub fn check_assumption_l(
    schedule: &LaplacianSchedule,
    horizon: usize,
    mu: f64,
    basis: &ReductionBasis,
) -> Result<AssumptionLReport> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!("coupling mu must be > 0, got {mu}")));
    }
    let scanned = schedule.period().unwrap_or(horizon).max(1);
    let mut mu_bar = f64::INFINITY;
    let mut argmin_k = 0;
    let mut max_ell_norm = 0.0_f64;
    for k in 0..scanned {
        let l = schedule.at(k);
        let mb = mu_bar_single(l);
        if mb <= 0.0 {
            return Err(Error::AssumptionLViolated { k, mu_bar: mb });
        }
        if mb < mu_bar {
            mu_bar = mb;
            argmin_k = k;
        }
        let (_, ell) = reduced_laplacian(l, basis)?;
        max_ell_norm = max_ell_norm.max(ell.norm());
    }
    let mut min_residual_eig = f64::INFINITY;
    if mu_bar.is_finite() {
        for k in 0..scanned {
            let m = schedule.at(k).matrix();
            let res = m + m.transpose() - m.transpose() * m * mu_bar;
            min_residual_eig = min_residual_eig.min(linalg::min_sym_eig(&res));
        }
    }
    Ok(AssumptionLReport {
        mu_bar,
        argmin_k,
        mu,
        holds: mu < mu_bar,
        scanned,
        max_ell_norm,
        min_residual_eig,
    })
}

/// `L̂ = V̂'LV̂` and `ℓ = v₁'LV̂`.
pub fn reduced_laplacian(l: &Laplacian, basis: &ReductionBasis) -> Result<(Mat, Mat)> {
    if l.n() != basis.n_agents() {
        return Err(Error::DimensionMismatch(format!(
            "Laplacian is {0}x{0} but basis has N = {1}",
            l.n(),
            basis.n_agents()
        )));
    }
    let vhat = basis.vhat();
    let lv = l.matrix() * &vhat;
    let reduced = vhat.transpose() * &lv;
    let v1 = basis.v().columns(0, 1).transpose();
    let ell = v1 * lv;
    Ok((reduced, ell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_reduction;

    fn path_pair(n: usize, i: usize, j: usize) -> Laplacian {
        let mut m = Mat::zeros(n, n);
        m[(i, i)] = 1.0;
        m[(j, j)] = 1.0;
        m[(i, j)] = -1.0;
        m[(j, i)] = -1.0;
        Laplacian::new(m, 1e-10).unwrap()
    }

    fn ring_palette() -> Vec<Laplacian> {
        vec![path_pair(4, 0, 1), path_pair(4, 1, 2), path_pair(4, 2, 3), path_pair(4, 3, 0)]
    }

    #[test]
    fn validation() {
        assert!(Laplacian::new(Mat::from_row_slice(2, 2, &[1.0, -0.5, -1.0, 1.0]), 1e-10).is_err());
        assert!(Laplacian::new(Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]), 1e-10).is_err());
        let g = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.0]);
        let l = Laplacian::from_edge_gains(&g).unwrap();
        assert_eq!(l.matrix()[(1, 1)], 2.0);
        assert_eq!(l.matrix()[(1, 2)], -2.0);
    }

    #[test]
    fn schedule_kinds() {
        let pal = ring_palette();
        let p = LaplacianSchedule::periodic(pal.clone()).unwrap();
        assert_eq!(p.at(5), &pal[1]);
        let d = LaplacianSchedule::dwell_switched(pal.clone(), 2).unwrap();
        assert_eq!(d.at(5), &pal[2]);
        assert_eq!(d.period(), Some(8));
        let s2 = LaplacianSchedule::sparse(pal.clone(), 2).unwrap();
        assert_eq!(s2.at(6), &pal[3]);
        assert_eq!(s2.at(7), &Laplacian::zero(4));
        let s3 = LaplacianSchedule::sparse(pal.clone(), 3).unwrap();
        assert_eq!(s3.at(12), &pal[0]);
        assert_eq!(s3.period(), Some(12));
        let r1 = LaplacianSchedule::random_uniform(pal.clone(), 42).unwrap();
        let r2 = LaplacianSchedule::random_uniform(pal.clone(), 42).unwrap();
        assert!((0..500).all(|k| r1.at(k) == r2.at(k)));
        let r3 = LaplacianSchedule::random_uniform(pal.clone(), 43).unwrap();
        assert!((0..500).any(|k| r1.at(k) != r3.at(k)));
        let c = LaplacianSchedule::new(ScheduleKind::Custom { sequence: vec![Some(2), None] }, pal.clone()).unwrap();
        assert_eq!(c.at(2), &pal[2]);
        assert_eq!(c.at(3), &Laplacian::zero(4));
        assert!(LaplacianSchedule::new(ScheduleKind::Custom { sequence: vec![Some(9)] }, pal).is_err());
    }

    #[test]
    fn random_draws_cover_palette_evenly() {
        let pal = ring_palette();
        let r = LaplacianSchedule::random_uniform(pal.clone(), 7).unwrap();
        let mut counts = [0usize; 4];
        for k in 0..40_000 {
            let idx = pal.iter().position(|l| l == r.at(k)).unwrap();
            counts[idx] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    #[test]
    fn averages() {
        let l = Laplacian::complete(3);
        let c = LaplacianSchedule::constant(l.clone());
        assert_eq!(average_laplacian(&c, 7, 5).unwrap().matrix(), l.matrix());
        let s3 = LaplacianSchedule::sparse(ring_palette(), 3).unwrap();
        for kappa in 0..6 {
            let avg = average_laplacian(&s3, 3 * kappa, 3).unwrap();
            let expect = ring_palette()[kappa % 4].matrix() / 3.0;
            assert!(linalg::max_abs(&(avg.matrix() - expect)) < 1e-15);
        }
        assert!(average_laplacian(&c, 0, 0).is_err());
    }

    #[test]
    fn ring_connectivity() {
        let p = LaplacianSchedule::periodic(ring_palette()).unwrap();
        let avg = average_laplacian(&p, 0, 4).unwrap();
        // 4-cycle Laplacian / 4 has spectrum {0, 1/2, 1/2, 1}
        assert!((lambda2_modulus(&avg) - 0.5).abs() < 1e-12);
        assert!(check_uniform_connectivity(&p, 4, 100, 1e-9).unwrap().uniformly_connected);
        let single = check_uniform_connectivity(&p, 1, 100, 1e-9).unwrap();
        assert!(!single.uniformly_connected);
        assert!(single.min_lambda2 < 1e-12);
        let z = LaplacianSchedule::constant(Laplacian::zero(4));
        for t in 1..6 {
            assert!(!check_uniform_connectivity(&z, t, 20, 1e-9).unwrap().uniformly_connected);
        }
    }

    #[test]
    fn mu_bar_values() {
        let basis = build_reduction(4).unwrap();
        let p = LaplacianSchedule::periodic(ring_palette()).unwrap();
        let rep = check_assumption_l(&p, 50, 0.5, &basis).unwrap();
        assert!((rep.mu_bar - 1.0).abs() < 1e-10);
        assert!(rep.holds);
        assert!(rep.min_residual_eig > -1e-10);
        assert!(rep.max_ell_norm < 1e-12);
        let z = LaplacianSchedule::constant(Laplacian::zero(4));
        assert_eq!(check_assumption_l(&z, 10, 0.5, &basis).unwrap().mu_bar, f64::INFINITY);
        // undirected with λ_N ≤ 2 gives μ̄ ≥ 1
        let half = Laplacian::new(Laplacian::complete(4).into_matrix() * 0.5, 1e-10).unwrap();
        assert!(mu_bar_single(&half) >= 1.0 - 1e-12);
        assert!(check_assumption_l(&p, 10, 0.0, &basis).is_err());
    }

    #[test]
    fn directed_violation_is_reported() {
        // a single directed edge gives L + L' indefinite
        let g = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let l = Laplacian::from_edge_gains(&g).unwrap();
        let basis = build_reduction(3).unwrap();
        let s = LaplacianSchedule::constant(l);
        assert!(matches!(
            check_assumption_l(&s, 3, 0.5, &basis),
            Err(Error::AssumptionLViolated { k: 0, .. })
        ));
    }

    #[test]
    fn reduced_laplacian_examples() {
        let basis = build_reduction(4).unwrap();
        let (lh, ell) = reduced_laplacian(&Laplacian::complete(4), &basis).unwrap();
        assert!(linalg::max_abs(&(lh - Mat::identity(3, 3) * 4.0)) < 1e-12);
        assert!(ell.norm() < 1e-12);
        let (lh, ell) = reduced_laplacian(&ring_palette()[0], &basis).unwrap();
        assert!(ell.norm() < 1e-12);
        let (vals, _) = linalg::sym_eigen(&lh);
        assert!(vals[0].abs() < 1e-12 && vals[1].abs() < 1e-12 && (vals[2] - 2.0).abs() < 1e-12);
    }
}
