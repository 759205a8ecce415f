mod common;

use common::{dense_step, directed_laplacian, gain_at, jordan_pair, kron, max_abs, semisimple_pair, sym_eigs, symmetric_laplacian, Mat};
use nalgebra::{Complex, DVector};
use proptest::prelude::*;
use tv_consensus::analysis::{closed_loop_hinf, hinf_norm, observability_gramian};
use tv_consensus::dynamics::{build_reduction, global_step, mahler_measure, validate_assumption_a, AgentDynamics, ReductionBasis};
use tv_consensus::gain_design::{design_stable_gain, gamma_gain, observability_rank, solve_gamma_riccati, RiccatiOptions};
use tv_consensus::graphs::{average_laplacian, mu_bar_single, reduced_laplacian, Laplacian, LaplacianSchedule, ScheduleKind};
use tv_consensus::sim::{self, InitialState, SimulationConfig};
use tv_consensus::{scenarios, Tolerances};

fn config() -> ProptestConfig {
    // PROPTEST_CASES overrides the default of 50 for longer soak runs
    let cases = std::env::var("PROPTEST_CASES").ok().and_then(|v| v.parse().ok()).unwrap_or(50);
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn assumption_a(pair: &(Mat, Mat)) -> bool {
    AgentDynamics::new(pair.0.clone(), pair.1.clone())
        .map(|d| validate_assumption_a(&d, 1e-8, 1e-8).is_ok())
        .unwrap_or(false)
}

fn dynamics(pair: &(Mat, Mat)) -> AgentDynamics {
    AgentDynamics::new(pair.0.clone(), pair.1.clone()).unwrap()
}

fn any_assumption_a_pair() -> impl Strategy<Value = (Mat, Mat)> {
    prop_oneof![semisimple_pair(), jordan_pair()].prop_filter("Assumption (A)", assumption_a)
}

fn stable_pair() -> impl Strategy<Value = (Mat, Mat)> {
    semisimple_pair().prop_filter("Assumption (A)", assumption_a)
}

fn spectral_radius(m: &Mat) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Palette of random Laplacians on `n_agents` nodes.
fn palette(n_agents: usize, directed: bool) -> BoxedStrategy<Vec<Mat>> {
    if directed {
        prop::collection::vec(directed_laplacian(n_agents), 1..=4).boxed()
    } else {
        prop::collection::vec(symmetric_laplacian(n_agents), 1..=4).boxed()
    }
}

fn laplacians(p: &[Mat]) -> Vec<Laplacian> {
    p.iter().map(|l| Laplacian::new(l.clone(), 1e-10).unwrap()).collect()
}

fn schedule_kind() -> impl Strategy<Value = ScheduleKind> {
    prop_oneof![
        Just(ScheduleKind::Constant),
        (1usize..=3).prop_map(|dwell| ScheduleKind::Periodic { dwell }),
        any::<u64>().prop_map(|seed| ScheduleKind::RandomUniform { seed }),
        (1usize..=3).prop_map(|stride| ScheduleKind::Sparse { stride }),
        prop::collection::vec(prop::option::of(0usize..1), 1..=5)
            .prop_map(|sequence| ScheduleKind::Custom { sequence }),
    ]
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn stable_design_certificate((a, b) in stable_pair()) {
        let d = dynamics(&(a.clone(), b.clone()));
        let cert = design_stable_gain(&d, &Tolerances::default()).unwrap();
        let x = &cert.x;
        let n = a.nrows();
        prop_assert!(max_abs(&(a.transpose() * x * &a - x)) <= 1e-10);
        prop_assert!(cert.lyapunov_residual <= 1e-10);
        prop_assert!(cert.slack >= -1e-10);
        prop_assert!(max_abs(&(&cert.f - b.transpose() * x * &a)) <= 1e-12);
        let a_cl = &a - &b * &cert.f;
        prop_assert!(spectral_radius(&a_cl) < 1.0);
        let identity = x - a_cl.transpose() * x * &a_cl - cert.f.transpose() * &cert.f;
        prop_assert!(sym_eigs(&((&identity + identity.transpose()) * 0.5))[0] >= -1e-8);
        prop_assert_eq!(observability_rank(&a, &cert.f), n);
        prop_assert!((mahler_measure(&a) - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn positive_real_hermitian_part((a, b) in stable_pair()) {
        let d = dynamics(&(a.clone(), b.clone()));
        let cert = design_stable_gain(&d, &Tolerances::default()).unwrap();
        let m = b.ncols();
        for r in [1.01, 1.1, 2.0] {
            for i in 0..64 {
                let z = Complex::from_polar(r, 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / 64.0);
                let g = gain_at(&a, &b, &cert.f, z);
                let herm = (&g + g.adjoint()).map(|c| c * 0.5)
                    + nalgebra::DMatrix::<Complex<f64>>::identity(m, m) * Complex::new(0.5, 0.0);
                let min = herm.symmetric_eigenvalues().min();
                prop_assert!(min >= -1e-8, "r = {r}, i = {i}, min eig {min}");
            }
        }
    }

    #[test]
    fn stable_hinf_sandwich((a, b) in stable_pair()) {
        let d = dynamics(&(a.clone(), b.clone()));
        let cert = design_stable_gain(&d, &Tolerances::default()).unwrap();
        let hinf = closed_loop_hinf(&d, &cert.f, 1e-6).unwrap();
        let lower = mahler_measure(&a).powf(1.0 / b.ncols() as f64);
        prop_assert!(hinf >= lower - 1e-3 && hinf <= 1.0 + 1e-3, "hinf = {hinf}");
    }

    #[test]
    fn riccati_residual((a, b) in any_assumption_a_pair()) {
        let d = dynamics(&(a.clone(), b.clone()));
        // small ε pushes the closed-loop poles towards the unit circle and
        // the fixed-point iteration slows to a crawl
        let (gamma, eps) = (2.0, 0.1);
        let opts = RiccatiOptions { max_iter: 200_000, tol: 1e-13 };
        let sol = solve_gamma_riccati(&d, gamma, eps, opts).unwrap();
        let n = a.nrows();
        let x = &sol.x;
        let inner = Mat::identity(n, n) + &b * b.transpose() * x * (1.0 - gamma.powi(-2));
        let y = inner.lu().solve(&a).unwrap();
        let residual = max_abs(&(x - a.transpose() * x * y - Mat::identity(n, n) * eps));
        // absolute rounding in X - A'X(..)⁻¹A grows with the size of X
        let scale = max_abs(x).max(1.0);
        prop_assert!(residual <= 1e-12 * scale, "residual {residual}, max abs X {scale}");
        prop_assert!(sym_eigs(x)[0] > 0.0);
        let f = gamma_gain(&d, x, gamma).unwrap();
        prop_assert!(spectral_radius(&(&a - &b * f)) < 1.0);
    }

    #[test]
    fn hinf_matches_finer_sweep(
        n in 1usize..=6,
        entries in prop::collection::vec(-1.0f64..1.0, 36 + 12 + 12),
        radius in 0.3f64..0.95,
    ) {
        let raw = Mat::from_fn(n, n, |i, j| entries[i * 6 + j]);
        let rho = spectral_radius(&raw).max(1e-3);
        let a = raw * (radius / rho);
        let b = Mat::from_fn(n, 2, |i, j| entries[36 + i * 2 + j]);
        let c = Mat::from_fn(2, n, |i, j| entries[48 + i * 6 + j]);
        let fast = hinf_norm(&a, &b, &c, 1e-8).unwrap();
        let brute = common::sweep_hinf(&a, &b, &c, 8192);
        prop_assert!((fast - brute).abs() <= 1e-4 * brute.max(1e-12), "fast {fast} brute {brute}");
    }

    #[test]
    fn blockwise_step_matches_dense_kronecker(
        (a, b) in any_assumption_a_pair(),
        (n_agents, l) in (2usize..=6).prop_flat_map(|n| (Just(n), prop_oneof![symmetric_laplacian(n), directed_laplacian(n)])),
        seed in any::<u64>(),
        mu in 0.05f64..1.0,
    ) {
        let d = dynamics(&(a.clone(), b.clone()));
        let n = a.nrows();
        let f = Mat::from_fn(b.ncols(), n, |i, j| ((i * 7 + j * 3) as f64 * 0.37).sin());
        let x = InitialState::Random { seed }.realize(n_agents * n).unwrap();
        let blockwise = global_step(&x, &l, &d, &f, mu).unwrap();
        let dense = dense_step(&x, &l, &a, &b, &f, mu);
        prop_assert!((blockwise - dense).amax() <= 1e-10);
    }

    #[test]
    fn agreement_is_invariant_bitwise(
        (a, b) in any_assumption_a_pair(),
        lap in palette(5, true),
        v in prop::collection::vec(-1.0f64..1.0, 4),
        kind in schedule_kind(),
    ) {
        let d = dynamics(&(a.clone(), b.clone()));
        let n = a.nrows();
        let f = Mat::from_fn(b.ncols(), n, |i, j| 0.3 + 0.1 * (i + j) as f64);
        let schedule = LaplacianSchedule::new(kind, laplacians(&lap)).unwrap();
        let v0 = DVector::from_fn(n, |i, _| v[i]);
        let x0 = DVector::from_fn(5 * n, |i, _| v0[i % n]);
        let mut sc = SimulationConfig::new(d, f, 0.7, schedule, 60, InitialState::Explicit(x0)).unwrap();
        sc.record_states = true;
        let trace = sim::run(&sc).unwrap();
        let mut vk = v0;
        for x in trace.states.unwrap() {
            for i in 0..5 {
                prop_assert_eq!(x.rows(i * n, n).into_owned(), vk.clone());
            }
            vk = &a * vk;
        }
        prop_assert!(trace.input_max.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn full_and_reduced_simulations_agree(
        (a, b) in stable_pair(),
        lap in palette(4, true),
        kind in schedule_kind(),
        seed in any::<u64>(),
        use_walsh in any::<bool>(),
    ) {
        let d = dynamics(&(a.clone(), b.clone()));
        let f = design_stable_gain(&d, &Tolerances::default()).unwrap().f;
        let schedule = LaplacianSchedule::new(kind, laplacians(&lap)).unwrap();
        let mut sc = SimulationConfig::new(d, f, 0.3, schedule, 200, InitialState::Random { seed }).unwrap();
        if use_walsh {
            let vhat = tv_consensus::linalg::from_rows(&scenarios::walsh_complement()).unwrap();
            sc.basis = ReductionBasis::from_complement(vhat, 1e-10).unwrap();
        }
        let full = sim::run(&sc).unwrap();
        let reduced = sim::run_reduced(&sc).unwrap();
        prop_assert_eq!(full.disagreement_norm.len(), reduced.norms.len());
        let scale = full.disagreement_norm.iter().copied().fold(1e-300, f64::max);
        for (k, (p, q)) in full.disagreement_norm.iter().zip(&reduced.norms).enumerate() {
            prop_assert!((p - q).abs() <= 1e-8 * scale, "k = {k}: {p} vs {q}");
        }
    }

    #[test]
    fn average_state_follows_agent_dynamics(
        (a, b) in stable_pair(),
        lap in palette(4, false),
        kind in schedule_kind(),
        seed in any::<u64>(),
    ) {
        let d = dynamics(&(a.clone(), b.clone()));
        let n = a.nrows();
        let f = design_stable_gain(&d, &Tolerances::default()).unwrap().f;
        let schedule = LaplacianSchedule::new(kind, laplacians(&lap)).unwrap();
        let mut sc = SimulationConfig::new(d, f, 0.4, schedule, 40, InitialState::Random { seed }).unwrap();
        sc.record_states = true;
        let states = sim::run(&sc).unwrap().states.unwrap();
        let mean = |x: &DVector<f64>| (0..4).fold(DVector::zeros(n), |acc, i| acc + x.rows(i * n, n)) / 4.0;
        for w in states.windows(2) {
            prop_assert!((mean(&w[1]) - &a * mean(&w[0])).amax() <= 1e-10);
        }
    }

    #[test]
    fn gramian_is_symmetric_psd_and_additive(
        (a, b) in any_assumption_a_pair(),
        lap in palette(4, true),
        kind in schedule_kind(),
        k0 in 0usize..20,
        t1 in 0usize..6,
        t2 in 0usize..6,
    ) {
        let d = dynamics(&(a.clone(), b.clone()));
        let n = a.nrows();
        let f = Mat::from_fn(b.ncols(), n, |i, j| 0.2 * (1 + i + 2 * j) as f64);
        let schedule = LaplacianSchedule::new(kind, laplacians(&lap)).unwrap();
        let basis = build_reduction(4).unwrap();
        let gram = |k, t| observability_gramian(&d, &f, &schedule, &basis, k, t, 0.5).unwrap();
        let whole = gram(k0, t1 + t2 + 1);
        let scale = max_abs(&whole).max(1.0);
        prop_assert!(max_abs(&(&whole - whole.transpose())) <= 1e-12 * scale);
        prop_assert!(sym_eigs(&whole)[0] >= -1e-10 * scale);
        let parts = gram(k0, t1) + gram(k0 + t1 + 1, t2);
        prop_assert!(max_abs(&(whole - parts)) <= 1e-8 * scale);
    }

    #[test]
    fn schedule_rows_sum_to_zero(lap in palette(5, true), kind in schedule_kind(), ks in prop::collection::vec(0usize..=10_000, 20)) {
        let schedule = LaplacianSchedule::new(kind, laplacians(&lap)).unwrap();
        for k in ks {
            let l = schedule.at(k).matrix();
            for i in 0..5 {
                prop_assert!(l.row(i).sum().abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn average_laplacian_is_periodic(lap in palette(4, true), kind in schedule_kind(), k in 0usize..50, t_c in 1usize..8) {
        let schedule = LaplacianSchedule::new(kind, laplacians(&lap)).unwrap();
        if let Some(p) = schedule.period() {
            let here = average_laplacian(&schedule, k, t_c).unwrap();
            let later = average_laplacian(&schedule, k + p, t_c).unwrap();
            prop_assert!(max_abs(&(here.matrix() - later.matrix())) <= 1e-14);
        }
    }

    #[test]
    fn reduced_spectrum_completes_with_zero(l in symmetric_laplacian(5), use_default in any::<bool>()) {
        let lap = Laplacian::new(l.clone(), 1e-10).unwrap();
        let basis = if use_default {
            build_reduction(5).unwrap()
        } else {
            ReductionBasis::householder(5).unwrap()
        };
        let (lhat, ell) = reduced_laplacian(&lap, &basis).unwrap();
        prop_assert!(ell.amax() <= 1e-12);
        let mut reduced = sym_eigs(&((&lhat + lhat.transpose()) * 0.5));
        reduced.push(0.0);
        reduced.sort_by(f64::total_cmp);
        let full = sym_eigs(&l);
        for (p, q) in reduced.iter().zip(&full) {
            prop_assert!((p - q).abs() <= 1e-8);
        }
    }

    #[test]
    fn reduction_basis_is_orthonormal_and_deterministic(n_agents in 2usize..=12) {
        let v = build_reduction(n_agents).unwrap();
        let again = build_reduction(n_agents).unwrap();
        prop_assert_eq!(v.v(), again.v());
        let gram = v.v().transpose() * v.v();
        prop_assert!(max_abs(&(gram - Mat::identity(n_agents, n_agents))) <= 1e-10);
        let ones = DVector::from_element(n_agents, 1.0 / (n_agents as f64).sqrt());
        prop_assert!((v.v().column(0) - ones).amax() <= 1e-12);
    }

    #[test]
    fn mu_bar_satisfies_its_inequality(l in prop_oneof![symmetric_laplacian(4), directed_laplacian(4)]) {
        let lap = Laplacian::new(l.clone(), 1e-10).unwrap();
        let mu_bar = mu_bar_single(&lap);
        let sym = &l + l.transpose();
        if mu_bar > 0.0 && mu_bar.is_finite() {
            let residual = &sym - l.transpose() * &l * mu_bar;
            prop_assert!(sym_eigs(&residual)[0] >= -1e-10 * max_abs(&sym).max(1.0));
        } else if mu_bar <= 0.0 {
            prop_assert!(sym_eigs(&sym)[0] < 0.0);
        }
    }

    #[test]
    fn random_schedule_is_reproducible(lap in palette(3, false), seed in any::<u64>(), ks in prop::collection::vec(0usize..100_000, 30)) {
        let first = LaplacianSchedule::random_uniform(laplacians(&lap), seed).unwrap();
        let second = LaplacianSchedule::random_uniform(laplacians(&lap), seed).unwrap();
        for &k in ks.iter().rev() {
            prop_assert_eq!(first.at(k), second.at(k));
        }
    }

    #[test]
    fn simulation_is_deterministic(idx in 0usize..6, seed in any::<u64>()) {
        let (_, cfg) = scenarios::all().swap_remove(idx);
        let exp = cfg.experiment().unwrap();
        let gain = cfg.design(&exp).unwrap().certificate.gain().clone();
        let schedule = cfg.schedule(exp.palette.clone(), seed).unwrap();
        let mut sc = SimulationConfig::new(exp.dynamics, gain, exp.mu, schedule, 150, InitialState::Random { seed }).unwrap();
        sc.basis = exp.basis;
        let one = sim::run(&sc).unwrap();
        let two = sim::run(&sc).unwrap();
        prop_assert_eq!(one.verdict, two.verdict);
        prop_assert_eq!(
            one.consensus_error.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            two.consensus_error.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn built_in_scenarios_full_and_reduced_agree() {
    for (_, cfg) in scenarios::all() {
        let exp = cfg.experiment().unwrap();
        let gain = cfg.design(&exp).unwrap().certificate.gain().clone();
        let schedule = cfg.schedule(exp.palette.clone(), 1).unwrap();
        let mut sc = SimulationConfig::new(exp.dynamics, gain, exp.mu, schedule, 200, InitialState::Random { seed: 1 }).unwrap();
        sc.basis = exp.basis;
        let full = sim::run(&sc).unwrap();
        let reduced = sim::run_reduced(&sc).unwrap();
        let scale = full.disagreement_norm.iter().copied().fold(1e-300, f64::max);
        for (k, (p, q)) in full.disagreement_norm.iter().zip(&reduced.norms).enumerate() {
            assert!((p - q).abs() <= 1e-8 * scale, "{} k = {k}: {p} vs {q}", cfg.name);
        }
    }
}

#[test]
fn kron_oracle_sanity() {
    let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let b = Mat::identity(2, 2);
    let k = kron(&a, &b);
    assert_eq!(k[(0, 0)], 1.0);
    assert_eq!(k[(0, 2)], 2.0);
    assert_eq!(k[(3, 1)], 3.0);
    assert_eq!(k[(3, 3)], 4.0);
}
