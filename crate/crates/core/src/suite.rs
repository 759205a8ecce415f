//! The built-in reproduction suite: every worked-example outcome, compared
//! against the published numbers.

use crate::analysis::{closed_loop_hinf, numerical_rank, observability_gramian, Verdict};
use crate::commands::{check, simulate, CommandOutput, Timings, EXIT_NEGATIVE, EXIT_OK};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::gain_design::GainCertificate;
use crate::linalg::{self, Mat};
use crate::report::Report;
use crate::scenarios::{self, Suite};
use crate::sim::{self, InitialState, SimVerdict, SimulationConfig, SimulationTrace};

/// Published Example 1 gain, as printed to four decimals.
#[allow(clippy::approx_constant)]
pub const EXAMPLE1_F: [f64; 2] = [-0.7071, 0.7071];

/// Published Example 2 Riccati solution, row-major.
pub const EXAMPLE2_X: [f64; 9] = [
    0.0002, 0.0021, 0.0103, //
    0.0021, 0.0304, 0.1962, //
    0.0103, 0.1962, 1.7599,
];

/// Published Example 2 gain.
pub const EXAMPLE2_F: [f64; 3] = [-0.0068, -0.1415, -1.3985];

/// Published period-4 gramian, without its 0.5 prefactor.
pub const GRAMIAN_PERIOD4: [f64; 36] = [
    1.0, 0.0, 0.0, -1.0, 0.0, 0.0, //
    0.0, 1.0, -1.0, 0.0, 0.0, 0.0, //
    0.0, -1.0, 2.0, 0.0, 1.0, 0.0, //
    -1.0, 0.0, 0.0, 2.0, 0.0, -1.0, //
    0.0, 0.0, 1.0, 0.0, 1.0, 0.0, //
    0.0, 0.0, 0.0, -1.0, 0.0, 1.0,
];

/// Published dwell-2 gramian, without its 0.25 prefactor.
pub const GRAMIAN_DWELL2: [f64; 36] = [
    2.0, -2.0, -2.0, 2.0, 0.0, 0.0, //
    -2.0, 6.0, 2.0, -6.0, 0.0, 0.0, //
    -1.0, 1.0, 8.0, 0.0, 1.0, -1.0, //
    1.0, -3.0, 0.0, 8.0, -1.0, 3.0, //
    1.0, -1.0, 0.0, 0.0, 7.0, 1.0, //
    -1.0, 3.0, 0.0, 0.0, 1.0, 5.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub criterion: u8,
    pub scenario: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

fn row(criterion: u8, scenario: &str, expected: impl Into<String>, observed: impl Into<String>, pass: bool) -> SuiteRow {
    SuiteRow {
        criterion,
        scenario: scenario.into(),
        expected: expected.into(),
        observed: observed.into(),
        pass,
    }
}

fn failed(criterion: u8, scenario: &str, expected: &str, err: impl std::fmt::Display) -> SuiteRow {
    row(criterion, scenario, expected, format!("error: {err}"), false)
}

/// Outcome of comparing a computed gramian with a printed one.
#[derive(Debug, Clone, PartialEq)]
pub struct GramianMatch {
    pub max_deviation: f64,
    pub rank: usize,
    pub gramian: Mat,
}

/// Gramian `O(k₀, T_o)` of a stable-gain scenario weighted by the coupling μ,
/// compared against `scale · printed`.
pub fn gramian_match(cfg: &ExperimentConfig, k0: usize, scale: f64, printed: &[f64]) -> Result<GramianMatch> {
    let exp = cfg.experiment()?;
    let schedule = cfg.analysis_schedule(exp.palette.clone())?;
    let f = cfg.design(&exp)?.certificate.gain().clone();
    let gramian = observability_gramian(&exp.dynamics, &f, &schedule, &exp.basis, k0, cfg.analysis.t_o, exp.mu)?;
    let dim = gramian.nrows();
    let target = Mat::from_row_slice(dim, dim, printed) * scale;
    Ok(GramianMatch {
        max_deviation: linalg::max_abs(&(&gramian - target)),
        rank: numerical_rank(&linalg::sym_eigen(&gramian).0),
        gramian,
    })
}

/// Criterion 8: an initial state hidden from the protocol under the
/// period-4 schedule.
#[derive(Debug, Clone)]
pub struct NecessityWitness {
    pub initial_state: nalgebra::DVector<f64>,
    pub trace: SimulationTrace,
    /// Largest protocol input over the simulated steps.
    pub max_input: f64,
    pub initial_error: f64,
    pub final_error: f64,
}

pub fn necessity_witness(cfg: &ExperimentConfig, periods: usize) -> Result<NecessityWitness> {
    let exp = cfg.experiment()?;
    let schedule = cfg.analysis_schedule(exp.palette.clone())?;
    let f = cfg.design(&exp)?.certificate.gain().clone();
    let x0 = sim::find_bad_initial_state(
        &exp.dynamics,
        &f,
        &schedule,
        &exp.basis,
        cfg.analysis.t_o,
        cfg.tolerances.pd,
    )?;
    let steps = periods * schedule.period().unwrap_or(1);
    let mut sc = SimulationConfig::new(
        exp.dynamics.clone(),
        f,
        exp.mu,
        schedule,
        steps,
        InitialState::Explicit(x0.clone()),
    )?;
    sc.basis = exp.basis.clone();
    let trace = sim::run(&sc)?;
    Ok(NecessityWitness {
        initial_state: x0,
        max_input: trace.input_max.iter().copied().fold(0.0, f64::max),
        initial_error: trace.consensus_error[0],
        final_error: *trace.consensus_error.last().expect("non-empty trace"),
        trace,
    })
}

fn max_dev(m: &Mat, printed: &[f64]) -> f64 {
    linalg::max_abs(&(m - Mat::from_row_slice(m.nrows(), m.ncols(), printed)))
}

fn gain_rows(rows: &mut Vec<SuiteRow>) {
    let cfg = scenarios::example1_period4();
    let tol = cfg.tolerances;
    let outcome = cfg.experiment().and_then(|e| cfg.design(&e).map(|d| (e, d)));
    match outcome {
        Ok((exp, d)) => {
            let GainCertificate::Stable(c) = &d.certificate else { unreachable!("stable mode") };
            let df = max_dev(&c.f, &EXAMPLE1_F);
            let dx = linalg::max_abs(&(&c.x - Mat::identity(2, 2)));
            rows.push(row(1, &cfg.name, "|F-F_paper|<=1e-3, X=I to 1e-8",
                format!("|dF|={df:.3e} |X-I|={dx:.3e}"), df <= 1e-3 && dx <= 1e-8));
            match closed_loop_hinf(&exp.dynamics, &c.f, tol.hinf) {
                Ok(h) => rows.push(row(5, &cfg.name, "|hinf(T_F)-1|<=1e-3", format!("hinf={h:.6}"), (h - 1.0).abs() <= 1e-3)),
                Err(e) => rows.push(failed(5, &cfg.name, "|hinf(T_F)-1|<=1e-3", e)),
            }
        }
        Err(e) => rows.push(failed(1, &cfg.name, "stable design", e)),
    }

    let cfg = scenarios::example2_period4();
    match cfg.experiment().and_then(|e| cfg.design(&e)) {
        Ok(d) => {
            let GainCertificate::Unstable(c) = &d.certificate else { unreachable!("unstable mode") };
            let dx = max_dev(&c.x, &EXAMPLE2_X);
            let df = max_dev(&c.f, &EXAMPLE2_F);
            let gamma2 = c.gamma * c.gamma;
            let bxb = gamma2 - c.gain_margin;
            let pass = dx <= 5e-4 && df <= 5e-4 && c.gain_margin > 0.0 && c.schur_radius < 1.0;
            rows.push(row(4, &cfg.name, "X,F to 5e-4; B'XB<gamma^2; A-BF Schur",
                format!("|dX|={dx:.2e} |dF|={df:.2e} B'XB={bxb:.4} gamma^2={gamma2:.4} rho={:.4}", c.schur_radius),
                pass));
            rows.push(row(5, &cfg.name, "hinf(T_F)<1.1", format!("hinf={:.6}", c.hinf_tf), c.hinf_tf < 1.1));
        }
        Err(e) => rows.push(failed(4, &cfg.name, "unstable design", e)),
    }
}

fn gramian_rows(rows: &mut Vec<SuiteRow>) {
    let cfg = scenarios::example1_period4();
    match gramian_match(&cfg, 0, 0.5, &GRAMIAN_PERIOD4) {
        Ok(g) => rows.push(row(2, &cfg.name, "O(0,3) = printed to 1e-6, rank 4",
            format!("max dev={:.2e} rank={}", g.max_deviation, g.rank),
            g.max_deviation <= 1e-6 && g.rank == 4)),
        Err(e) => rows.push(failed(2, &cfg.name, "gramian", e)),
    }
    let cfg = scenarios::example1_dwell2();
    // The printed window is labelled 4κ; both k₀ = 0 and k₀ = 4 are tried.
    let best = [0, 4]
        .iter()
        .filter_map(|&k0| gramian_match(&cfg, k0, 0.25, &GRAMIAN_DWELL2).ok())
        .min_by(|a, b| a.max_deviation.total_cmp(&b.max_deviation));
    match best {
        Some(g) => rows.push(row(3, &cfg.name, "O(4k,7) = printed to 1e-6, rank 6",
            format!("max dev={:.2e} rank={}", g.max_deviation, g.rank),
            g.max_deviation <= 1e-6 && g.rank == 6)),
        None => rows.push(failed(3, &cfg.name, "gramian", "could not be computed")),
    }
}

fn check_rows(rows: &mut Vec<SuiteRow>, suite: Suite) {
    let cases: [(u8, ExperimentConfig, &str); 3] = [
        (1, scenarios::example1_period4(), "theorem1=no"),
        (1, scenarios::example1_dwell2(), "theorem1=yes"),
        (2, scenarios::example2_stride3(), "small-gain product>=1"),
    ];
    for (example, cfg, expected) in cases {
        if !suite.includes(example) {
            continue;
        }
        match check(&cfg, &mut Timings::default()) {
            Ok(res) => {
                let (observed, pass) = if example == 1 {
                    let want = if expected.ends_with("yes") { Verdict::Yes } else { Verdict::No };
                    (format!("theorem1={}", res.verdict.theorem1), res.verdict.theorem1 == want)
                } else {
                    match &res.small_gain {
                        Some(sg) => (format!("product={:.4}", sg.product), sg.product >= 1.0),
                        None => ("no small-gain certificate".into(), false),
                    }
                };
                rows.push(row(0, &cfg.name, expected, observed, pass));
            }
            Err(e) => rows.push(failed(0, &cfg.name, expected, e)),
        }
    }
}

fn sim_summary(traces: &[(String, SimulationTrace)], tol: f64) -> String {
    let verdicts: Vec<&str> = traces.iter().map(|(_, t)| t.verdict.as_str()).collect();
    let passages: Vec<String> = traces
        .iter()
        .map(|(_, t)| t.first_passage(tol).map_or("-".into(), |k| k.to_string()))
        .collect();
    format!("{} first_passage=[{}]", verdicts.join(","), passages.join(","))
}

fn simulation_rows(rows: &mut Vec<SuiteRow>, suite: Suite) {
    let scenarios: Vec<(u8, ExperimentConfig)> = scenarios::all()
        .into_iter()
        .filter(|(ex, _)| suite.includes(*ex))
        .collect();
    let results: Vec<Result<Vec<(String, SimulationTrace)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|(_, cfg)| scope.spawn(move || simulate(cfg)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let mut period4_passage: Option<Vec<Option<usize>>> = None;
    for ((_, cfg), result) in scenarios.iter().zip(results) {
        let tol = cfg.simulation.tol_err;
        let traces = match result {
            Ok(t) => t,
            Err(e) => {
                rows.push(failed(6, &cfg.name, "simulation", e));
                continue;
            }
        };
        let all = |v: SimVerdict| traces.iter().all(|(_, t)| t.verdict == v);
        let passages: Vec<Option<usize>> = traces.iter().map(|(_, t)| t.first_passage(tol)).collect();
        let observed = sim_summary(&traces, tol);
        let (expected, pass) = match cfg.name.as_str() {
            "example1-period4" => ("not converged", traces.iter().all(|(_, t)| t.verdict != SimVerdict::Converged)),
            "example2-stride3" => ("diverged", all(SimVerdict::Diverged)),
            "example2-stride2" => {
                let later = period4_passage.as_ref().is_some_and(|p4| {
                    p4.iter().zip(&passages).all(|(a, b)| matches!((a, b), (Some(a), Some(b)) if b > a))
                });
                if period4_passage.is_none() {
                    ("converged", all(SimVerdict::Converged))
                } else {
                    ("converged, later than period-4", all(SimVerdict::Converged) && later)
                }
            }
            _ => ("converged", all(SimVerdict::Converged)),
        };
        if cfg.name == "example2-period4" {
            period4_passage = Some(passages);
        }
        rows.push(row(6, &cfg.name, expected, observed, pass));
    }
}

fn witness_row(rows: &mut Vec<SuiteRow>) {
    let cfg = scenarios::example1_period4();
    let expected = "|u|<=1e-10 over 8 periods, error not decaying";
    match necessity_witness(&cfg, 8) {
        Ok(w) => rows.push(row(8, &cfg.name, expected,
            format!("max|u|={:.2e} e0={:.4} e_end={:.4}", w.max_input, w.initial_error, w.final_error),
            w.max_input <= 1e-10 && w.final_error >= (1.0 - 1e-9) * w.initial_error && w.initial_error > 0.0)),
        Err(e) => rows.push(failed(8, &cfg.name, expected, e)),
    }
}

/// Run the suite; rows come out in a fixed order.
pub fn run_paper_suite(suite: Suite) -> Vec<SuiteRow> {
    let mut rows = Vec::new();
    if suite.includes(1) || suite.includes(2) {
        let mut gains = Vec::new();
        gain_rows(&mut gains);
        rows.extend(gains.into_iter().filter(|r| {
            let ex = if r.scenario.starts_with("example1") { 1 } else { 2 };
            suite.includes(ex)
        }));
    }
    if suite.includes(1) {
        gramian_rows(&mut rows);
    }
    check_rows(&mut rows, suite);
    simulation_rows(&mut rows, suite);
    if suite.includes(1) {
        witness_row(&mut rows);
    }
    rows.sort_by_key(|r| if r.criterion == 0 { u8::MAX } else { r.criterion });
    rows
}

/// Pass/fail table; exit 0 iff every row passes.
pub fn cmd_paper(suite: Suite) -> CommandOutput {
    let rows = run_paper_suite(suite);
    let mut report = Report::new();
    let mut summary = vec![format!("{:<4} {:<18} {:<4} {:<48} {}", "crit", "scenario", "pass", "expected", "observed")];
    for (i, r) in rows.iter().enumerate() {
        let crit = if r.criterion == 0 { "chk".to_string() } else { r.criterion.to_string() };
        report
            .text(format!("row.{i}.criterion"), crit.clone())
            .text(format!("row.{i}.scenario"), r.scenario.clone())
            .text(format!("row.{i}.expected"), r.expected.clone())
            .text(format!("row.{i}.observed"), r.observed.clone())
            .flag(format!("row.{i}.pass"), r.pass);
        summary.push(format!(
            "{:<4} {:<18} {:<4} {:<48} {}",
            crit,
            r.scenario,
            if r.pass { "PASS" } else { "FAIL" },
            r.expected,
            r.observed
        ));
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    report.int("rows", rows.len()).int("passed", passed);
    summary.push(format!("{passed}/{} rows passed", rows.len()));
    let mut csv = String::from("criterion,scenario,pass,expected,observed\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},\"{}\",\"{}\"\n",
            r.criterion, r.scenario, r.pass, r.expected, r.observed
        ));
    }
    CommandOutput {
        report: Report::new(),
        summary,
        files: vec![
            ("paper_suite.csv".into(), csv),
            ("paper_report.txt".into(), report.render()),
        ],
        exit_code: if passed == rows.len() { EXIT_OK } else { EXIT_NEGATIVE },
    }
}
