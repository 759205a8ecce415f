//! Design, check and simulate pipelines behind the command-line front end.
//!
//! Each command returns a [`CommandOutput`]: a flat report, extra files to
//! write, and the process exit code. Nothing here prints or touches the
//! filesystem.

use std::time::Instant;

use crate::analysis::{
    check_observability, closed_loop_hinf, consensus_verdict, delta_bound, estimate_epsilon,
    k0_scan_range, CertificateBundle, ConsensusVerdict, ObservabilityReport, SmallGainCertificate,
    Verdict,
};
use crate::config::{DesignOutcome, Experiment, ExperimentConfig};
use crate::dynamics::{validate_assumption_a, SpectralClassification};
use crate::error::{Error, Result};
use crate::gain_design::{observability_rank, GainCertificate};
use crate::graphs::{
    check_assumption_l, check_uniform_connectivity, AssumptionLReport, ConnectivityReport,
    LaplacianSchedule,
};
use crate::report::{matrix_csv, Report};
use crate::sim::{self, SimVerdict, SimulationTrace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;

#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub report: Report,
    /// Lines printed after the report, e.g. the `VERDICT` summary.
    pub summary: Vec<String>,
    /// `(file name, contents)` written into the output directory.
    pub files: Vec<(String, String)>,
    pub exit_code: i32,
}

impl CommandOutput {
    pub fn stdout(&self) -> String {
        let mut s = self.report.render();
        for line in &self.summary {
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

/// Wall-clock timings are kept apart from the report so that reports stay
/// byte-identical across runs; callers add them on request.
#[derive(Debug, Clone, Default)]
pub struct Timings(pub Vec<(&'static str, f64)>);

impl Timings {
    fn time<T>(&mut self, label: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((label, start.elapsed().as_secs_f64() * 1e3));
        out
    }

    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        for (label, ms) in &self.0 {
            r.text(format!("timing.{label}_ms"), format!("{ms:.3}"));
        }
        r
    }
}

fn spectral_report(class: &std::result::Result<SpectralClassification, Error>) -> Report {
    let mut r = Report::new();
    match class {
        Ok(c) => {
            r.text("assumption_a", "holds")
                .flag("assumption_a.semi_simple", c.semi_simple)
                .num("assumption_a.mahler_measure", c.mahler_measure)
                .int("assumption_a.controllability_index", c.controllability_index);
        }
        Err(e) => {
            r.text("assumption_a", "violated").text("assumption_a.reason", e.to_string());
        }
    }
    r
}

fn gain_report(outcome: &DesignOutcome) -> Report {
    let mut r = Report::new();
    match &outcome.certificate {
        GainCertificate::Stable(c) => {
            r.text("gain.mode", "stable")
                .matrix("gain.f", &c.f)
                .matrix("gain.x", &c.x)
                .num("gain.rho", c.rho)
                .matrix("gain.s_a", &c.s_a)
                .num("gain.schur_radius", c.schur_radius)
                .num("gain.slack", c.slack)
                .num("gain.lyapunov_residual", c.lyapunov_residual);
        }
        GainCertificate::Unstable(c) => {
            r.text("gain.mode", "unstable")
                .matrix("gain.f", &c.f)
                .matrix("gain.x", &c.x)
                .num("gain.gamma", c.gamma)
                .num("gain.eps_gamma", c.eps_gamma)
                .num("gain.hinf_tf", c.hinf_tf)
                .num("gain.gain_margin", c.gain_margin)
                .num("gain.schur_radius", c.schur_radius)
                .int("gain.iterations", c.iterations)
                .num("gain.are_residual", c.are_residual)
                .int("gain.monotonicity_violations", c.monotonicity_violations);
        }
        GainCertificate::Explicit(f) => {
            r.text("gain.mode", "explicit").matrix("gain.f", f);
        }
    }
    r.int("gain.violations", outcome.violations.len());
    for (i, v) in outcome.violations.iter().enumerate() {
        r.text(format!("gain.violation.{i}"), v.clone());
    }
    r
}

fn gain_files(cert: &GainCertificate) -> Vec<(String, String)> {
    let mut files = vec![("gain_F.csv".to_string(), matrix_csv(cert.gain()))];
    match cert {
        GainCertificate::Stable(c) => files.push(("gain_X.csv".into(), matrix_csv(&c.x))),
        GainCertificate::Unstable(c) => files.push(("gain_X.csv".into(), matrix_csv(&c.x))),
        GainCertificate::Explicit(_) => {}
    }
    files
}

/// Print F and its certificate; exit 1 when any certificate bound fails.
pub fn cmd_design(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let exp = cfg.experiment()?;
    let mut report = cfg.to_report();
    let class = validate_assumption_a(&exp.dynamics, cfg.tolerances.spec, cfg.tolerances.jordan);
    report.extend("", &spectral_report(&class));
    let outcome = cfg.design(&exp)?;
    report.extend("", &gain_report(&outcome));
    report.int(
        "gain.observability_rank",
        observability_rank(exp.dynamics.a(), outcome.certificate.gain()),
    );
    Ok(CommandOutput {
        exit_code: if outcome.violations.is_empty() { EXIT_OK } else { EXIT_NEGATIVE },
        files: gain_files(&outcome.certificate),
        summary: Vec::new(),
        report,
    })
}

/// Everything `check` computes, before rendering.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub assumption_a: bool,
    pub connectivity: ConnectivityReport,
    pub assumption_l: AssumptionLReport,
    pub design: DesignOutcome,
    /// `None` when the closed loop is not Schur.
    pub hinf_tf: Option<f64>,
    pub observability: ObservabilityReport,
    pub small_gain: Option<SmallGainCertificate>,
    pub verdict: ConsensusVerdict,
    pub report: Report,
}

impl CheckResult {
    pub fn verdict_line(&self) -> String {
        format!(
            "VERDICT theorem1={} theorem2={}",
            self.verdict.theorem1, self.verdict.theorem2
        )
    }
}

fn small_gain(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    schedule: &LaplacianSchedule,
    cert: &GainCertificate,
    l_report: &AssumptionLReport,
    hinf_tf: f64,
) -> Result<Option<SmallGainCertificate>> {
    let GainCertificate::Unstable(u) = cert else {
        return Ok(None);
    };
    if !l_report.holds {
        return Ok(None);
    }
    let (range, _) = k0_scan_range(schedule, cfg.analysis.k0_scan);
    let eps = estimate_epsilon(
        &exp.dynamics,
        &u.f,
        schedule,
        &exp.basis,
        cfg.analysis.t_eps(),
        range,
    )?;
    let ks = 0..schedule.period().unwrap_or(cfg.analysis.horizon);
    let delta = delta_bound(schedule, &exp.basis, exp.mu, l_report.mu_bar, eps.epsilon, ks)?;
    Ok(Some(SmallGainCertificate::new(
        hinf_tf,
        u.gamma,
        eps,
        exp.mu,
        l_report.mu_bar,
        delta,
        cfg.tolerances.margin,
    )))
}

/// Assumptions, connectivity, gain certificate, observability and the
/// consensus verdicts. No simulation.
pub fn check(cfg: &ExperimentConfig, timings: &mut Timings) -> Result<CheckResult> {
    let tol = &cfg.tolerances;
    let exp = cfg.experiment()?;
    let schedule = cfg.analysis_schedule(exp.palette.clone())?;
    let mut report = cfg.to_report();

    let class = timings.time("assumption_a", || {
        validate_assumption_a(&exp.dynamics, tol.spec, tol.jordan)
    });
    report.extend("", &spectral_report(&class));

    let connectivity = timings.time("connectivity", || {
        check_uniform_connectivity(&schedule, cfg.analysis.t_c, cfg.analysis.horizon, tol.conn)
    })?;
    report
        .int("connectivity.window", connectivity.window)
        .num("connectivity.min_lambda2", connectivity.min_lambda2)
        .int("connectivity.argmin_k", connectivity.argmin_k)
        .int("connectivity.scanned", connectivity.lambda2.len())
        .flag("connectivity.exhaustive", connectivity.exhaustive)
        .flag("connectivity.uniformly_connected", connectivity.uniformly_connected);

    let assumption_l = timings.time("assumption_l", || {
        check_assumption_l(&schedule, cfg.analysis.horizon, exp.mu, &exp.basis)
    })?;
    if assumption_l.mu_bar.is_finite() {
        report.num("assumption_l.mu_bar", assumption_l.mu_bar);
    } else {
        report.text("assumption_l.mu_bar", "unconstrained");
    }
    report
        .int("assumption_l.argmin_k", assumption_l.argmin_k)
        .num("assumption_l.mu", assumption_l.mu)
        .flag("assumption_l.holds", assumption_l.holds)
        .int("assumption_l.scanned", assumption_l.scanned)
        .num("assumption_l.max_ell_norm", assumption_l.max_ell_norm);
    if assumption_l.min_residual_eig.is_finite() {
        report.num("assumption_l.min_residual_eig", assumption_l.min_residual_eig);
    }

    let design = timings.time("design", || cfg.design(&exp))?;
    report.extend("", &gain_report(&design));
    let f = design.certificate.gain().clone();

    let hinf_tf = match timings.time("hinf", || closed_loop_hinf(&exp.dynamics, &f, tol.hinf)) {
        Ok(v) => Some(v),
        Err(Error::NotSchur { .. }) => None,
        Err(e) => return Err(e),
    };
    match hinf_tf {
        Some(v) => report.num("hinf.t_f", v),
        None => report.text("hinf.t_f", "unbounded"),
    };

    let (range, _) = k0_scan_range(&schedule, cfg.analysis.k0_scan);
    let observability = timings.time("observability", || {
        check_observability(
            &exp.dynamics,
            &f,
            &schedule,
            &exp.basis,
            cfg.analysis.t_o,
            range,
            exp.mu,
            tol.pd,
        )
    })?;
    let min_rank = observability.samples.iter().map(|s| s.rank).min().unwrap_or(0);
    report
        .int("observability.t_o", observability.t_o)
        .int("observability.dimension", observability.dimension)
        .int("observability.samples", observability.samples.len())
        .int("observability.min_rank", min_rank)
        .num("observability.eps_o", observability.eps_o)
        .flag("observability.weak", observability.weak_verdict)
        .flag("observability.strong", observability.strong_verdict)
        .flag("observability.exhaustive", observability.exhaustive);

    let small_gain = match hinf_tf {
        Some(h) => timings.time("small_gain", || {
            small_gain(cfg, &exp, &schedule, &design.certificate, &assumption_l, h)
        })?,
        None => None,
    };
    if let Some(sg) = &small_gain {
        report
            .num("small_gain.epsilon", sg.epsilon.epsilon)
            .int("small_gain.epsilon_window", sg.epsilon.t_c)
            .int("small_gain.epsilon_argmin_k0", sg.epsilon.argmin_k0)
            .text("small_gain.signal_class", sg.epsilon.signal_class)
            .num("small_gain.delta_analytic", sg.delta.analytic)
            .num("small_gain.delta_direct", sg.delta.direct)
            .num("small_gain.gamma_delta", sg.gamma_delta)
            .num("small_gain.product", sg.product)
            .flag("small_gain.product_below_one", sg.verdict);
    }

    let assumption_a = class.is_ok();
    let verdict = match (&design.certificate, &small_gain) {
        (GainCertificate::Unstable(_), None) => ConsensusVerdict {
            theorem1: Verdict::NotApplicable,
            theorem2: Verdict::No,
            conditions: vec![
                ("assumption_a", assumption_a),
                ("assumption_l", assumption_l.holds),
                ("closed_loop_schur", hinf_tf.is_some()),
            ],
        },
        _ => consensus_verdict(&CertificateBundle {
            assumption_a,
            assumption_l: &assumption_l,
            gain: &design.certificate,
            observability: Some(&observability),
            small_gain: small_gain.as_ref(),
        })?,
    };
    for (name, holds) in &verdict.conditions {
        report.flag(format!("condition.{name}"), *holds);
    }
    report
        .text("verdict.theorem1", verdict.theorem1.as_str())
        .text("verdict.theorem2", verdict.theorem2.as_str());

    Ok(CheckResult {
        assumption_a,
        connectivity,
        assumption_l,
        design,
        hinf_tf,
        observability,
        small_gain,
        verdict,
        report,
    })
}

/// Run `check` and add the `VERDICT` line; exit 1 on a negative verdict.
pub fn cmd_check(cfg: &ExperimentConfig, timings: &mut Timings) -> Result<CommandOutput> {
    let result = check(cfg, timings)?;
    let negative = [result.verdict.theorem1, result.verdict.theorem2].contains(&Verdict::No);
    let mut files = gain_files(&result.design.certificate);
    let mut lambda = String::from("k,lambda2\n");
    for (k, v) in &result.connectivity.lambda2 {
        lambda.push_str(&format!("{k},{}\n", crate::report::fmt_f64(*v)));
    }
    files.push(("connectivity.csv".into(), lambda));
    Ok(CommandOutput {
        summary: vec![result.verdict_line()],
        exit_code: if negative { EXIT_NEGATIVE } else { EXIT_OK },
        files,
        report: result.report,
    })
}

/// Simulations of every configured run, in config order.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<(String, SimulationTrace)>> {
    let exp = cfg.experiment()?;
    let outcome = cfg.design(&exp)?;
    let runs = cfg.simulation_runs(&exp, outcome.certificate.gain())?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(label, sc)| scope.spawn(move || sim::run(sc).map(|t| (label.clone(), t))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

/// Trace CSV per run plus a verdict per run; exit 1 unless all converge.
pub fn cmd_simulate(cfg: &ExperimentConfig, timings: &mut Timings) -> Result<CommandOutput> {
    let traces = timings.time("simulate", || simulate(cfg))?;
    let n = crate::linalg::from_rows(&cfg.dynamics.a)?.nrows();
    let mut report = cfg.to_report();
    let mut files = Vec::new();
    let mut summary = Vec::new();
    let tol = cfg.simulation.tol_err;
    for (label, trace) in &traces {
        let key = format!("sim.{label}");
        report
            .text(format!("{key}.verdict"), trace.verdict.as_str())
            .int(format!("{key}.steps"), trace.consensus_error.len() - 1)
            .num(format!("{key}.initial_error"), trace.consensus_error[0])
            .num(
                format!("{key}.final_error"),
                *trace.consensus_error.last().expect("non-empty trace"),
            )
            .flag(format!("{key}.overflow"), trace.overflow);
        match trace.first_passage(tol) {
            Some(k) => report.int(format!("{key}.first_passage"), k),
            None => report.text(format!("{key}.first_passage"), "none"),
        };
        let mut csv = Vec::new();
        trace.write_csv(&mut csv, n)?;
        files.push((
            format!("trace_{label}.csv"),
            String::from_utf8(csv).expect("CSV is UTF-8"),
        ));
        summary.push(format!("SIM {label} {}", trace.verdict.as_str()));
    }
    let all_converged = traces.iter().all(|(_, t)| t.verdict == SimVerdict::Converged);
    Ok(CommandOutput {
        report,
        summary,
        files,
        exit_code: if all_converged { EXIT_OK } else { EXIT_NEGATIVE },
    })
}
