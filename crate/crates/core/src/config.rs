//! TOML experiment configuration.
//!
//! Unknown keys are rejected at every level. Validation errors name the
//! offending key path, e.g. `gain.gamma`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentDynamics, ReductionBasis};
use crate::error::{Error, Result};
use crate::gain_design::{
    design_stable_gain, design_unstable_gain, GainCertificate, RiccatiOptions,
};
use crate::graphs::{Laplacian, LaplacianSchedule, ScheduleKind};
use crate::linalg::{self, Mat};
use crate::report::Report;
use crate::sim::{InitialState, SimulationConfig};
use crate::tolerances::Tolerances;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub dynamics: DynamicsSection,
    pub gain: GainSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    /// Row-major n×n.
    pub a: Rows,
    /// Row-major n×m.
    pub b: Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    Stable,
    Unstable,
    Explicit,
}

impl GainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GainMode::Stable => "stable",
            GainMode::Unstable => "unstable",
            GainMode::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSection {
    pub mode: GainMode,
    /// Required for `unstable`.
    pub gamma: Option<f64>,
    /// Required for `unstable`.
    pub eps_gamma: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Required for `explicit`; row-major m×n.
    pub f: Option<Rows>,
}

fn default_max_iter() -> usize {
    RiccatiOptions::default().max_iter
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub mu: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self { mu: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKindName {
    Constant,
    Periodic,
    Dwell,
    Random,
    Sparse,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleKindName,
    /// List of N×N Laplacians, each row-major.
    pub palette: Vec<Rows>,
    /// Steps each palette entry is held (`dwell`).
    pub dwell: Option<usize>,
    /// Spacing between active graphs (`sparse`).
    pub stride: Option<usize>,
    /// Seed of a `random` schedule. When absent each simulation run uses its
    /// own seed, and checks use the first simulation seed.
    pub seed: Option<u64>,
    /// Palette indices for `custom`; `-1` stands for the empty graph.
    pub sequence: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    /// Optional N×(N-1) orthonormal complement of the consensus direction.
    /// The Householder complement is used when absent.
    pub complement: Option<Rows>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Connectivity window T_c.
    pub t_c: usize,
    /// Observability window T_o.
    pub t_o: usize,
    /// Window used for the ε estimate; defaults to `t_c`.
    pub t_eps: Option<usize>,
    /// Window starts scanned for aperiodic schedules.
    pub k0_scan: usize,
    /// Horizon scanned by the connectivity and Assumption (L) checks on
    /// aperiodic schedules.
    pub horizon: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            t_c: 4,
            t_o: 3,
            t_eps: None,
            k0_scan: 200,
            horizon: 200,
        }
    }
}

impl AnalysisSection {
    pub fn t_eps(&self) -> usize {
        self.t_eps.unwrap_or(self.t_c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub steps: usize,
    pub seeds: Vec<u64>,
    /// Explicit stacked initial state; overrides `seeds` when present.
    pub initial: Option<Vec<f64>>,
    pub tol_err: f64,
    pub divergence_cap: f64,
    pub window: usize,
    pub record_states: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            steps: 2000,
            seeds: vec![1, 2, 3, 4, 5],
            initial: None,
            tol_err: 1e-6,
            divergence_cap: 1e8,
            window: 50,
            record_states: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for reports and CSV files; `--out` takes precedence.
    pub dir: Option<String>,
}

fn cfg_err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

fn matrix(path: &str, rows: &Rows) -> Result<Mat> {
    linalg::from_rows(rows).map_err(|e| cfg_err(path, e))
}

/// Everything a pipeline needs, built and validated from a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dynamics: AgentDynamics,
    pub palette: Vec<Laplacian>,
    pub basis: ReductionBasis,
    pub mu: f64,
}

/// A designed gain plus the certificate conditions it failed, if any.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub certificate: GainCertificate,
    /// Bound violations reported by the designer. The certificate is still
    /// usable for analysis and simulation.
    pub violations: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Override one tolerance by field name, e.g. `("pd", 1e-8)`.
    pub fn set_tolerance(&mut self, name: &str, value: f64) -> Result<()> {
        let t = &mut self.tolerances;
        let slot = match name {
            "spec" => &mut t.spec,
            "jordan" => &mut t.jordan,
            "orth" => &mut t.orth,
            "row" => &mut t.row,
            "conn" => &mut t.conn,
            "psd" => &mut t.psd,
            "lyap" => &mut t.lyap,
            "are" => &mut t.are,
            "pd" => &mut t.pd,
            "margin" => &mut t.margin,
            "hinf" => &mut t.hinf,
            "err" => &mut self.simulation.tol_err,
            _ => return Err(cfg_err("tolerances", format!("unknown tolerance `{name}`"))),
        };
        if !(value >= 0.0) {
            return Err(cfg_err(&format!("tolerances.{name}"), "must be >= 0"));
        }
        *slot = value;
        Ok(())
    }

    /// Schema checks that do not need any linear algebra.
    pub fn validate(&self) -> Result<()> {
        match self.gain.mode {
            GainMode::Stable => {}
            GainMode::Unstable => {
                let g = self
                    .gain
                    .gamma
                    .ok_or_else(|| cfg_err("gain.gamma", "required for mode = \"unstable\""))?;
                if !(g > 1.0) {
                    return Err(cfg_err("gain.gamma", format!("must be > 1, got {g}")));
                }
                let e = self
                    .gain
                    .eps_gamma
                    .ok_or_else(|| cfg_err("gain.eps_gamma", "required for mode = \"unstable\""))?;
                if !(e > 0.0) {
                    return Err(cfg_err("gain.eps_gamma", format!("must be > 0, got {e}")));
                }
            }
            GainMode::Explicit => {
                if self.gain.f.is_none() {
                    return Err(cfg_err("gain.f", "required for mode = \"explicit\""));
                }
            }
        }
        if !(self.coupling.mu > 0.0) {
            return Err(cfg_err("coupling.mu", "must be > 0"));
        }
        let s = &self.schedule;
        if s.palette.is_empty() {
            return Err(cfg_err("schedule.palette", "must not be empty"));
        }
        match s.kind {
            ScheduleKindName::Dwell if s.dwell.is_none_or(|d| d == 0) => {
                return Err(cfg_err("schedule.dwell", "required and >= 1 for kind = \"dwell\""))
            }
            ScheduleKindName::Sparse if s.stride.is_none_or(|d| d == 0) => {
                return Err(cfg_err("schedule.stride", "required and >= 1 for kind = \"sparse\""))
            }
            ScheduleKindName::Custom => {
                let seq = s
                    .sequence
                    .as_ref()
                    .ok_or_else(|| cfg_err("schedule.sequence", "required for kind = \"custom\""))?;
                if seq.is_empty() || seq.iter().any(|&i| i < -1 || i >= s.palette.len() as i64) {
                    return Err(cfg_err(
                        "schedule.sequence",
                        "entries must be palette indices or -1",
                    ));
                }
            }
            _ => {}
        }
        let a = &self.analysis;
        if a.t_c == 0 || a.t_eps() == 0 {
            return Err(cfg_err("analysis.t_c", "windows must be >= 1"));
        }
        if a.horizon < a.t_c {
            return Err(cfg_err("analysis.horizon", "must be >= t_c"));
        }
        let sim = &self.simulation;
        if sim.steps == 0 {
            return Err(cfg_err("simulation.steps", "must be >= 1"));
        }
        if sim.seeds.is_empty() && sim.initial.is_none() {
            return Err(cfg_err("simulation.seeds", "need at least one seed or an initial state"));
        }
        if sim.window == 0 || !(sim.tol_err > 0.0) || !(sim.divergence_cap > 0.0) {
            return Err(cfg_err(
                "simulation",
                "window, tol_err and divergence_cap must be positive",
            ));
        }
        Ok(())
    }

    /// Matrices, palette and basis, with dimension checks.
    pub fn experiment(&self) -> Result<Experiment> {
        let a = matrix("dynamics.a", &self.dynamics.a)?;
        let b = matrix("dynamics.b", &self.dynamics.b)?;
        let dynamics = AgentDynamics::new(a, b).map_err(|e| cfg_err("dynamics", e))?;
        let palette = self
            .schedule
            .palette
            .iter()
            .enumerate()
            .map(|(i, rows)| {
                let path = format!("schedule.palette[{i}]");
                Laplacian::new(matrix(&path, rows)?, self.tolerances.row).map_err(|e| cfg_err(&path, e))
            })
            .collect::<Result<Vec<_>>>()?;
        let n_agents = palette[0].n();
        if n_agents < 2 {
            return Err(cfg_err("schedule.palette", "need at least two agents"));
        }
        let basis = match &self.basis.complement {
            Some(rows) => ReductionBasis::from_complement(matrix("basis.complement", rows)?, self.tolerances.orth)
                .map_err(|e| cfg_err("basis.complement", e))?,
            None => ReductionBasis::householder(n_agents)?,
        };
        if basis.n_agents() != n_agents {
            return Err(cfg_err("basis.complement", "size does not match the palette"));
        }
        Ok(Experiment {
            dynamics,
            palette,
            basis,
            mu: self.coupling.mu,
        })
    }

    /// Schedule for a given seed (used only by `random` schedules without a
    /// fixed seed).
    pub fn schedule(&self, palette: Vec<Laplacian>, run_seed: u64) -> Result<LaplacianSchedule> {
        let s = &self.schedule;
        let kind = match s.kind {
            ScheduleKindName::Constant => ScheduleKind::Constant,
            ScheduleKindName::Periodic => ScheduleKind::Periodic { dwell: 1 },
            ScheduleKindName::Dwell => ScheduleKind::Periodic {
                dwell: s.dwell.unwrap_or(1),
            },
            ScheduleKindName::Random => ScheduleKind::RandomUniform {
                seed: s.seed.unwrap_or(run_seed),
            },
            ScheduleKindName::Sparse => ScheduleKind::Sparse {
                stride: s.stride.unwrap_or(1),
            },
            ScheduleKindName::Custom => ScheduleKind::Custom {
                sequence: s
                    .sequence
                    .iter()
                    .flatten()
                    .map(|&i| usize::try_from(i).ok())
                    .collect(),
            },
        };
        LaplacianSchedule::new(kind, palette).map_err(|e| cfg_err("schedule", e))
    }

    /// Schedule used by the analysis commands.
    pub fn analysis_schedule(&self, palette: Vec<Laplacian>) -> Result<LaplacianSchedule> {
        self.schedule(palette, self.simulation.seeds.first().copied().unwrap_or(0))
    }

    /// Run the configured gain designer. Bound violations of the unstable
    /// design are recorded rather than fatal so the gain can still be
    /// analysed and simulated.
    pub fn design(&self, exp: &Experiment) -> Result<DesignOutcome> {
        let tol = &self.tolerances;
        match self.gain.mode {
            GainMode::Stable => Ok(DesignOutcome {
                certificate: GainCertificate::Stable(design_stable_gain(&exp.dynamics, tol)?),
                violations: Vec::new(),
            }),
            GainMode::Unstable => {
                let opts = RiccatiOptions {
                    max_iter: self.gain.max_iter,
                    tol: tol.are,
                };
                let gamma = self.gain.gamma.unwrap_or_default();
                let eps = self.gain.eps_gamma.unwrap_or_default();
                let mut violations = Vec::new();
                let cert = match design_unstable_gain(&exp.dynamics, gamma, eps, opts, tol) {
                    Ok(c) => c,
                    Err(Error::GainBoundViolated { max_eig, bound, certificate }) => {
                        violations.push(format!("gain_bound: max eig of B'XB {max_eig} >= gamma^2 = {bound}"));
                        // The designer stops at the first violation; the H∞ check still applies.
                        if certificate.hinf_tf >= gamma {
                            violations.push(format!("hinf_bound: ||T_F|| {} >= gamma = {gamma}", certificate.hinf_tf));
                        }
                        *certificate
                    }
                    Err(Error::HinfBoundViolated { hinf, gamma, certificate }) => {
                        violations.push(format!("hinf_bound: ||T_F|| {hinf} >= gamma = {gamma}"));
                        *certificate
                    }
                    Err(e) => return Err(e),
                };
                Ok(DesignOutcome {
                    certificate: GainCertificate::Unstable(cert),
                    violations,
                })
            }
            GainMode::Explicit => {
                let f = matrix("gain.f", self.gain.f.as_ref().expect("validated"))?;
                if f.shape() != (exp.dynamics.m(), exp.dynamics.n()) {
                    return Err(cfg_err(
                        "gain.f",
                        format!("must be {}x{}", exp.dynamics.m(), exp.dynamics.n()),
                    ));
                }
                Ok(DesignOutcome {
                    certificate: GainCertificate::Explicit(f),
                    violations: Vec::new(),
                })
            }
        }
    }

    /// One simulation config per run: each seed, or the explicit state.
    pub fn simulation_runs(&self, exp: &Experiment, gain: &Mat) -> Result<Vec<(String, SimulationConfig)>> {
        let sim = &self.simulation;
        let runs: Vec<(String, u64, InitialState)> = match &sim.initial {
            Some(x0) => vec![(
                "explicit".into(),
                sim.seeds.first().copied().unwrap_or(0),
                InitialState::Explicit(nalgebra::DVector::from_column_slice(x0)),
            )],
            None => sim
                .seeds
                .iter()
                .map(|&s| (format!("seed{s}"), s, InitialState::Random { seed: s }))
                .collect(),
        };
        runs.into_iter()
            .map(|(label, seed, initial)| {
                let schedule = self.schedule(exp.palette.clone(), seed)?;
                let cfg = SimulationConfig {
                    dynamics: exp.dynamics.clone(),
                    gain: gain.clone(),
                    mu: exp.mu,
                    schedule,
                    basis: exp.basis.clone(),
                    steps: sim.steps,
                    initial,
                    tol_err: sim.tol_err,
                    divergence_cap: sim.divergence_cap,
                    window: sim.window,
                    record_states: sim.record_states,
                };
                cfg.validate().map_err(|e| cfg_err("simulation", e))?;
                Ok((label, cfg))
            })
            .collect()
    }

    /// Resolved settings, defaults included, for the report header.
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.text("config.name", self.name.clone())
            .text("config.gain.mode", self.gain.mode.as_str());
        if let Some(g) = self.gain.gamma {
            r.num("config.gain.gamma", g);
        }
        if let Some(e) = self.gain.eps_gamma {
            r.num("config.gain.eps_gamma", e);
        }
        r.int("config.gain.max_iter", self.gain.max_iter)
            .num("config.coupling.mu", self.coupling.mu)
            .text("config.schedule.kind", format!("{:?}", self.schedule.kind).to_lowercase())
            .int("config.schedule.palette_len", self.schedule.palette.len());
        if let Some(d) = self.schedule.dwell {
            r.int("config.schedule.dwell", d);
        }
        if let Some(s) = self.schedule.stride {
            r.int("config.schedule.stride", s);
        }
        if let Some(s) = self.schedule.seed {
            r.text("config.schedule.seed", s.to_string());
        }
        r.text(
            "config.basis",
            if self.basis.complement.is_some() { "custom" } else { "householder" },
        )
        .int("config.analysis.t_c", self.analysis.t_c)
        .int("config.analysis.t_o", self.analysis.t_o)
        .int("config.analysis.t_eps", self.analysis.t_eps())
        .int("config.analysis.k0_scan", self.analysis.k0_scan)
        .int("config.analysis.horizon", self.analysis.horizon)
        .int("config.simulation.steps", self.simulation.steps)
        .text(
            "config.simulation.seeds",
            self.simulation
                .seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        )
        .num("config.simulation.tol_err", self.simulation.tol_err)
        .num("config.simulation.divergence_cap", self.simulation.divergence_cap)
        .int("config.simulation.window", self.simulation.window);
        let t = &self.tolerances;
        for (k, v) in [
            ("spec", t.spec),
            ("jordan", t.jordan),
            ("orth", t.orth),
            ("row", t.row),
            ("conn", t.conn),
            ("psd", t.psd),
            ("lyap", t.lyap),
            ("are", t.are),
            ("pd", t.pd),
            ("margin", t.margin),
            ("hinf", t.hinf),
        ] {
            r.num(format!("config.tolerances.{k}"), v);
        }
        r
    }
}
