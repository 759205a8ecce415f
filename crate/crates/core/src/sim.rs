//! Closed-loop simulation of the networked agents and of the reduced
//! disagreement system.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::observability_gramian;
use crate::dynamics::{agent_inputs, global_step, AgentDynamics, ReductionBasis};
use crate::error::{Error, Result};
use crate::graphs::{reduced_laplacian, LaplacianSchedule};
use crate::linalg::{self, Mat};
use crate::report::fmt_f64;

/// States beyond this magnitude are treated as numerical overflow.
pub const OVERFLOW_LIMIT: f64 = 1e300;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Stacked global state `vec(x₁, …, x_N)`.
    Explicit(DVector<f64>),
    /// Entries i.i.d. uniform on `[-1, 1]`.
    Random { seed: u64 },
}

impl InitialState {
    pub fn realize(&self, len: usize) -> Result<DVector<f64>> {
        match self {
            InitialState::Explicit(x) => {
                if x.len() != len {
                    return Err(Error::DimensionMismatch(format!(
                        "initial state has length {}, expected {len}",
                        x.len()
                    )));
                }
                Ok(x.clone())
            }
            InitialState::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(DVector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub dynamics: AgentDynamics,
    pub gain: Mat,
    pub mu: f64,
    pub schedule: LaplacianSchedule,
    pub basis: ReductionBasis,
    /// Number of steps K; the trace has K + 1 samples.
    pub steps: usize,
    pub initial: InitialState,
    pub tol_err: f64,
    pub divergence_cap: f64,
    /// Convergence needs the last `window` errors below `tol_err`.
    pub window: usize,
    pub record_states: bool,
}

impl SimulationConfig {
    pub fn new(
        dynamics: AgentDynamics,
        gain: Mat,
        mu: f64,
        schedule: LaplacianSchedule,
        steps: usize,
        initial: InitialState,
    ) -> Result<Self> {
        let basis = ReductionBasis::householder(schedule.n_agents())?;
        let cfg = Self {
            dynamics,
            gain,
            mu,
            schedule,
            basis,
            steps,
            initial,
            tol_err: 1e-6,
            divergence_cap: 1e8,
            window: 50,
            record_states: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidInput(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("horizon K must be >= 1".into()));
        }
        if self.gain.shape() != (self.dynamics.m(), self.dynamics.n()) {
            return Err(Error::DimensionMismatch(format!(
                "gain must be {}x{}",
                self.dynamics.m(),
                self.dynamics.n()
            )));
        }
        if self.basis.n_agents() != self.schedule.n_agents() {
            return Err(Error::DimensionMismatch(
                "reduction basis and schedule disagree on N".into(),
            ));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.schedule.n_agents()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimVerdict {
    Converged,
    Diverged,
    Undetermined,
}

impl SimVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimVerdict::Converged => "converged",
            SimVerdict::Diverged => "diverged",
            SimVerdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    /// `e(k) = maxᵢ ‖xᵢ(k) - x̄(k)‖₂`.
    pub consensus_error: Vec<f64>,
    /// `‖x̂(k)‖₂`.
    pub disagreement_norm: Vec<f64>,
    /// `maxᵢ ‖uᵢ(k)‖_∞` of the protocol inputs.
    pub input_max: Vec<f64>,
    pub states: Option<Vec<DVector<f64>>>,
    pub verdict: SimVerdict,
    pub overflow: bool,
}

impl SimulationTrace {
    /// First step after which the consensus error stays below `tol`.
    pub fn settling_step(&self, tol: f64) -> Option<usize> {
        let last_above = self.consensus_error.iter().rposition(|&e| !(e < tol));
        match last_above {
            None => Some(0),
            Some(k) if k + 1 < self.consensus_error.len() => Some(k + 1),
            Some(_) => None,
        }
    }

    /// First step with consensus error below `tol`.
    pub fn first_passage(&self, tol: f64) -> Option<usize> {
        self.consensus_error.iter().position(|&e| e < tol)
    }

    /// CSV with header `k,e,disagreement_norm[,x_1_1,...]`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, n: usize) -> std::io::Result<()> {
        write!(w, "k,e,disagreement_norm")?;
        if let Some(states) = &self.states {
            let len = states.first().map_or(0, |s| s.len());
            for idx in 0..len {
                write!(w, ",x_{}_{}", idx / n + 1, idx % n + 1)?;
            }
        }
        writeln!(w)?;
        for (k, (e, d)) in self
            .consensus_error
            .iter()
            .zip(&self.disagreement_norm)
            .enumerate()
        {
            write!(w, "{k},{},{}", fmt_f64(*e), fmt_f64(*d))?;
            if let Some(states) = &self.states {
                for v in states[k].iter() {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `maxᵢ ‖xᵢ - x̄‖₂` with `x̄` the agent average.
pub fn consensus_error(x: &DVector<f64>, n: usize) -> f64 {
    let n_agents = x.len() / n;
    let mut mean = DVector::zeros(n);
    for i in 0..n_agents {
        mean += x.rows(i * n, n);
    }
    mean /= n_agents as f64;
    (0..n_agents)
        .map(|i| (x.rows(i * n, n) - &mean).norm())
        .fold(0.0, f64::max)
}

fn classify(errors: &[f64], window: usize, tol_err: f64, diverged: bool) -> SimVerdict {
    if diverged {
        SimVerdict::Diverged
    } else if errors.len() >= window && errors[errors.len() - window..].iter().all(|&e| e < tol_err) {
        SimVerdict::Converged
    } else {
        SimVerdict::Undetermined
    }
}

/// Iterate the global closed loop for K steps.
pub fn run(config: &SimulationConfig) -> Result<SimulationTrace> {
    config.validate()?;
    let n = config.dynamics.n();
    let mut x = config.initial.realize(config.n_agents() * n)?;
    let cap = config.steps + 1;
    let mut consensus = Vec::with_capacity(cap);
    let mut disagreement = Vec::with_capacity(cap);
    let mut input_max = Vec::with_capacity(cap);
    let mut states = config.record_states.then(|| Vec::with_capacity(cap));
    let mut diverged = false;
    let mut overflow = false;
    for k in 0..=config.steps {
        let e = consensus_error(&x, n);
        consensus.push(e);
        disagreement.push(config.basis.disagreement(&x, n).norm());
        let l = config.schedule.at(k).matrix();
        let u = agent_inputs(&x, l, &config.dynamics, &config.gain, config.mu)?;
        input_max.push(u.amax());
        if let Some(s) = states.as_mut() {
            s.push(x.clone());
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_LIMIT) {
            overflow = true;
            diverged = true;
            break;
        }
        if e > config.divergence_cap {
            diverged = true;
            break;
        }
        if k < config.steps {
            x = global_step(&x, l, &config.dynamics, &config.gain, config.mu)?;
        }
    }
    Ok(SimulationTrace {
        verdict: classify(&consensus, config.window, config.tol_err, diverged),
        consensus_error: consensus,
        disagreement_norm: disagreement,
        input_max,
        states,
        overflow,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrace {
    /// `‖x̂(k)‖₂` for `k = 0..=K`.
    pub norms: Vec<f64>,
    pub verdict: SimVerdict,
}

/// Iterate `x̂⁺ = [Â - μB̂L̂_m(k)F̂] x̂` directly, starting from the
/// disagreement part of the configured initial state.
pub fn run_reduced(config: &SimulationConfig) -> Result<ReducedTrace> {
    config.validate()?;
    let n = config.dynamics.n();
    let x0 = config.initial.realize(config.n_agents() * n)?;
    let mut xhat = config.basis.disagreement(&x0, n);
    let (a, b, f) = (config.dynamics.a(), config.dynamics.b(), &config.gain);
    let nm1 = config.n_agents() - 1;
    let mut norms = Vec::with_capacity(config.steps + 1);
    let mut diverged = false;
    for k in 0..=config.steps {
        let norm = xhat.norm();
        norms.push(norm);
        if !norm.is_finite() || norm > config.divergence_cap {
            diverged = true;
            break;
        }
        if k == config.steps {
            break;
        }
        let (lhat, _) = reduced_laplacian(config.schedule.at(k), &config.basis)?;
        let y: Vec<DVector<f64>> = (0..nm1).map(|j| f * xhat.rows(j * n, n)).collect();
        let mut next = DVector::zeros(nm1 * n);
        for j in 0..nm1 {
            let mut coupled = DVector::zeros(config.dynamics.m());
            for (l, yl) in y.iter().enumerate() {
                if lhat[(j, l)] != 0.0 {
                    coupled += yl * lhat[(j, l)];
                }
            }
            let xj = a * xhat.rows(j * n, n) - b * coupled * config.mu;
            next.rows_mut(j * n, n).copy_from(&xj);
        }
        xhat = next;
    }
    Ok(ReducedTrace {
        verdict: classify(&norms, config.window, config.tol_err, diverged),
        norms,
    })
}

/// A global initial state whose disagreement part lies in the null space of
/// the observability gramian `O(0, T_o)`: the protocol stays silent over the
/// window while the agents disagree.
pub fn find_bad_initial_state(
    dynamics: &AgentDynamics,
    gain: &Mat,
    schedule: &LaplacianSchedule,
    basis: &ReductionBasis,
    t_o: usize,
    tol_pd: f64,
) -> Result<DVector<f64>> {
    let gram = observability_gramian(dynamics, gain, schedule, basis, 0, t_o, 1.0)?;
    let (vals, vecs) = linalg::sym_eigen(&gram);
    let cutoff = tol_pd * gram.trace().max(0.0);
    if vals.first().is_none_or(|&v| v > cutoff) {
        return Err(Error::FullRank);
    }
    let xhat = vecs.column(0).into_owned();
    Ok(basis.lift(&xhat, dynamics.n()))
}
