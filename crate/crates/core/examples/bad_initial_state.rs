//! When the observability gramian is singular, an initial disagreement in its
//! null space is invisible to the protocol: the inputs stay at zero and the
//! agents never agree.

use tv_consensus::sim::{self, find_bad_initial_state, InitialState, SimulationConfig};
use tv_consensus::scenarios;

fn main() -> tv_consensus::Result<()> {
    let cfg = scenarios::example1_period4();
    let exp = cfg.experiment()?;
    let gain = cfg.design(&exp)?.certificate.gain().clone();
    let schedule = cfg.analysis_schedule(exp.palette.clone())?;
    let x0 = find_bad_initial_state(&exp.dynamics, &gain, &schedule, &exp.basis, cfg.analysis.t_o, cfg.tolerances.pd)?;
    println!("hidden initial state: {:.4?}", x0.as_slice());

    let mut sc = SimulationConfig::new(exp.dynamics, gain, exp.mu, schedule, 64, InitialState::Explicit(x0))?;
    sc.basis = exp.basis;
    let trace = sim::run(&sc)?;
    for k in (0..=64).step_by(8) {
        println!("k = {k:2}: error = {:.6}, max |u| = {:.2e}", trace.consensus_error[k], trace.input_max[k]);
    }
    Ok(())
}
