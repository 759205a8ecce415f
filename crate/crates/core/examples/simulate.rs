//! Simulate four agents on a time-varying ring and write the consensus error
//! trace as CSV to stdout.

use tv_consensus::gain_design::design_stable_gain;
use tv_consensus::sim::{self, InitialState, SimulationConfig};
use tv_consensus::{scenarios, Tolerances};

fn main() -> tv_consensus::Result<()> {
    let cfg = scenarios::example1_dwell2();
    let exp = cfg.experiment()?;
    let gain = design_stable_gain(&exp.dynamics, &Tolerances::default())?.f;
    let schedule = cfg.schedule(exp.palette.clone(), 42)?;
    let sc = SimulationConfig::new(exp.dynamics, gain, exp.mu, schedule, 400, InitialState::Random { seed: 42 })?;
    let trace = sim::run(&sc)?;
    eprintln!(
        "verdict: {}, first step below 1e-6: {:?}",
        trace.verdict.as_str(),
        trace.first_passage(1e-6)
    );
    trace.write_csv(std::io::stdout().lock(), sc.dynamics.n())?;
    Ok(())
}
