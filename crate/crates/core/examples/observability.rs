//! Observability gramians of the reduced network under two schedules: one
//! that hides part of the disagreement from the protocol and one that does not.

use tv_consensus::analysis::{check_observability, k0_scan_range, numerical_rank};
use tv_consensus::scenarios;

fn main() -> tv_consensus::Result<()> {
    for cfg in [scenarios::example1_period4(), scenarios::example1_dwell2()] {
        let exp = cfg.experiment()?;
        let gain = cfg.design(&exp)?.certificate.gain().clone();
        let schedule = cfg.analysis_schedule(exp.palette.clone())?;
        let (range, _) = k0_scan_range(&schedule, cfg.analysis.k0_scan);
        let report = check_observability(
            &exp.dynamics,
            &gain,
            &schedule,
            &exp.basis,
            cfg.analysis.t_o,
            range,
            exp.mu,
            cfg.tolerances.pd,
        )?;
        println!("{} (T_o = {})", cfg.name, report.t_o);
        for s in &report.samples {
            println!("  k0 = {}: min eig = {:.3e}, rank = {}/{}", s.k0, s.min_eigenvalue, s.rank, report.dimension);
        }
        println!("  uniformly observable: {}", report.weak_verdict);
        let gram = tv_consensus::analysis::observability_gramian(
            &exp.dynamics, &gain, &schedule, &exp.basis, 0, cfg.analysis.t_o, exp.mu,
        )?;
        let eig = tv_consensus::linalg::sym_eigen(&gram).0;
        println!("  O(0, T_o) has numerical rank {}", numerical_rank(&eig));
    }
    Ok(())
}
