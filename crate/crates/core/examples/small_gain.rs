//! The small-gain test for neutrally unstable agents: ε from the schedule,
//! δ from ε and μ̄, then `‖T_F‖·δ < 1`.

use tv_consensus::analysis::{closed_loop_hinf, delta_bound, estimate_epsilon, SmallGainCertificate};
use tv_consensus::graphs::check_assumption_l;
use tv_consensus::scenarios;

fn main() -> tv_consensus::Result<()> {
    for cfg in [scenarios::example2_period4(), scenarios::example2_stride2(), scenarios::example2_stride3()] {
        let exp = cfg.experiment()?;
        let f = cfg.design(&exp)?.certificate.gain().clone();
        let schedule = cfg.analysis_schedule(exp.palette.clone())?;
        let period = schedule.period().unwrap_or(1);
        let l = check_assumption_l(&schedule, cfg.analysis.horizon, exp.mu, &exp.basis)?;
        let eps = estimate_epsilon(&exp.dynamics, &f, &schedule, &exp.basis, cfg.analysis.t_eps(), 0..period)?;
        let delta = delta_bound(&schedule, &exp.basis, exp.mu, l.mu_bar, eps.epsilon, 0..period)?;
        let hinf = closed_loop_hinf(&exp.dynamics, &f, cfg.tolerances.hinf)?;
        let gamma = cfg.gain.gamma.unwrap_or(f64::NAN);
        let cert = SmallGainCertificate::new(hinf, gamma, eps, exp.mu, l.mu_bar, delta, cfg.tolerances.margin);
        println!(
            "{}: eps = {:.4}, delta = {:.4} (direct {:.4}), ||T_F|| = {:.4}, product = {:.4}, certified = {}",
            cfg.name, cert.epsilon.epsilon, cert.delta.analytic, cert.delta.direct, cert.hinf_tf, cert.product, cert.verdict
        );
    }
    Ok(())
}
