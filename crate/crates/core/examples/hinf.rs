//! H∞ norm of the closed-loop map `T_F(z) = F(zI - A + BF)⁻¹B` and the
//! frequency at which it peaks.

use tv_consensus::analysis::{frequency_gain, hinf_norm_with_peak};
use tv_consensus::dynamics::mahler_measure;
use tv_consensus::scenarios;

fn main() -> tv_consensus::Result<()> {
    for cfg in [scenarios::example1_period4(), scenarios::example2_period4()] {
        let exp = cfg.experiment()?;
        let f = cfg.design(&exp)?.certificate.gain().clone();
        let (a, b) = (exp.dynamics.a(), exp.dynamics.b());
        let a_cl = a - b * &f;
        let (norm, theta) = hinf_norm_with_peak(&a_cl, b, &f, 1e-9)?;
        println!("{}: ||T_F|| = {norm:.6} at theta = {theta:.4}, M(A) = {:.4}", cfg.name, mahler_measure(a));
        for th in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            println!("  |T_F(e^i{th:.3})| = {:.6}", frequency_gain(&a_cl, b, &f, th));
        }
    }
    Ok(())
}
