//! Design a consensus gain for a neutrally stable agent (rotation by π/4)
//! and for a neutrally unstable one (triple integrator chain).
//!
//! Run with `cargo run --example design_gains`.

use tv_consensus::dynamics::AgentDynamics;
use tv_consensus::error::Error;
use tv_consensus::gain_design::{design_stable_gain, design_unstable_gain, RiccatiOptions};
use tv_consensus::linalg::to_rows;
use tv_consensus::{Mat, Tolerances};

fn main() -> tv_consensus::Result<()> {
    let tol = Tolerances::default();
    let c = std::f64::consts::FRAC_1_SQRT_2;

    let rotation = AgentDynamics::new(
        Mat::from_row_slice(2, 2, &[c, c, -c, c]),
        Mat::from_row_slice(2, 1, &[0.0, 1.0]),
    )?;
    let stable = design_stable_gain(&rotation, &tol)?;
    println!("neutrally stable agent");
    println!("  F = {:.4?}", to_rows(&stable.f));
    println!("  rho = {:.4}, slack = {:.3e}, spectral radius of A-BF = {:.4}",
        stable.rho, stable.slack, stable.schur_radius);

    let chain = AgentDynamics::new(
        Mat::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
        Mat::from_row_slice(3, 1, &[-1.0, 1.0, -1.0]),
    )?;
    // The H∞ and B'XB bounds may fail for a given γ; the certificate is
    // returned either way so it can be inspected.
    let unstable = match design_unstable_gain(&chain, 1.1, 1e-5, RiccatiOptions::default(), &tol) {
        Ok(cert) => cert,
        Err(Error::GainBoundViolated { certificate, .. } | Error::HinfBoundViolated { certificate, .. }) => {
            println!("note: bound check failed, showing the computed certificate");
            *certificate
        }
        Err(e) => return Err(e),
    };
    println!("neutrally unstable agent, gamma = {}", unstable.gamma);
    println!("  F = {:.4?}", to_rows(&unstable.f));
    println!("  X = {:.4?}", to_rows(&unstable.x));
    println!("  iterations = {}, ARE residual = {:.2e}", unstable.iterations, unstable.are_residual);
    println!("  ||T_F|| = {:.4}, gamma^2 - max eig B'XB = {:.4}", unstable.hinf_tf, unstable.gain_margin);
    Ok(())
}
