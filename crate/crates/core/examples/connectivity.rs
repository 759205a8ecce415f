//! Uniform connectivity and the coupling bound μ̄ for a ring visited one
//! edge at a time.

use tv_consensus::dynamics::build_reduction;
use tv_consensus::graphs::{check_assumption_l, check_uniform_connectivity, Laplacian, LaplacianSchedule};
use tv_consensus::Mat;

fn edge(n: usize, i: usize, j: usize) -> Laplacian {
    let mut gains = Mat::zeros(n, n);
    gains[(i, j)] = 1.0;
    gains[(j, i)] = 1.0;
    Laplacian::from_edge_gains(&gains).expect("valid gains")
}

fn main() -> tv_consensus::Result<()> {
    let ring: Vec<Laplacian> = (0..4).map(|i| edge(4, i, (i + 1) % 4)).collect();
    let basis = build_reduction(4)?;

    for (label, schedule) in [
        ("period 4", LaplacianSchedule::periodic(ring.clone())?),
        ("sparse, stride 3", LaplacianSchedule::sparse(ring.clone(), 3)?),
    ] {
        println!("{label}");
        for t_c in [3, 4, 12] {
            let report = check_uniform_connectivity(&schedule, t_c, 200, 1e-9)?;
            println!(
                "  T_c = {t_c:2}: min |lambda_2| = {:.4} at k = {}, connected = {}",
                report.min_lambda2, report.argmin_k, report.uniformly_connected
            );
        }
        let l = check_assumption_l(&schedule, 200, 0.5, &basis)?;
        println!("  mu_bar = {:.4}, mu = 0.5 admissible: {}", l.mu_bar, l.holds);
    }
    Ok(())
}
