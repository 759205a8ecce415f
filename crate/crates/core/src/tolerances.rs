use serde::{Deserialize, Serialize};

/// Numerical thresholds used across the crate. Every field can be overridden
/// from an experiment config or the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed deviation of eigenvalue moduli from 1.
    pub spec: f64,
    /// Relative singular-value threshold for Jordan-block detection.
    pub jordan: f64,
    /// Orthonormality of the reduction basis.
    pub orth: f64,
    /// Laplacian row sums and sign pattern.
    pub row: f64,
    /// Threshold on |λ₂| of an average Laplacian.
    pub conn: f64,
    /// Slack allowed in matrix inequalities.
    pub psd: f64,
    /// Residual of X = A'XA.
    pub lyap: f64,
    /// Riccati stopping rule: step size relative to max(1, |X|).
    pub are: f64,
    /// Gramian positive definiteness, relative to the trace.
    pub pd: f64,
    /// Small-gain margin: a verdict needs product < 1 - margin.
    pub margin: f64,
    /// Relative tolerance of the H∞ peak refinement.
    pub hinf: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spec: 1e-8,
            jordan: 1e-8,
            orth: 1e-10,
            row: 1e-10,
            conn: 1e-9,
            psd: 1e-10,
            lyap: 1e-10,
            are: 1e-12,
            pd: 1e-9,
            margin: 1e-12,
            hinf: 1e-6,
        }
    }
}
