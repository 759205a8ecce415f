use thiserror::Error;

use crate::gain_design::UnstableGainCertificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigenvalue {re:+.6e}{im:+.6e}i has modulus {modulus:.12} (|modulus - 1| > {tol:e})")]
    NotUnitCircle {
        re: f64,
        im: f64,
        modulus: f64,
        tol: f64,
    },

    #[error("pair (A, B) is not reachable: reachability rank {rank} < {n}")]
    NotReachable { rank: usize, n: usize },

    #[error("A has a non-semi-simple eigenvalue {re:+.6e}{im:+.6e}i; use the unstable-case design")]
    NotSemiSimple { re: f64, im: f64 },

    #[error("could not normalize A to an orthogonal matrix (deviation {deviation:e})")]
    NormalizationFailure { deviation: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    AreDiverged { iterations: usize, last_step: f64 },

    #[error("Riccati solution is not stabilizing: spectral radius of A - BF is {spectral_radius}")]
    NotStabilizing { spectral_radius: f64 },

    #[error("B'XB is not below gamma^2: max eigenvalue {max_eig} >= {bound}")]
    GainBoundViolated {
        max_eig: f64,
        bound: f64,
        certificate: Box<UnstableGainCertificate>,
    },

    #[error("||T_F||_Hinf = {hinf} is not below gamma = {gamma}")]
    HinfBoundViolated {
        hinf: f64,
        gamma: f64,
        certificate: Box<UnstableGainCertificate>,
    },

    #[error("matrix is ill-conditioned (condition number {cond:e} > {limit:e})")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("system matrix is not Schur stable (spectral radius {spectral_radius})")]
    NotSchur { spectral_radius: f64 },

    #[error("Assumption (L) violated at k = {k}: mu_bar estimate {mu_bar} <= 0")]
    AssumptionLViolated { k: usize, mu_bar: f64 },

    #[error("output gramian is singular beyond regularization at k0 = {k0}")]
    DegenerateDenominator { k0: usize },

    #[error("observability gramian has full rank; no unobservable initial state exists")]
    FullRank,

    #[error("certificate mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::DimensionMismatch(_) => 2,
            Error::Io(_) => 2,
            _ => 3,
        }
    }
}
