//! Consensus of discrete-time homogeneous multi-agent systems over
//! time-varying graphs.
//!
//! The crate designs state-feedback gains for agents whose open-loop poles lie
//! on the unit circle, checks the connectivity, observability and small-gain
//! certificates that guarantee consensus, and simulates the networked closed
//! loop `x(k+1) = [I_N ⊗ A - μ L(k) ⊗ BF] x(k)`.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod commands;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod gain_design;
pub mod graphs;
pub mod linalg;
pub mod report;
pub mod scenarios;
pub mod sim;
pub mod suite;
pub mod tolerances;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use tolerances::Tolerances;
