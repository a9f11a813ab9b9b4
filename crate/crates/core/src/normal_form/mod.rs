//! Fourier-side normal-form machinery for the twisted profile `omega`.

pub mod frame;
pub mod multiplier;
pub mod scans;
pub mod terms;
pub mod tree;

use thiserror::Error;

use crate::gauge::GaugeError;

pub use frame::{eval_q, frames_from_trajectory, full_q, lattice_rhs, LatticeFrame, TwistedState};
pub use multiplier::{hat_split, in_a1, in_a2, multiplier, phi, Kind, MultiplierId, Tuple};
pub use terms::{eval_r0, eval_term, EvalMode, Family, HatTable, McConfig, McEstimate, TermDescriptor};
pub use tree::{enumerate_trees, IndexFunction, Tree};

#[derive(Debug, Error)]
pub enum NormalFormError {
    #[error("multiplier index {0} outside 1..=7")]
    BadMultiplier(u8),
    #[error("frequency constraint violated: n = {n}, sum = {sum}")]
    ConstraintViolated { n: i64, sum: i64 },
    #[error("generation {0} not supported")]
    GenerationTooLarge(usize),
    #[error("unsupported evaluation: {0}")]
    ModeUnsupported(String),
    #[error("threshold M = {0} must exceed 1")]
    BadThreshold(f64),
    #[error("eta = {0} must lie in (0, 1)")]
    BadEta(f64),
    #[error("lattice window {0} does not match table window {1}")]
    WindowMismatch(usize, usize),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
}
