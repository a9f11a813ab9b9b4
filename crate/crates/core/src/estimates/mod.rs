//! Randomized ratio campaigns for the multilinear estimates and the exact lattice-point counts.

pub mod bounds;
pub mod counting;
pub mod quintic;

use thiserror::Error;

use crate::gauge::GaugeError;
use crate::spectral::SpectralError;

pub use bounds::{bound_campaign, bound_ratio, BoundId, BoundReport};
pub use counting::{
    case_emptiness_scan, count_ellipse, count_hyperbola, counting_scan, fact_check, fact_check_reduced, fact_scan,
    large_mu_probe, phi5_identity_scan, phi6_identity_scan, CountReport, Curve, EmptinessReport, Fact, FactConfig,
    FactScan, IdentityScan,
};
pub use quintic::{campaign, replay, verify_estimate, EstimateId, EstimateParams, EstimateReport, QuinticInputs, Witness};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("regularity s = {0} must exceed 1/2")]
    InvalidRegularity(f64),
    #[error("delta = {0} must lie in (0, (s - 1/2)/2]")]
    InvalidDelta(f64),
    #[error("eta = {0} must lie in (0, 1)")]
    InvalidEta(f64),
    #[error("unknown identifier `{0}`")]
    UnknownId(String),
    #[error("lattice size {0} is too small")]
    BadLattice(usize),
    #[error("no trials requested")]
    NoTrials,
    #[error("hyperbola count needs mu != 0")]
    ZeroMu,
    #[error("radius {0} must exceed 1")]
    BadRadius(i64),
    #[error("restricted variables must be two distinct entries of {{1, 3, 5}}")]
    BadFactConfig,
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
