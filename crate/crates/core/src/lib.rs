//! Numerical laboratory for the gauge transform and the infinite normal-form
//! reduction of the periodic modified Benjamin-Ono equation.

pub mod estimates;
pub mod gauge;
pub mod normal_form;
pub mod solver;
pub mod spectral;

pub use solver::{Equation, Sigma, StepConfig, Trajectory};
pub use spectral::{Projection, ProductMode, SobolevIndex, SpectralField, C64};
