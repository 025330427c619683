//! Direct numerical checks of the engine: implicit midpoint integration of
//! the original Hamiltonian, frequency analysis of orbits, invariance
//! residuals of predicted tori, and the appendix regression pipelines.

mod frequency;
mod integrator;
mod regression;
mod torus;

pub use frequency::{
    frequency_analysis, spectral_peaks, FrequencyError, FrequencyEstimate, Peak, SpectralFit, MIN_SAMPLES,
};
pub use integrator::{
    integrate, integrate_with, HamiltonianField, IntegrateError, Method, Midpoint, Trajectory, MIDPOINT_TOL,
};
pub use regression::*;
pub use torus::{default_u_star, torus_residual, TorusPrediction};
