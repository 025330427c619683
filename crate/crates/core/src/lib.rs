//! Computational normal forms for resonant invariant tori.
//!
//! The crate is organised bottom-up:
//!
//! - [`series`]: truncated Fourier-Taylor series with formal `eps` grades.
//! - [`lattice`]: resonance frames and the reduction to a resonant normal form.
//! - [`kam`]: homological equation, Lie transforms, frequency shifts, schedules.
//! - [`degeneracy`]: averaged potentials, degeneracy order, critical points.
//! - [`conditions`]: Diophantine, Russmann and rank conditions; measure estimates.
//! - [`dynamics`]: symplectic integration, frequency analysis, regression pipelines.
//!
//! Built-in test Hamiltonians live in [`models`].

pub mod decimal;
pub mod series;

pub use series::{Cutoffs, Series, SeriesError, Signature, Trig, Var};
pub mod conditions;
pub mod degeneracy;
pub mod dynamics;
pub mod kam;
pub mod lattice;
pub mod models;
