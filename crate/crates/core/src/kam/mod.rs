//! One KAM step: truncation, homological equation, Lie transform and
//! frequency shift, plus the parameter schedule driving the iteration.
//!
//! The Hamiltonian is split as `N + P` where `N` is independent of the fast
//! angles. A step solves
//!
//! ```text
//! {N, F} + R - [R] - R' = 0
//! ```
//!
//! for the generator `F`, where `R` is a truncation of `P` and `R'` collects
//! the bracket terms not inverted by the divisor `<k, omega + Delta>`.

mod flow;
mod homological;
mod lie;
mod normal;
mod schedule;
mod step;

pub use flow::{flow_map, jacobian, step_map, symplectic_defect, StepMap};
pub use homological::{divisor_data, remainder_prime, solve_homological, DivisorData};
pub use lie::{lie_transform, LieResult};
pub use normal::{
    frequency_shift_full, frequency_shift_isoenergetic, frequency_shift_partial, split_normal_form, IsoShift,
    LinearData, NormalForm, PartialShift, Shift,
};
pub use schedule::{k_plus_of, smallest_eta, Hypotheses, KamSchedule, Profile, ScheduleConstants};
pub use step::{
    build_truncation, kam_step, origin_state, run_steps, RShape, ShiftMode, SplitHamiltonian, StepConfig, StepOutcome,
    StepReport, TransformRecord,
};

use crate::series::SeriesError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KamError {
    #[error("small divisor at k = {k:?}: |<k, omega>| = {value:e} against bound {bound:e}")]
    SmallDivisor { k: Vec<i32>, value: f64, bound: f64 },
    #[error("normal form is singular (rank {rank} of {size}); use the partial shift")]
    SingularNormalForm { rank: usize, size: usize },
    #[error("condition {0} fails")]
    ConditionViolated(String),
    #[error("Newton iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}
