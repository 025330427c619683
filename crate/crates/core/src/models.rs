//! Built-in Hamiltonians.
//!
//! The two one-degree-of-freedom families are already in resonant normal
//! form on `(m, m0) = (1, 1)`, graded by `eps`:
//!
//! ```text
//! appendix-a:      omega y + eps v^2 / 2 + eps^2 cos u + eps cos u sin x e^y
//! appendix-b-i:    omega y + eps v^2 / 2 + eps^2 cos(u + i pi / 4) + eps sin u sin x e^y
//! ```
//!
//! `convex-2dof-resonant` is a convex integrable system on `T^2 x R^2` with
//! a trigonometric perturbation, to be reduced at the `(1, -1)` resonance.

use std::f64::consts::FRAC_PI_4;

use crate::series::{Cutoffs, Series, Signature, Trig, Var};

/// Storage used by the appendix regressions.
pub fn appendix_cutoffs() -> Cutoffs {
    Cutoffs { fourier: 12, degree: 6, grade_cap: Some(6) }
}

pub const APPENDIX_A_OMEGA: f64 = std::f64::consts::SQRT_2;
pub const APPENDIX_B_OMEGA: f64 = 1.0;

/// `sum_{n <= D} y^n / n!` at grade `grade`.
pub fn exp_y(sig: Signature, cut: Cutoffs, grade: i32) -> Series {
    let mut s = Series::zero(sig, cut);
    let zero = vec![0; sig.waves()];
    let mut mono = vec![0u8; sig.polys()];
    let mut fact = 1.0;
    for n in 0..=cut.degree {
        if n > 0 {
            fact *= n as f64;
        }
        mono[0] = n as u8;
        s.add_term(grade, &zero, Trig::Cos, &mono, 1.0 / fact);
    }
    s
}

fn base(sig: Signature, cut: Cutoffs, omega: f64) -> Series {
    let mut h = Series::var(sig, cut, Var::Y(0)).scale(omega);
    let mut v2 = vec![0u8; sig.polys()];
    v2[2] = 2;
    h.add_term(1, &[0, 0], Trig::Cos, &v2, 0.5);
    h
}

/// Product `trig_u(u) sin x e^y` at grade 1.
fn coupling(sig: Signature, cut: Cutoffs, u_trig: Trig) -> Series {
    let a = Series::mode(sig, cut, &[0, 1], u_trig);
    let b = Series::mode(sig, cut, &[1, 0], Trig::Sin);
    let e = exp_y(sig, cut, 1);
    &(&a * &b) * &e
}

pub fn appendix_a(cut: Cutoffs, omega: f64) -> Series {
    let sig = Signature::new(1, 1);
    let mut h = base(sig, cut, omega);
    h.add_term(2, &[0, 1], Trig::Cos, &[0, 0, 0], 1.0);
    h.axpy(1.0, &coupling(sig, cut, Trig::Cos));
    h
}

pub fn appendix_b(iota: u8, cut: Cutoffs, omega: f64) -> Series {
    let sig = Signature::new(1, 1);
    let mut h = base(sig, cut, omega);
    let phase = iota as f64 * FRAC_PI_4;
    // cos(u + p) = cos p cos u - sin p sin u
    h.add_term(2, &[0, 1], Trig::Cos, &[0, 0, 0], phase.cos());
    h.add_term(2, &[0, 1], Trig::Sin, &[0, 0, 0], -phase.sin());
    h.axpy(1.0, &coupling(sig, cut, Trig::Sin));
    h
}

/// `H = (y1^2 + y2^2) / 2 + eps (cos(x1 - x2) + cos x1 / 2)` on `(2, 0)`.
/// The resonance `y1 = y2` is generated by `(1, -1)`.
pub fn convex_2dof(cut: Cutoffs) -> Series {
    let sig = Signature::new(2, 0);
    let mut h = Series::zero(sig, cut);
    h.add_term(0, &[0, 0], Trig::Cos, &[2, 0], 0.5);
    h.add_term(0, &[0, 0], Trig::Cos, &[0, 2], 0.5);
    h.add_term(1, &[1, -1], Trig::Cos, &[0, 0], 1.0);
    h.add_term(1, &[1, 0], Trig::Cos, &[0, 0], 0.5);
    h
}

pub const CONVEX_2DOF_GENERATOR: [i64; 2] = [1, -1];
pub const CONVEX_2DOF_Y0: [f64; 2] = [1.0, 1.0];

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["appendix-a", "appendix-b-i0", "appendix-b-i1", "convex-2dof-resonant"];

/// A built-in model with its default frequency.
#[derive(Clone, Debug)]
pub enum Builtin {
    /// Already reduced: a series on `(1, 1)`.
    Reduced { series: Series, omega: f64 },
    /// To be reduced at `y0` with the given generators.
    Ambient { series: Series, generators: Vec<Vec<i64>>, y0: Vec<f64> },
}

pub fn builtin(name: &str) -> Option<Builtin> {
    let cut = appendix_cutoffs();
    Some(match name {
        "appendix-a" => Builtin::Reduced { series: appendix_a(cut, APPENDIX_A_OMEGA), omega: APPENDIX_A_OMEGA },
        "appendix-b-i0" => Builtin::Reduced { series: appendix_b(0, cut, APPENDIX_B_OMEGA), omega: APPENDIX_B_OMEGA },
        "appendix-b-i1" => Builtin::Reduced { series: appendix_b(1, cut, APPENDIX_B_OMEGA), omega: APPENDIX_B_OMEGA },
        "convex-2dof-resonant" => Builtin::Ambient {
            series: convex_2dof(Cutoffs { fourier: 12, degree: 6, grade_cap: None }),
            generators: vec![CONVEX_2DOF_GENERATOR.to_vec()],
            y0: CONVEX_2DOF_Y0.to_vec(),
        },
        _ => return None,
    })
}
