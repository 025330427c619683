use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{ActionFunction, Frame};
use crate::series::{Cutoffs, Series, Signature, Var};

/// A Hamiltonian rewritten around a point of the resonant surface.
///
/// With `e = eps^(1/4)` the output series satisfies
/// `H(x, y) = constant + e * H_red(q, p_hat)` where `y = y0 + e K0 p_hat`
/// and `q = K0^T x`; its grades count powers of `e`.
#[derive(Clone, Debug)]
pub struct ReducedHamiltonian {
    pub series: Series,
    pub constant: f64,
    pub frame: Frame,
    pub y0: Vec<f64>,
    /// `K_star^T omega(y0)`.
    pub omega_star: DVector<f64>,
    /// `K_prime^T omega(y0)`, zero on the resonant surface.
    pub omega_prime: DVector<f64>,
    /// `K0^T H0''(y0) K0`.
    pub gamma: DMatrix<f64>,
}

/// Reduce `H = H0 + sum eps^g P_g` (a series on `(d, 0)` whose grade-0,
/// angle-free part is `H0`) at `y0` with the given frame.
///
/// A term of grade `g` and degree `n` in `p` lands on grade `4 g + n - 1`.
pub fn reduce_at_resonance(h: &Series, frame: &Frame, y0: &[f64], cut: Cutoffs) -> ReducedHamiltonian {
    let d = frame.d;
    let m = frame.m();
    let m0 = frame.m0;
    assert_eq!(h.signature(), Signature::new(d, 0), "input lives on (d, 0)");
    assert_eq!(y0.len(), d);
    let sig = Signature::new(m, m0);
    let kinv = frame.inverse();
    let scratch_cut = Cutoffs { fourier: 0, degree: cut.degree, grade_cap: None };
    let pvar = |j: usize| if j < m { Var::Y(j) } else { Var::V(j - m) };
    let lin: Vec<Series> = (0..d)
        .map(|i| {
            let mut s = Series::constant(sig, scratch_cut, y0[i]);
            for j in 0..d {
                if frame.k0[i][j] != 0 {
                    s.axpy(frame.k0[i][j] as f64, &Series::var(sig, scratch_cut, pvar(j)));
                }
            }
            s
        })
        .collect();
    let mut powers: HashMap<(usize, u8), Series> = HashMap::new();
    let mut power = |i: usize, a: u8| -> Series {
        if let Some(s) = powers.get(&(i, a)) {
            return s.clone();
        }
        let mut s = Series::constant(sig, scratch_cut, 1.0);
        for _ in 0..a {
            s = &s * &lin[i];
        }
        powers.insert((i, a), s.clone());
        s
    };
    let mut out = Series::zero(sig, cut);
    let mut constant = 0.0;
    for (key, c) in h.terms() {
        let k = key.k(&h.signature());
        let wave: Vec<i32> = (0..d).map(|i| (0..d).map(|j| kinv[i][j] * k[j] as i64).sum::<i64>() as i32).collect();
        let mut poly = Series::constant(sig, scratch_cut, c);
        for (i, &a) in key.mono.iter().enumerate() {
            if a > 0 {
                poly = &poly * &power(i, a);
            }
        }
        for (pk, pc) in poly.terms() {
            let n = pk.degree() as i32;
            let grade = 4 * key.grade + n - 1;
            if grade == -1 && key.is_trig_free() {
                constant += pc;
                continue;
            }
            out.add_term(grade, &wave, key.trig, &pk.mono, pc);
        }
    }
    out.prune();
    let h0 = ActionFunction::polynomial(h.filter(|k| k.grade == 0 && k.is_trig_free()));
    let omega = h0.gradient(y0);
    let k0 = frame.matrix();
    let proj = k0.transpose() * &omega;
    let gamma = k0.transpose() * h0.hessian(y0) * &k0;
    ReducedHamiltonian {
        series: out,
        constant,
        frame: frame.clone(),
        y0: y0.to_vec(),
        omega_star: proj.rows(0, m).into_owned(),
        omega_prime: proj.rows(m, m0).into_owned(),
        gamma,
    }
}
