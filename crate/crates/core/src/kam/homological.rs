use super::KamError;
use crate::conditions::check_diophantine;
use crate::series::{Series, Signature, Trig, Var};

/// The part of `N` entering the divisor: the grade-0 frequency `omega` and
/// the linear field `Delta_i = d/dy_i` of the angle-free quadratic part.
#[derive(Clone, Debug)]
pub struct DivisorData {
    pub omega: Vec<f64>,
    pub delta: Vec<Series>,
}

pub fn divisor_data(n: &Series) -> DivisorData {
    let sig = n.signature();
    let omega = (0..sig.m)
        .map(|i| {
            let mut mono = vec![0u8; sig.polys()];
            mono[i] = 1;
            n.coeff(0, &vec![0; sig.waves()], Trig::Cos, &mono)
        })
        .collect();
    let quad = n.filter(|k| k.is_trig_free() && k.degree() == 2);
    let delta = (0..sig.m).map(|i| quad.partial(Var::Y(i))).collect();
    DivisorData { omega, delta }
}

fn k_dot(sig: &Signature, wave: &[i32], omega: &[f64]) -> (bool, f64) {
    let k = &wave[..sig.m];
    (k.iter().any(|&x| x != 0), k.iter().zip(omega).map(|(&a, &b)| a as f64 * b).sum())
}

/// Solve `(omega + Delta) . d_x F = rhs` degree by degree. `rhs` must hold
/// only oscillating terms (`k != 0`). Every fast wavevector up to `kmax`
/// must be `(gamma, tau)`-Diophantine.
pub fn solve_homological(div: &DivisorData, rhs: &Series, gamma: f64, tau: f64, kmax: u32) -> Result<Series, KamError> {
    let sig = rhs.signature();
    let scan = check_diophantine(&div.omega, gamma, tau, kmax);
    if !scan.holds {
        let k = scan.worst_k.clone().unwrap_or_default();
        return Err(KamError::SmallDivisor { k, value: scan.worst_value, bound: scan.worst_bound });
    }
    let invert = |s: &Series| -> Result<Series, KamError> {
        let mut f = s.filter(|_| false);
        for (key, c) in s.terms() {
            let (osc, kw) = k_dot(&sig, &key.wave, &div.omega);
            if !osc {
                continue;
            }
            if kw == 0.0 {
                return Err(KamError::SmallDivisor { k: key.k(&sig).to_vec(), value: 0.0, bound: gamma });
            }
            // omega.d_x (a sin) = a kw cos ; omega.d_x (b cos) = -b kw sin
            let (trig, val) = match key.trig {
                Trig::Cos => (Trig::Sin, c / kw),
                Trig::Sin => (Trig::Cos, -c / kw),
            };
            f.add_term(key.grade, &key.wave, trig, &key.mono, val);
        }
        Ok(f)
    };
    let dmax = rhs.cutoffs().degree;
    let mut total = rhs.filter(|_| false);
    let mut prev = rhs.filter(|_| false);
    for d in 0..=dmax {
        let mut layer = rhs.filter(|k| k.degree() == d);
        if d > 0 && !prev.is_empty() {
            for i in 0..sig.m {
                if div.delta[i].is_empty() {
                    continue;
                }
                let corr = &div.delta[i] * &prev.partial(Var::X(i));
                layer.axpy(-1.0, &corr.filter(|k| k.degree() == d));
            }
        }
        let fd = invert(&layer)?;
        total.axpy(1.0, &fd);
        prev = fd;
    }
    Ok(total)
}

/// `R' = {N, F}_z - sum_i (d_{y_i} N - omega_i - Delta_i) d_{x_i} F`: the
/// bracket terms not absorbed by the divisor.
pub fn remainder_prime(n: &Series, f: &Series, div: &DivisorData) -> Series {
    let sig = n.signature();
    let mut out = n.bracket_z(f);
    for i in 0..sig.m {
        let mut q = n.partial(Var::Y(i));
        let mut w = Series::zero(sig, n.cutoffs());
        w.add_term(0, &vec![0; sig.waves()], Trig::Cos, &vec![0; sig.polys()], div.omega[i]);
        let w = w.with_den(n.grade_den());
        q.axpy(-1.0, &w);
        q.axpy(-1.0, &div.delta[i]);
        if q.is_empty() {
            continue;
        }
        out.axpy(-1.0, &(&q * &f.partial(Var::X(i))));
    }
    out
}
