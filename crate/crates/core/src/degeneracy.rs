//! Averaged potentials on the resonant torus: assembly from a step
//! history, degeneracy order, critical points and their linear type, and
//! the rescaling at a relative equilibrium.
//!
//! A potential `g(u)` has order `a` when `det d_u^2 g` scales like
//! `delta^(a m0)` at its critical points. The order is read from a
//! least-squares fit of `log |det|` against `log delta`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kam::StepOutcome;
use crate::series::{Cutoffs, EvalPlan, Series, Var};

/// `g = sum_i [R_i]`, the averaged terms absorbed step by step.
#[derive(Clone, Debug)]
pub struct AveragedPotential {
    pub gbar: Series,
    /// Steps that contributed a nonzero term.
    pub steps: Vec<usize>,
}

impl AveragedPotential {
    pub fn from_series(gbar: Series) -> Self {
        AveragedPotential { gbar, steps: vec![] }
    }

    /// Restriction to the section `y = v = 0`.
    pub fn section(&self) -> Series {
        let sig = self.gbar.signature();
        self.gbar
            .filter(|k| k.mono[..sig.m].iter().all(|&a| a == 0) && k.mono[sig.m + sig.m0..].iter().all(|&a| a == 0))
    }
}

pub fn assemble_gbar(history: &[StepOutcome]) -> AveragedPotential {
    let first = history.first().expect("at least one step");
    let mut g = Series::zero(first.absorbed.signature(), first.absorbed.cutoffs());
    let mut steps = Vec::new();
    for (i, o) in history.iter().enumerate() {
        if !o.absorbed.is_empty() {
            g.axpy(1.0, &o.absorbed);
            steps.push(i);
        }
    }
    AveragedPotential { gbar: g, steps }
}

/// Value, gradient and Hessian in `u` of a section at `y = v = 0`.
struct UJet {
    m: usize,
    m0: usize,
    value: EvalPlan,
    grad: Vec<EvalPlan>,
    hess: Vec<Vec<EvalPlan>>,
    scale: f64,
}

impl UJet {
    fn new(section: &Series, delta: f64) -> UJet {
        let sig = section.signature();
        let g: Vec<Series> = (0..sig.m0).map(|i| section.partial(Var::U(i))).collect();
        let hess = (0..sig.m0)
            .map(|i| (0..sig.m0).map(|j| EvalPlan::new(&g[i].partial(Var::U(j)), delta)).collect())
            .collect();
        let scale = section
            .terms()
            .filter(|(k, _)| k.l(&sig).iter().any(|&l| l != 0) || k.mono[sig.m..sig.m + sig.m0].iter().any(|&b| b > 0))
            .map(|(k, c)| c.abs() * section.grade_factor(k.grade, delta))
            .sum::<f64>();
        UJet {
            m: sig.m,
            m0: sig.m0,
            value: EvalPlan::new(section, delta),
            grad: g.iter().map(|s| EvalPlan::new(s, delta)).collect(),
            hess,
            scale,
        }
    }

    fn state(&self, u: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; 2 * self.m + 2 * self.m0];
        z[2 * self.m..2 * self.m + self.m0].copy_from_slice(u);
        z
    }

    fn grad(&self, u: &[f64]) -> DVector<f64> {
        let z = self.state(u);
        DVector::from_iterator(self.m0, self.grad.iter().map(|p| p.eval(&z)))
    }

    fn hess(&self, u: &[f64]) -> DMatrix<f64> {
        let z = self.state(u);
        DMatrix::from_fn(self.m0, self.m0, |i, j| self.hess[i][j].eval(&z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TorusType {
    Elliptic,
    Hyperbolic,
    Mixed,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Representative in `[0, 2 pi)^m0`.
    pub u: Vec<f64>,
    /// `|grad g| / scale` at `u`, with `scale` the size of the
    /// angle-dependent part of `g`.
    pub gradient_residual: f64,
    /// `d_u^2 g` at `u`, row-major.
    pub hessian: Vec<Vec<f64>>,
    pub morse_index: usize,
    /// `|det d_u^2 g| / scale^m0` below `1e-10`.
    pub degenerate: bool,
    /// Another root within `1e-4`.
    pub flagged: bool,
    pub value: f64,
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if TAU - r < 1e-12 {
        0.0
    } else {
        r
    }
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(TAU);
            d.min(TAU - d)
        })
        .fold(0.0, f64::max)
}

/// Newton on `grad g = 0` at the section `y = v = 0` from a uniform grid
/// of `32^m0` seeds. Roots closer than `1e-6` on the torus are merged.
pub fn find_critical_points(gbar: &AveragedPotential, delta: f64) -> Vec<CriticalPoint> {
    let section = gbar.section();
    let sig = section.signature();
    let m0 = sig.m0;
    assert!(m0 >= 1, "critical points need a resonant angle");
    let jet = UJet::new(&section, delta);
    if jet.scale == 0.0 {
        return vec![];
    }
    let per = 32usize;
    let seeds: Vec<Vec<f64>> = (0..per.pow(m0 as u32))
        .map(|mut c| {
            (0..m0)
                .map(|_| {
                    let k = c % per;
                    c /= per;
                    TAU * k as f64 / per as f64
                })
                .collect()
        })
        .collect();
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for seed in seeds {
        let mut u = DVector::from_vec(seed);
        let mut ok = false;
        for _ in 0..200 {
            let g = jet.grad(u.as_slice()) / jet.scale;
            if g.amax() <= 1e-14 {
                ok = true;
                break;
            }
            let h = jet.hess(u.as_slice()) / jet.scale;
            let Some(step) = h.lu().solve(&g) else { break };
            let len = step.amax();
            let step = if len > 0.5 { step * (0.5 / len) } else { step };
            u -= step;
        }
        if !ok {
            let g = jet.grad(u.as_slice()) / jet.scale;
            ok = g.amax() <= 1e-10;
        }
        if ok {
            let w: Vec<f64> = u.iter().map(|&x| wrap(x)).collect();
            if roots.iter().all(|r| torus_dist(r, &w) > 1e-6) {
                roots.push(w);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let value_plan = &jet.value;
    roots
        .iter()
        .map(|u| {
            let h = jet.hess(u);
            let eig = h.clone().symmetric_eigen();
            let det = h.determinant() / jet.scale.powi(m0 as i32);
            let g = jet.grad(u) / jet.scale;
            CriticalPoint {
                u: u.clone(),
                gradient_residual: g.amax(),
                hessian: (0..m0).map(|i| (0..m0).map(|j| h[(i, j)]).collect()).collect(),
                morse_index: eig.eigenvalues.iter().filter(|&&e| e < 0.0).count(),
                degenerate: det.abs() < 1e-10,
                flagged: roots.iter().any(|r| r != u && torus_dist(r, u) < 1e-4),
                value: value_plan.eval(&jet.state(u)),
            }
        })
        .collect()
}

/// `sum (-1)^index` over the nondegenerate points, or `None` if any point
/// is degenerate.
pub fn euler_characteristic(points: &[CriticalPoint]) -> Option<i64> {
    if points.iter().any(|p| p.degenerate) || points.is_empty() {
        return None;
    }
    Some(points.iter().map(|p| if p.morse_index % 2 == 0 { 1 } else { -1 }).sum())
}

/// Linear type from the block `[[0, Nvv], [-V, 0]]` of the normal flow.
/// Returns the type and the eigenvalues `(re, im)`.
pub fn classify(n_vv: &DMatrix<f64>, v: &DMatrix<f64>) -> (TorusType, Vec<(f64, f64)>) {
    let m0 = v.nrows();
    let sn = n_vv.amax().max(f64::MIN_POSITIVE);
    let sv = v.amax().max(f64::MIN_POSITIVE);
    let mut a = DMatrix::zeros(2 * m0, 2 * m0);
    a.view_mut((0, m0), (m0, m0)).copy_from(&(n_vv / sn));
    a.view_mut((m0, 0), (m0, m0)).copy_from(&(-v / sv));
    let ev = a.complex_eigenvalues();
    let scale = (sn * sv).sqrt();
    let eigs: Vec<(f64, f64)> = ev.iter().map(|c| (c.re * scale, c.im * scale)).collect();
    let tol = 1e-10;
    let (mut ell, mut hyp) = (0, 0);
    for c in ev.iter() {
        if c.norm() < tol {
            return (TorusType::Degenerate, eigs);
        }
        if c.re.abs() < tol {
            ell += 1;
        } else {
            hyp += 1;
        }
    }
    let t = match (ell > 0, hyp > 0) {
        (true, false) => TorusType::Elliptic,
        (false, true) => TorusType::Hyperbolic,
        _ => TorusType::Mixed,
    };
    (t, eigs)
}

/// `d_v^2 N` and `d_u^2 N` of an angle-averaged Hamiltonian at
/// `(y, u, v) = (0, u, 0)`.
pub fn normal_hessians(n: &Series, u: &[f64], eps: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let sig = n.signature();
    let mut z = vec![0.0; sig.state_len()];
    z[2 * sig.m..2 * sig.m + sig.m0].copy_from_slice(u);
    let vv = DMatrix::from_fn(sig.m0, sig.m0, |i, j| n.partial(Var::V(i)).partial(Var::V(j)).value(&z, eps));
    let uu = DMatrix::from_fn(sig.m0, sig.m0, |i, j| n.partial(Var::U(i)).partial(Var::U(j)).value(&z, eps));
    (vv, uu)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub order: u32,
    pub sigma_bar: f64,
    pub grid: Vec<f64>,
    /// `min |det d_u^2 g|` over the critical points, per grid point.
    pub determinants: Vec<f64>,
    pub slope: f64,
    /// Distance of `slope / m0` to the nearest integer.
    pub residual: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DegeneracyError {
    #[error("no clean degeneracy order: slope {slope} (residual {residual}), determinants {determinants:?}")]
    NoCleanOrder { slope: f64, residual: f64, determinants: Vec<f64> },
    #[error("order {order} exceeds the cap {cap}")]
    OrderCap { order: u32, cap: u32 },
}

/// Seven log-spaced points from `1e-2` to `1e-4`.
pub fn default_delta_grid() -> Vec<f64> {
    (0..7).map(|i| 10f64.powf(-2.0 - i as f64 / 3.0)).collect()
}

pub fn detect_order(gbar: &AveragedPotential, grid: &[f64], cap: u32) -> Result<DegeneracyReport, DegeneracyError> {
    let m0 = gbar.gbar.signature().m0 as f64;
    let dets: Vec<f64> = grid
        .iter()
        .map(|&d| {
            let section = gbar.section();
            let jet = UJet::new(&section, d);
            find_critical_points(gbar, d)
                .iter()
                .map(|cp| jet.hess(&cp.u).determinant().abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let clean = dets.iter().all(|d| d.is_finite() && *d > 0.0);
    if !clean || grid.len() < 2 {
        return Err(DegeneracyError::NoCleanOrder { slope: f64::NAN, residual: f64::NAN, determinants: dets });
    }
    let xs: Vec<f64> = grid.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = dets.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let per = slope / m0;
    let a = per.round();
    let residual = (per - a).abs();
    if residual >= 0.05 || a < 1.0 {
        return Err(DegeneracyError::NoCleanOrder { slope, residual, determinants: dets });
    }
    let order = a as u32;
    if order > cap {
        return Err(DegeneracyError::OrderCap { order, cap });
    }
    let sigma_bar =
        grid.iter().zip(&dets).map(|(d, det)| det * d.powf(-(order as f64) * m0)).fold(f64::INFINITY, f64::min);
    Ok(DegeneracyReport { order, sigma_bar, grid: grid.to_vec(), determinants: dets, slope, residual })
}

/// Move the critical point `u_star` to the origin, expand in `u`, and
/// apply `y -> delta^((a-1)/2) y`, `v -> delta^((a-1)/2) v`,
/// `H -> delta^((1-a)/2) H`, renaming `delta^((a+1)/2)` as the new `delta`.
///
/// A term of grade `g` and degree `n` in `(y, v)` moves to grade
/// `(2 g + (a - 1)(n - 1)) / (a + 1)`.
pub fn rescale_at(h: &Series, u_star: &[f64], a: u32) -> Series {
    let sig = h.signature();
    let mut phi = vec![0.0; sig.waves()];
    phi[sig.m..].copy_from_slice(u_star);
    let free = Cutoffs { grade_cap: None, ..h.cutoffs() };
    let moved = h.with_cutoffs(free).rotate(&phi).expand_resonant_harmonics();
    let den = moved.grade_den() as i32;
    let a = a as i32;
    let out = moved.map_grades((den * (a + 1)) as u32, |k| {
        let n: i32 = k.mono[..sig.m].iter().chain(&k.mono[sig.m + sig.m0..]).map(|&e| e as i32).sum();
        (2 * k.grade + (a - 1) * (n - 1) * den, 1.0)
    });
    out.normalize_grades()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Signature, Trig};

    fn cos_u(grade: i32) -> AveragedPotential {
        let sig = Signature::new(1, 1);
        let mut s = Series::zero(sig, Cutoffs::default());
        s.add_term(grade, &[0, 1], Trig::Cos, &[0, 0, 0], 1.0);
        AveragedPotential::from_series(s)
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 7);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[6] - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn cos_u_points() {
        let cps = find_critical_points(&cos_u(2), 0.01);
        assert_eq!(cps.len(), 2);
        assert!(cps[0].u[0].abs() < 1e-12);
        assert!((cps[1].u[0] - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(cps[0].morse_index, 1);
        assert_eq!(cps[1].morse_index, 0);
        assert_eq!(euler_characteristic(&cps), Some(0));
    }

    #[test]
    fn orders_two_and_three() {
        let g = default_delta_grid();
        let r2 = detect_order(&cos_u(2), &g, 6).unwrap();
        assert_eq!(r2.order, 2);
        assert!((r2.sigma_bar - 1.0).abs() < 1e-9);
        assert_eq!(detect_order(&cos_u(3), &g, 6).unwrap().order, 3);
    }

    #[test]
    fn flat_potential_has_no_order() {
        let sig = Signature::new(1, 1);
        let s = Series::constant(sig, Cutoffs::default(), 1.0).shift_grade(2);
        let r = detect_order(&AveragedPotential::from_series(s), &default_delta_grid(), 6);
        assert!(matches!(r, Err(DegeneracyError::NoCleanOrder { .. })));
    }

    #[test]
    fn classify_examples() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(classify(&one, &(-&one)).0, TorusType::Hyperbolic);
        assert_eq!(classify(&one, &one).0, TorusType::Elliptic);
        let id = DMatrix::identity(2, 2);
        let v = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(classify(&id, &v).0, TorusType::Mixed);
    }

    #[test]
    fn rescale_identity_for_order_one() {
        let sig = Signature::new(1, 1);
        let mut h = Series::zero(sig, Cutoffs::default());
        h.add_term(0, &[0, 0], Trig::Cos, &[1, 0, 0], 2.0);
        h.add_term(1, &[0, 0], Trig::Cos, &[0, 0, 2], 0.5);
        assert_eq!(rescale_at(&h, &[0.0], 1), h);
    }

    #[test]
    fn rescale_cos_at_pi() {
        // eps v^2/2 + eps^2 cos u at u = pi, a = 2: new delta = eps^(3/2)
        let sig = Signature::new(1, 1);
        let mut h = Series::zero(sig, Cutoffs { fourier: 4, degree: 4, grade_cap: None });
        h.add_term(1, &[0, 0], Trig::Cos, &[0, 0, 2], 0.5);
        h.add_term(2, &[0, 1], Trig::Cos, &[0, 0, 0], 1.0);
        let r = rescale_at(&h, &[std::f64::consts::PI], 2);
        assert_eq!(r.grade_den(), 1);
        assert!((r.coeff(1, &[0, 0], Trig::Cos, &[0, 2, 0]) - 0.5).abs() < 1e-15);
        assert!((r.coeff(1, &[0, 0], Trig::Cos, &[0, 0, 2]) - 0.5).abs() < 1e-15);
    }
}
