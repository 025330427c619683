use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Midpoint;
use crate::degeneracy::{classify, find_critical_points, normal_hessians, AveragedPotential, TorusType};
use crate::kam::{step_map, StepMap, StepOutcome};
use crate::series::{Series, Signature, Var};

/// The torus `{y = 0, u = u_star, v = 0}` of the final normal form, with
/// the step maps that carry it back to the original coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusPrediction {
    pub signature: Signature,
    pub u_star: Vec<f64>,
    /// `d_y N` on the torus.
    pub omega: Vec<f64>,
    pub eps: f64,
    #[serde(skip)]
    maps: Vec<StepMap>,
}

fn frequency_at(n: &Series, u_star: &[f64], eps: f64) -> Vec<f64> {
    let sig = n.signature();
    let mut z = vec![0.0; sig.state_len()];
    z[2 * sig.m..2 * sig.m + sig.m0].copy_from_slice(u_star);
    (0..sig.m).map(|i| n.partial(Var::Y(i)).value(&z, eps)).collect()
}

/// A critical point of the angle-averaged `N` on the section: the first
/// elliptic one, else the first one found.
pub fn default_u_star(n: &Series, eps: f64) -> Vec<f64> {
    let sig = n.signature();
    if sig.m0 == 0 {
        return vec![];
    }
    let pts = find_critical_points(&AveragedPotential::from_series(n.average()), eps);
    let elliptic = pts.iter().find(|p| {
        let (vv, uu) = normal_hessians(n, &p.u, eps);
        classify(&vv, &uu).0 == TorusType::Elliptic
    });
    elliptic.or(pts.first()).map(|p| p.u.clone()).unwrap_or_else(|| vec![0.0; sig.m0])
}

impl TorusPrediction {
    /// Torus of an integrable `N` with no transformations.
    pub fn of_normal_form(n: &Series, eps: f64, u_star: Option<Vec<f64>>) -> Self {
        let u_star = u_star.unwrap_or_else(|| default_u_star(n, eps));
        TorusPrediction { signature: n.signature(), omega: frequency_at(n, &u_star, eps), u_star, eps, maps: vec![] }
    }

    /// Torus after the steps of `history`.
    pub fn from_history(history: &[StepOutcome], eps: f64, u_star: Option<Vec<f64>>) -> Self {
        let last = history.last().expect("at least one step");
        let mut p = Self::of_normal_form(&last.next.normal, eps, u_star);
        p.maps = history.iter().map(|o| step_map(&o.record.generator, &o.record.w0, eps)).collect();
        p
    }

    pub fn steps(&self) -> usize {
        self.maps.len()
    }

    /// `(x, 0, u_star, 0)` in the final coordinates.
    pub fn point(&self, x: &[f64]) -> Vec<f64> {
        let (m, m0) = (self.signature.m, self.signature.m0);
        let mut z = vec![0.0; 2 * m + 2 * m0];
        z[..m].copy_from_slice(x);
        z[2 * m..2 * m + m0].copy_from_slice(&self.u_star);
        z
    }

    /// Final coordinates to original ones.
    pub fn pull_back(&self, z: &[f64]) -> Vec<f64> {
        self.maps.iter().rev().fold(z.to_vec(), |acc, map| map.apply(&acc))
    }

    /// Original-coordinate state on the torus at angle `x`.
    pub fn initial_state(&self, x: &[f64]) -> Vec<f64> {
        self.pull_back(&self.point(x))
    }

    /// `2 pi / max |omega_i|`.
    pub fn period(&self) -> f64 {
        TAU / self.omega.iter().map(|w| w.abs()).fold(0.0, f64::max)
    }
}

fn state_distance(a: &[f64], b: &[f64], sig: &Signature) -> f64 {
    let (m, m0) = (sig.m, sig.m0);
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (p, q))| {
            let d = p - q;
            if i < m || (2 * m..2 * m + m0).contains(&i) {
                let r = d.rem_euclid(TAU);
                r.min(TAU - r)
            } else {
                d.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Checkpoints per period in [`torus_residual`].
pub const CHECKPOINTS: usize = 32;

/// Max over `probes` torus points, and over [`CHECKPOINTS`] times in one
/// period, of the distance between the integrated orbit of `h` and the
/// pulled-back rigid rotation.
pub fn torus_residual(h: &Series, pred: &TorusPrediction, probes: usize, dt: f64) -> f64 {
    let sig = pred.signature;
    let m = sig.m;
    let period = pred.period();
    let integ = Midpoint::new(h, pred.eps);
    // Kronecker sequence spread in x
    let alpha: Vec<f64> = (0..m).map(|i| ((i + 2) as f64).sqrt().fract()).collect();
    (0..probes.max(1))
        .into_par_iter()
        .map(|j| {
            let x: Vec<f64> = (0..m)
                .map(|i| if i == 0 { TAU * j as f64 / probes as f64 } else { TAU * (j as f64 * alpha[i]).fract() })
                .collect();
            let mut z = pred.initial_state(&x);
            let seg = period / CHECKPOINTS as f64;
            let mut worst: f64 = 0.0;
            for c in 1..=CHECKPOINTS {
                let Ok(next) = integ.advance(&z, seg, dt) else { return f64::INFINITY };
                z = next;
                let t = seg * c as f64;
                let xt: Vec<f64> = x.iter().zip(&pred.omega).map(|(a, w)| a + w * t).collect();
                worst = worst.max(state_distance(&z, &pred.initial_state(&xt), &sig));
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}
