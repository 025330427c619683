//! Certificates for the hypotheses of the persistence theorems, and a
//! Monte Carlo estimate of the Diophantine excluded measure.

mod measure;
mod rank;

pub use measure::{excluded_measure, MeasureEstimate};
pub use rank::{
    check_normal_form_conditions, check_rank_conditions, check_russmann, numeric_rank, AveragedPotential,
    ConditionEntry, ConditionError, ConditionName, ConditionReport, RANK_TOL,
};

use serde::{Deserialize, Serialize};

/// Result of the exhaustive small-divisor scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophantineScan {
    pub holds: bool,
    /// Minimiser of `|<k, omega>| |k|_1^tau`.
    pub worst_k: Option<Vec<i32>>,
    /// `|<k, omega>|` at the minimiser.
    pub worst_value: f64,
    /// `gamma / |k|_1^tau` at the minimiser.
    pub worst_bound: f64,
    /// `min |<k, omega>|` over the scan.
    pub min_divisor: f64,
}

/// Every `k` in `Z^m` with `0 < |k|_1 <= kmax` and first nonzero entry
/// positive. Each pair `{k, -k}` appears once.
pub fn half_lattice(m: usize, kmax: u32) -> Vec<Vec<i32>> {
    fn rec(m: usize, budget: i32, lead: bool, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if cur.len() == m {
            if !lead {
                out.push(cur.clone());
            }
            return;
        }
        let lo = if lead { 0 } else { -budget };
        for c in lo..=budget {
            cur.push(c);
            rec(m, budget - c.abs(), lead && c == 0, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, kmax as i32, true, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Precomputed scan set: wavevectors and their weights `|k|_1^tau`.
#[derive(Clone, Debug)]
pub struct ScanSet {
    pub m: usize,
    pub tau: f64,
    pub ks: Vec<Vec<i32>>,
    flat: Vec<f64>,
    weight: Vec<f64>,
}

impl ScanSet {
    pub fn new(m: usize, tau: f64, kmax: u32) -> ScanSet {
        let ks = half_lattice(m, kmax);
        let flat = ks.iter().flat_map(|k| k.iter().map(|&c| c as f64)).collect();
        let weight = ks.iter().map(|k| (k.iter().map(|c| c.abs()).sum::<i32>() as f64).powf(tau)).collect();
        ScanSet { m, tau, ks, flat, weight }
    }

    /// `(min_k |<k, omega>| |k|^tau, argmin, min_k |<k, omega>|)`.
    pub fn quality(&self, omega: &[f64]) -> (f64, usize, f64) {
        let m = self.m;
        let mut best = (f64::INFINITY, 0usize);
        let mut min_div = f64::INFINITY;
        for (i, w) in self.weight.iter().enumerate() {
            let row = &self.flat[i * m..(i + 1) * m];
            let dot = row.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>().abs();
            min_div = min_div.min(dot);
            let q = dot * w;
            if q < best.0 {
                best = (q, i);
            }
        }
        (best.0, best.1, min_div)
    }
}

/// `|<k, omega>| > gamma / |k|_1^tau` for all `0 < |k|_1 <= kmax`.
pub fn check_diophantine(omega: &[f64], gamma: f64, tau: f64, kmax: u32) -> DiophantineScan {
    let set = ScanSet::new(omega.len(), tau, kmax);
    if set.ks.is_empty() {
        return DiophantineScan {
            holds: true,
            worst_k: None,
            worst_value: f64::INFINITY,
            worst_bound: 0.0,
            min_divisor: f64::INFINITY,
        };
    }
    let (q, i, min_divisor) = set.quality(omega);
    let w = set.weight[i];
    DiophantineScan {
        holds: q > gamma,
        worst_k: Some(set.ks[i].clone()),
        worst_value: q / w,
        worst_bound: gamma / w,
        min_divisor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_lattice_counts() {
        // |k|_1 <= K in Z^2 has 2K(K+1)+1 points
        for kmax in 1..8 {
            assert_eq!(half_lattice(2, kmax).len() as u32, kmax * (kmax + 1));
        }
        assert_eq!(half_lattice(1, 5), (1..=5).map(|c| vec![c]).collect::<Vec<_>>());
    }

    #[test]
    fn exact_resonance_found() {
        let s = check_diophantine(&[1.0, 1.0], 1e-9, 2.0, 10);
        assert!(!s.holds);
        assert_eq!(s.worst_k, Some(vec![1, -1]));
        assert_eq!(s.worst_value, 0.0);
    }

    #[test]
    fn golden_mean_direction_is_diophantine() {
        let s = check_diophantine(&[1.0, 2f64.sqrt()], 1e-3, 2.0, 20);
        assert!(s.holds);
    }

    #[test]
    fn verdict_is_homogeneous() {
        let w = [1.0, 0.618_033_988_749_895];
        for &c in &[0.5, 2.0, 7.0] {
            for &g in &[1e-1, 1e-2, 1e-3] {
                let a = check_diophantine(&w, g, 2.5, 15).holds;
                let wc: Vec<f64> = w.iter().map(|x| x * c).collect();
                assert_eq!(a, check_diophantine(&wc, g * c, 2.5, 15).holds);
            }
        }
    }
}
