//! Resonance lattices, unimodular frames and the reduction to a resonant
//! normal form.
//!
//! A resonance module `g` is spanned by integer generators `tau_1..tau_m0`
//! in `Z^d`. A frame is a unimodular `K0 = (K_star | K_prime)` whose last
//! `m0` columns are the generators. The linear symplectic change
//! `y - y0 = K0 p`, `q = K0^T x` splits the angles into `m = d - m0` fast
//! ones and `m0` resonant ones.

mod action;
mod reduce;

pub use action::ActionFunction;
pub use reduce::{reduce_at_resonance, ReducedHamiltonian};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LatticeError {
    #[error("generator set is empty or has inconsistent lengths")]
    BadShape,
    #[error("need at least one fast angle: {m0} generators in dimension {d}")]
    NoFastAngle { d: usize, m0: usize },
    #[error("generators are linearly dependent (rank {rank} < {m0})")]
    Dependent { rank: usize, m0: usize },
    #[error("generators do not span a primitive sublattice: invariant factor {offending} in {factors:?}")]
    NotCompletable { factors: Vec<i64>, offending: i64 },
    #[error("integer overflow during completion")]
    Overflow,
    #[error("frame is not unimodular (det = {det})")]
    NotUnimodular { det: i64 },
}

/// A unimodular completion of a set of resonance generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub d: usize,
    pub m0: usize,
    pub generators: Vec<Vec<i64>>,
    /// Row-major `d x d` matrix `(K_star | K_prime)`.
    #[serde(rename = "K0")]
    pub k0: Vec<Vec<i64>>,
}

impl Frame {
    pub fn m(&self) -> usize {
        self.d - self.m0
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        self.k0.iter().map(|row| row[j]).collect()
    }

    pub fn k_star(&self) -> Vec<Vec<i64>> {
        (0..self.m()).map(|j| self.column(j)).collect()
    }

    pub fn k_prime(&self) -> Vec<Vec<i64>> {
        (self.m()..self.d).map(|j| self.column(j)).collect()
    }

    pub fn det(&self) -> i64 {
        det_i128(&to_i128(&self.k0)) as i64
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| self.k0[i][j] as f64)
    }

    /// `K0^{-1}`, integral because the frame is unimodular.
    pub fn inverse(&self) -> Vec<Vec<i64>> {
        let adj = adjugate(&to_i128(&self.k0));
        let det = self.det() as i128;
        adj.iter().map(|row| row.iter().map(|&a| (a * det) as i64).collect()).collect()
    }

    /// Rebuild a frame from stored data, checking it.
    pub fn from_parts(generators: Vec<Vec<i64>>, k0: Vec<Vec<i64>>) -> Result<Frame, LatticeError> {
        let d = k0.len();
        if d == 0 || k0.iter().any(|r| r.len() != d) || generators.iter().any(|g| g.len() != d) {
            return Err(LatticeError::BadShape);
        }
        let frame = Frame { d, m0: generators.len(), generators, k0 };
        let det = frame.det();
        if det != 1 {
            return Err(LatticeError::NotUnimodular { det });
        }
        if frame.k_prime() != frame.generators {
            return Err(LatticeError::BadShape);
        }
        Ok(frame)
    }
}

fn to_i128(a: &[Vec<i64>]) -> Vec<Vec<i128>> {
    a.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect()
}

/// Determinant by fraction-free (Bareiss) elimination.
pub(crate) fn det_i128(a: &[Vec<i128>]) -> i128 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut m = a.to_vec();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(i) => {
                    m.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

fn adjugate(a: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = a.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i128>> =
                (0..n).filter(|&r| r != j).map(|r| (0..n).filter(|&c| c != i).map(|c| a[r][c]).collect()).collect();
            let s = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[i][j] = s * det_i128(&minor);
        }
    }
    adj
}

/// Invariant factors of an integer matrix (nonzero diagonal of its Smith
/// normal form), computed by pivoting elimination.
pub fn smith_invariants(a: &[Vec<i64>]) -> Vec<i64> {
    let mut m = to_i128(a);
    let rows = m.len();
    if rows == 0 {
        return vec![];
    }
    let cols = m[0].len();
    let mut out = Vec::new();
    for t in 0..rows.min(cols) {
        let pick = |m: &Vec<Vec<i128>>| {
            let mut best: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if m[i][j] != 0 && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            best
        };
        let Some((pi, pj)) = pick(&m) else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let p = m[t][t];
            let mut clean = true;
            for i in t + 1..rows {
                let q = m[i][t] / p;
                if q != 0 {
                    for j in t..cols {
                        m[i][j] -= q * m[t][j];
                    }
                }
                if m[i][t] != 0 {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let q = m[t][j] / p;
                if q != 0 {
                    for row in m.iter_mut().skip(t) {
                        row[j] -= q * row[t];
                    }
                }
                if m[t][j] != 0 {
                    clean = false;
                }
            }
            if !clean {
                // move the smallest remainder in row/column t to the pivot
                let mut best = (t, t);
                for i in t + 1..rows {
                    if m[i][t] != 0 && m[i][t].abs() < m[best.0][best.1].abs() {
                        best = (i, t);
                    }
                }
                for j in t + 1..cols {
                    if m[t][j] != 0 && m[t][j].abs() < m[best.0][best.1].abs() {
                        best = (t, j);
                    }
                }
                m.swap(t, best.0);
                for row in m.iter_mut() {
                    row.swap(t, best.1);
                }
                continue;
            }
            let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| m[i][j] % p != 0));
            match bad {
                Some(i) => {
                    for j in t..cols {
                        m[t][j] += m[i][j];
                    }
                }
                None => break,
            }
        }
        out.push(m[t][t].abs() as i64);
    }
    out
}

/// Column-style completion by extended-gcd row reduction of the generator
/// matrix. Standard basis vectors are tried first for `K_star`, so simple
/// resonances get simple frames.
pub fn complete_frame(generators: &[Vec<i64>]) -> Result<Frame, LatticeError> {
    let m0 = generators.len();
    if m0 == 0 {
        return Err(LatticeError::BadShape);
    }
    let d = generators[0].len();
    if d == 0 || generators.iter().any(|g| g.len() != d) {
        return Err(LatticeError::BadShape);
    }
    if m0 >= d {
        return Err(LatticeError::NoFastAngle { d, m0 });
    }
    let gmat: Vec<Vec<i64>> = (0..d).map(|i| generators.iter().map(|g| g[i]).collect()).collect();
    let factors = smith_invariants(&gmat);
    if factors.len() < m0 {
        return Err(LatticeError::Dependent { rank: factors.len(), m0 });
    }
    if let Some(&offending) = factors.iter().find(|&&f| f != 1) {
        return Err(LatticeError::NotCompletable { factors, offending });
    }
    let m = d - m0;
    let assemble = |kstar: &[Vec<i128>]| -> Vec<Vec<i128>> {
        (0..d).map(|i| kstar.iter().map(|c| c[i]).chain(generators.iter().map(|g| g[i] as i128)).collect()).collect()
    };
    let mut kstar: Option<Vec<Vec<i128>>> = None;
    let mut fallback: Option<Vec<Vec<i128>>> = None;
    for combo in combinations(d, m) {
        let cols: Vec<Vec<i128>> = combo.iter().map(|&e| (0..d).map(|i| (i == e) as i128).collect()).collect();
        match det_i128(&assemble(&cols)) {
            1 => {
                kstar = Some(cols);
                break;
            }
            -1 if fallback.is_none() => fallback = Some(cols),
            _ => {}
        }
    }
    let mut kstar = match (kstar, fallback) {
        (Some(k), _) => k,
        (None, Some(k)) => k,
        (None, None) => extended_gcd_completion(&gmat, d, m0)?,
    };
    if det_i128(&assemble(&kstar)) == -1 {
        for x in kstar[0].iter_mut() {
            *x = -*x;
        }
    }
    let k0 = assemble(&kstar);
    let det = det_i128(&k0);
    if det != 1 {
        return Err(LatticeError::NotUnimodular { det: det as i64 });
    }
    let k0: Vec<Vec<i64>> = k0
        .iter()
        .map(|r| r.iter().map(|&x| i64::try_from(x).map_err(|_| LatticeError::Overflow)).collect())
        .collect::<Result<_, _>>()?;
    Ok(Frame { d, m0, generators: generators.to_vec(), k0 })
}

/// Reduce `U G = [I; 0]` by unimodular row operations; the trailing
/// columns of `U^{-1}` complete `G`.
fn extended_gcd_completion(g: &[Vec<i64>], d: usize, m0: usize) -> Result<Vec<Vec<i128>>, LatticeError> {
    let mut a = to_i128(g);
    // uinv is stored row-major; row operations on a become column operations on uinv
    let mut uinv: Vec<Vec<i128>> = (0..d).map(|i| (0..d).map(|j| (i == j) as i128).collect()).collect();
    let chk = |x: i128| if x.abs() > (1i128 << 100) { Err(LatticeError::Overflow) } else { Ok(x) };
    for c in 0..m0 {
        for r in c + 1..d {
            if a[r][c] == 0 {
                continue;
            }
            let (x, y) = (a[c][c], a[r][c]);
            let (gg, s, t) = egcd(x, y);
            let (xg, yg) = (x / gg, y / gg);
            for j in 0..m0 {
                let (ac, ar) = (a[c][j], a[r][j]);
                a[c][j] = chk(s * ac + t * ar)?;
                a[r][j] = chk(-yg * ac + xg * ar)?;
            }
            for row in uinv.iter_mut() {
                let (uc, ur) = (row[c], row[r]);
                row[c] = chk(uc * xg + ur * yg)?;
                row[r] = chk(-uc * t + ur * s)?;
            }
        }
        if a[c][c] == -1 {
            for j in 0..m0 {
                a[c][j] = -a[c][j];
            }
            for row in uinv.iter_mut() {
                row[c] = -row[c];
            }
        }
        if a[c][c] != 1 {
            return Err(LatticeError::NotCompletable {
                factors: vec![a[c][c].abs() as i64],
                offending: a[c][c].abs() as i64,
            });
        }
        for r in 0..c {
            let q = a[r][c];
            if q != 0 {
                for j in 0..m0 {
                    a[r][j] -= q * a[c][j];
                }
                for row in uinv.iter_mut() {
                    row[c] = chk(row[c] + q * row[r])?;
                }
            }
        }
    }
    Ok((m0..d).map(|j| (0..d).map(|i| uinv[i][j]).collect()).collect())
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Result of the exact frame check: `M^T Omega M - Omega` with
/// `M = blockdiag(adj(K0)^T, K0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCheck {
    pub holds: bool,
    pub defect: Vec<Vec<i64>>,
}

pub fn check_symplectic_frame(k0: &[Vec<i64>]) -> FrameCheck {
    let d = k0.len();
    let a = to_i128(k0);
    let adj = adjugate(&a);
    let n = 2 * d;
    let mut mm = vec![vec![0i128; n]; n];
    for i in 0..d {
        for j in 0..d {
            mm[i][j] = adj[j][i];
            mm[d + i][d + j] = a[i][j];
        }
    }
    let omega = |i: usize, j: usize| -> i128 {
        if i < d && j == i + d {
            1
        } else if i >= d && j + d == i {
            -1
        } else {
            0
        }
    };
    let mut defect = vec![vec![0i64; n]; n];
    let mut holds = true;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0i128;
            for p in 0..n {
                if mm[p][i] == 0 {
                    continue;
                }
                for q in 0..n {
                    s += mm[p][i] * omega(p, q) * mm[q][j];
                }
            }
            let dv = s - omega(i, j);
            defect[i][j] = dv as i64;
            holds &= dv == 0;
        }
    }
    FrameCheck { holds, defect }
}

/// Points of the resonant surface `{y : K_prime^T grad H0(y) = 0}` inside a
/// box, found by minimum-norm Newton from a uniform seed grid.
pub fn resonant_surface_sample(
    h0: &ActionFunction,
    frame: &Frame,
    lo: &[f64],
    hi: &[f64],
    count: usize,
) -> Vec<Vec<f64>> {
    let d = frame.d;
    assert_eq!(lo.len(), d);
    assert_eq!(hi.len(), d);
    let kp = DMatrix::from_fn(d, frame.m0, |i, j| frame.k0[i][frame.m() + j] as f64);
    let per_dim = 16usize;
    let total = per_dim.pow(d as u32).min(1 << 16);
    let stride = (per_dim.pow(d as u32) / total).max(1);
    let seeds: Vec<Vec<f64>> = (0..total)
        .map(|s| {
            let mut idx = s * stride;
            (0..d)
                .map(|i| {
                    let c = idx % per_dim;
                    idx /= per_dim;
                    lo[i] + (hi[i] - lo[i]) * (c as f64 + 0.5) / per_dim as f64
                })
                .collect()
        })
        .collect();
    let solved: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|seed| {
            let mut y = DVector::from_column_slice(seed);
            for _ in 0..50 {
                let c = kp.transpose() * h0.gradient(y.as_slice());
                if c.norm() <= 1e-10 {
                    return Some(y.as_slice().to_vec());
                }
                let j = kp.transpose() * h0.hessian(y.as_slice());
                let jjt = &j * j.transpose();
                let step = jjt.lu().solve(&c)?;
                y -= j.transpose() * step;
                if !y.iter().all(|v| v.is_finite()) {
                    return None;
                }
            }
            let c = kp.transpose() * h0.gradient(y.as_slice());
            (c.norm() <= 1e-10).then(|| y.as_slice().to_vec())
        })
        .collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in solved.into_iter().flatten() {
        if out.len() >= count {
            break;
        }
        let inside = p.iter().enumerate().all(|(i, &v)| v >= lo[i] && v <= hi[i]);
        let fresh = out.iter().all(|q| q.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > 1e-8);
        if inside && fresh {
            out.push(p);
        }
    }
    out
}
