use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{ActionFunction, Frame};
use crate::series::{Series, Var};

/// Singular values below `RANK_TOL` times the largest count as zero.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionName {
    S1,
    S2,
    S3,
    #[serde(rename = "S3'")]
    S3Prime,
    S4,
    S5,
    S6,
    S7,
    S8,
    A1,
    A2,
    A3,
}

impl ConditionName {
    pub const ALL_S: [ConditionName; 9] = [
        ConditionName::S1,
        ConditionName::S2,
        ConditionName::S3,
        ConditionName::S3Prime,
        ConditionName::S4,
        ConditionName::S5,
        ConditionName::S6,
        ConditionName::S7,
        ConditionName::S8,
    ];

    pub fn parse(s: &str) -> Option<ConditionName> {
        use ConditionName::*;
        Some(match s {
            "S1" => S1,
            "S2" => S2,
            "S3" => S3,
            "S3'" | "S3p" => S3Prime,
            "S4" => S4,
            "S5" => S5,
            "S6" => S6,
            "S7" => S7,
            "S8" => S8,
            "A1" => A1,
            "A2" => A2,
            "A3" => A3,
            _ => return None,
        })
    }
}

/// One verdict with the data needed to recompute it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub name: ConditionName,
    pub holds: bool,
    /// Expected rank of the main test matrix, when there is one.
    pub expected: Option<usize>,
    /// Rank of the main test matrix at each sample.
    pub ranks: Vec<usize>,
    pub singular_values: Vec<Vec<f64>>,
    pub threshold: f64,
    pub samples: Vec<Vec<f64>>,
    /// Scalar witness, e.g. the lower bound for S4.
    pub value: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
    /// The preserved-frequency count read off the witnesses.
    pub n: Option<usize>,
}

impl ConditionReport {
    pub fn get(&self, name: ConditionName) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConditionError {
    #[error("no sample points supplied")]
    NoSamples,
    #[error("preserved-frequency count differs across samples: {counts:?}")]
    InconsistentN { counts: Vec<i64> },
    #[error("{0:?} needs the averaged perturbation")]
    MissingPotential(ConditionName),
}

/// Rank by relative singular-value threshold, with the singular values in
/// decreasing order. The zero matrix has rank 0.
pub fn numeric_rank(a: &DMatrix<f64>) -> (usize, Vec<f64>) {
    if a.is_empty() {
        return (0, vec![]);
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let top = sv[0];
    let rank = if top == 0.0 { 0 } else { sv.iter().filter(|&&s| s > RANK_TOL * top).count() };
    (rank, sv)
}

fn bordered(a: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut b = DMatrix::zeros(n + 1, n + 1);
    b.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        b[(i, n)] = w[i];
        b[(n, i)] = w[i];
    }
    b
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(p + q, p + q);
    out.view_mut((0, 0), (p, p)).copy_from(a);
    out.view_mut((p, p), (q, q)).copy_from(b);
    out
}

fn multi_indices(p: usize, max: usize) -> Vec<Vec<usize>> {
    fn rec(p: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for a in 0..=left {
            cur.push(a);
            rec(p, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(p, max, &mut Vec::new(), &mut out);
    out.sort_by_key(|a| a.iter().sum::<usize>());
    out
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Mixed central difference `d^alpha f(x)` by tensor stencils.
fn derivative(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], alpha: &[usize], out_dim: usize) -> Vec<f64> {
    let order: usize = alpha.iter().sum();
    if order == 0 {
        return f(x);
    }
    let h = f64::EPSILON.powf(1.0 / (order as f64 + 2.0)).max(1e-6);
    let mut acc = vec![0.0; out_dim];
    let mut idx = vec![0usize; alpha.len()];
    let mut pt = x.to_vec();
    loop {
        let mut w = 1.0;
        for (i, (&a, &j)) in alpha.iter().zip(&idx).enumerate() {
            w *= if j % 2 == 0 { 1.0 } else { -1.0 } * binom(a, j);
            pt[i] = x[i] + (a as f64 / 2.0 - j as f64) * h;
        }
        for (o, v) in acc.iter_mut().zip(f(&pt)) {
            *o += w * v;
        }
        let mut i = 0;
        loop {
            if i == alpha.len() {
                let s = h.powi(order as i32);
                return acc.into_iter().map(|v| v / s).collect();
            }
            idx[i] += 1;
            if idx[i] <= alpha[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Rank of `{d^alpha omega(x) : |alpha| <= m - 1}`.
fn russmann_at(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], m: usize) -> (usize, Vec<f64>) {
    let alphas = multi_indices(x.len(), m.saturating_sub(1));
    let cols: Vec<Vec<f64>> = alphas.iter().map(|a| derivative(f, x, a, m)).collect();
    let mat = DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
    numeric_rank(&mat)
}

const NOISY: f64 = 1e-5;

fn noise_note(svs: &[Vec<f64>]) -> Option<String> {
    let worst = svs
        .iter()
        .filter_map(|sv| {
            let top = *sv.first()?;
            sv.iter().rev().find(|&&s| s > RANK_TOL * top).map(|&s| s / top)
        })
        .fold(f64::INFINITY, f64::min);
    (worst < NOISY).then(|| format!("ill-conditioned derivative collection (ratio {worst:e})"))
}

/// (A1) on `samples` points drawn uniformly from the box `[lo, hi]`.
pub fn check_russmann(
    omega: &dyn Fn(&[f64]) -> Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    m: usize,
    samples: usize,
) -> ConditionEntry {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pts: Vec<Vec<f64>> =
        (0..samples).map(|_| lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()).collect();
    let (ranks, svs): (Vec<usize>, Vec<Vec<f64>>) = pts.iter().map(|p| russmann_at(omega, p, m)).unzip();
    ConditionEntry {
        name: ConditionName::A1,
        holds: ranks.iter().all(|&r| r == m),
        expected: Some(m),
        ranks,
        note: noise_note(&svs),
        singular_values: svs,
        threshold: RANK_TOL,
        samples: pts,
        value: None,
    }
}

/// The x-average of the perturbation, as a function of the resonant
/// angles at `y = v = 0`.
#[derive(Clone, Debug)]
pub struct AveragedPotential {
    pub series: Series,
    pub eps: f64,
    /// S4 is tested on `eps^-kappa` times the potential.
    pub kappa: f64,
    /// Points per resonant angle for the S4 grid.
    pub grid: usize,
    /// Angles at which S3 is tested, usually the relative equilibria.
    pub points: Vec<Vec<f64>>,
}

impl AveragedPotential {
    pub fn hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let sig = self.series.signature();
        let mut z = vec![0.0; sig.state_len()];
        z[2 * sig.m..2 * sig.m + sig.m0].copy_from_slice(u);
        DMatrix::from_fn(sig.m0, sig.m0, |i, j| self.series.partial(Var::U(i)).partial(Var::U(j)).value(&z, self.eps))
    }

    fn grid_points(&self) -> Vec<Vec<f64>> {
        let m0 = self.series.signature().m0;
        let g = self.grid.max(1);
        (0..g.pow(m0 as u32))
            .map(|mut c| {
                (0..m0)
                    .map(|_| {
                        let k = c % g;
                        c /= g;
                        std::f64::consts::TAU * k as f64 / g as f64
                    })
                    .collect()
            })
            .collect()
    }
}

struct AtPoint {
    h: DMatrix<f64>,
    a: DMatrix<f64>,
    ks: DMatrix<f64>,
    kp: DMatrix<f64>,
    omega: DVector<f64>,
}

fn int_mat(rows: usize, cols: Vec<Vec<i64>>) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i] as f64)
}

fn entry(name: ConditionName, expected: Option<usize>, samples: &[Vec<f64>]) -> ConditionEntry {
    ConditionEntry {
        name,
        holds: true,
        expected,
        ranks: vec![],
        singular_values: vec![],
        threshold: RANK_TOL,
        samples: samples.to_vec(),
        value: None,
        note: None,
    }
}

/// Evaluate the requested S-conditions at the resonant-surface `points`.
pub fn check_rank_conditions(
    h0: &ActionFunction,
    frame: &Frame,
    points: &[Vec<f64>],
    p1: Option<&AveragedPotential>,
    which: &[ConditionName],
) -> Result<ConditionReport, ConditionError> {
    use ConditionName::*;
    if points.is_empty() {
        return Err(ConditionError::NoSamples);
    }
    let (d, m, m0) = (frame.d, frame.m(), frame.m0);
    let k0 = frame.matrix();
    let ks = int_mat(d, frame.k_star());
    let kp = int_mat(d, frame.k_prime());
    let data: Vec<AtPoint> = points
        .iter()
        .map(|y| {
            let h = h0.hessian(y);
            AtPoint {
                a: k0.transpose() * &h * &k0,
                omega: ks.transpose() * h0.gradient(y),
                h,
                ks: ks.clone(),
                kp: kp.clone(),
            }
        })
        .collect();
    let counts: Vec<i64> = data.iter().map(|p| numeric_rank(&p.a).0 as i64 - m0 as i64).collect();
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(ConditionError::InconsistentN { counts });
    }
    let n_raw = counts[0];
    let n_ok = n_raw > 0 && n_raw as usize <= m;
    let n = n_raw.max(0) as usize;
    let bar = |w: &DVector<f64>, len: usize| {
        let mut out = DVector::zeros(len);
        out.rows_mut(0, w.len()).copy_from(w);
        out
    };
    let mut entries = Vec::new();
    for &c in which {
        let mut e = entry(c, None, points);
        let record = |e: &mut ConditionEntry, mat: &DMatrix<f64>, want: usize| {
            let (r, sv) = numeric_rank(mat);
            e.holds &= r == want;
            e.ranks.push(r);
            e.singular_values.push(sv);
        };
        match c {
            S1 => {
                e.expected = Some(m);
                for (y, p) in points.iter().zip(&data) {
                    let chart = surface_chart(h0, frame, y, &p.h);
                    let (r, sv) = russmann_at(&chart, &vec![0.0; m], m);
                    e.holds &= r == m;
                    e.ranks.push(r);
                    e.singular_values.push(sv);
                }
                e.note = noise_note(&e.singular_values);
            }
            S2 => {
                e.expected = Some(n + m0);
                e.holds = n_ok;
                for p in &data {
                    record(&mut e, &p.a, n + m0);
                    let mut k = DMatrix::zeros(d, d);
                    k.view_mut((0, 0), (d, m)).copy_from(&p.ks);
                    k.view_mut((0, m), (d, m0)).copy_from(&p.kp);
                    let row = p.kp.transpose() * &p.h * k;
                    let (r, _) = numeric_rank(&row);
                    e.holds &= r == m0;
                }
            }
            S3 => {
                let pot = p1.ok_or(ConditionError::MissingPotential(S3))?;
                e.expected = Some(n + 2 * m0 + 1);
                e.holds = n_ok && !pot.points.is_empty();
                for p in &data {
                    for u in &pot.points {
                        let blk = block_diag(&p.a, &pot.hessian(u));
                        record(&mut e, &bordered(&blk, &bar(&p.omega, m + 2 * m0)), n + 2 * m0 + 1);
                    }
                }
            }
            S3Prime => {
                e.expected = Some(n + m0 + 1);
                e.holds = n_ok;
                for p in &data {
                    record(&mut e, &bordered(&p.a, &bar(&p.omega, d)), n + m0 + 1);
                }
            }
            S4 => {
                let pot = p1.ok_or(ConditionError::MissingPotential(S4))?;
                let scale = pot.eps.powf(-pot.kappa * m0 as f64);
                let grid = pot.grid_points();
                let dets: Vec<f64> = grid.iter().map(|u| (pot.hessian(u).determinant() * scale).abs()).collect();
                let lo = dets.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = dets.iter().copied().fold(0.0, f64::max);
                e.value = Some(lo);
                e.holds = hi > 0.0 && lo > RANK_TOL * hi;
                e.samples = grid;
            }
            S5 => {
                e.expected = Some(n + m0);
                e.holds = n_ok && n < m;
                for p in &data {
                    record(&mut e, &p.a, n + m0);
                    let b = p.kp.transpose() * &p.h * &p.kp;
                    e.holds &= numeric_rank(&b).0 == m0;
                }
            }
            S6 => {
                e.expected = Some(n);
                e.holds = n_ok && n < m;
                for p in &data {
                    let b = p.kp.transpose() * &p.h * &p.kp;
                    let c = p.kp.transpose() * &p.h * &p.ks;
                    let top = p.ks.transpose() * &p.h * &p.ks;
                    match b.clone().try_inverse() {
                        Some(bi) if numeric_rank(&b).0 == m0 => {
                            let schur = top - c.transpose() * bi * c;
                            record(&mut e, &schur, n);
                        }
                        _ => {
                            e.holds = false;
                            e.note = Some("K_prime^T H0'' K_prime is singular".into());
                        }
                    }
                }
            }
            S7 => {
                e.expected = Some(d);
                for p in &data {
                    record(&mut e, &p.h, d);
                    let b = p.kp.transpose() * &p.h * &p.kp;
                    e.holds &= numeric_rank(&b).0 == m0;
                }
            }
            S8 => {
                e.expected = Some(d + 1);
                for p in &data {
                    record(&mut e, &bordered(&p.a, &bar(&p.omega, d)), d + 1);
                }
            }
            A1 | A2 | A3 => {
                e.holds = false;
                e.note = Some("normal-form condition; use check_normal_form_conditions".into());
            }
        }
        entries.push(e);
    }
    Ok(ConditionReport { entries, n: n_ok.then_some(n) })
}

/// `lambda -> omega_star(y(lambda))` where `y(lambda)` moves along the
/// tangent space of the resonant surface at `y` and is projected back.
fn surface_chart<'a>(
    h0: &'a ActionFunction,
    frame: &'a Frame,
    y: &[f64],
    h: &DMatrix<f64>,
) -> impl Fn(&[f64]) -> Vec<f64> + 'a {
    let d = frame.d;
    let kp = int_mat(d, frame.k_prime());
    let ks = int_mat(d, frame.k_star());
    let j = kp.transpose() * h;
    let svd = j.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let range: Vec<DVector<f64>> = order.iter().take(frame.m0).map(|&i| vt.row(i).transpose()).collect();
    // basis of the orthogonal complement of the rows of J
    let mut tangent: Vec<DVector<f64>> = Vec::new();
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        for b in range.iter().chain(tangent.iter()) {
            let c = b.dot(&e);
            e -= b * c;
        }
        let nrm = e.norm();
        if nrm > 1e-8 && tangent.len() < frame.m() {
            tangent.push(e / nrm);
        }
    }
    let y0 = DVector::from_column_slice(y);
    move |lam: &[f64]| {
        let mut p = y0.clone();
        for (t, l) in tangent.iter().zip(lam) {
            p += t * *l;
        }
        for _ in 0..30 {
            let c = kp.transpose() * h0.gradient(p.as_slice());
            if c.norm() <= 1e-14 {
                break;
            }
            let jj = kp.transpose() * h0.hessian(p.as_slice());
            match (&jj * jj.transpose()).lu().solve(&c) {
                Some(s) => p -= jj.transpose() * s,
                None => break,
            }
        }
        (ks.transpose() * h0.gradient(p.as_slice())).as_slice().to_vec()
    }
}

/// (A2) and (A3) for a normal form `(omega, M)` with `m` fast and `m0`
/// resonant pairs. One matrix per parameter sample.
pub fn check_normal_form_conditions(
    ms: &[DMatrix<f64>],
    omegas: &[DVector<f64>],
    m: usize,
    m0: usize,
    which: &[ConditionName],
) -> Result<ConditionReport, ConditionError> {
    use ConditionName::*;
    if ms.is_empty() || ms.len() != omegas.len() {
        return Err(ConditionError::NoSamples);
    }
    let q = m + 2 * m0;
    let counts: Vec<i64> = ms.iter().map(|a| numeric_rank(a).0 as i64 - 2 * m0 as i64).collect();
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(ConditionError::InconsistentN { counts });
    }
    let n_raw = counts[0];
    let n_ok = n_raw > 0 && n_raw as usize <= m;
    let n = n_raw.max(0) as usize;
    let samples: Vec<Vec<f64>> = omegas.iter().map(|w| w.as_slice().to_vec()).collect();
    let mut entries = Vec::new();
    for &c in which {
        let mut e = entry(c, None, &samples);
        match c {
            A2 => {
                e.expected = Some(n + 2 * m0);
                e.holds = n_ok;
                for a in ms {
                    let (r, sv) = numeric_rank(a);
                    e.ranks.push(r);
                    e.singular_values.push(sv);
                    if m0 > 0 {
                        let lower = a.rows(m, 2 * m0).into_owned();
                        e.holds &= numeric_rank(&lower).0 == 2 * m0;
                    }
                }
            }
            A3 => {
                e.expected = Some(n + 2 * m0 + 1);
                e.holds = n_ok;
                for (a, w) in ms.iter().zip(omegas) {
                    let mut wb = DVector::zeros(q);
                    wb.rows_mut(0, m).copy_from(&w.rows(0, m));
                    let (r, sv) = numeric_rank(&bordered(a, &wb));
                    e.holds &= r == n + 2 * m0 + 1;
                    e.ranks.push(r);
                    e.singular_values.push(sv);
                }
            }
            _ => {
                e.holds = false;
                e.note = Some("not a normal-form condition".into());
            }
        }
        entries.push(e);
    }
    Ok(ConditionReport { entries, n: n_ok.then_some(n) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::complete_frame;

    #[test]
    fn russmann_examples() {
        let id = |l: &[f64]| l.to_vec();
        assert!(check_russmann(&id, &[1.0, 1.0], &[2.0, 2.0], 2, 20).holds);
        let flat = |l: &[f64]| vec![l[0], l[0]];
        assert!(!check_russmann(&flat, &[1.0, 1.0], &[2.0, 2.0], 2, 20).holds);
        let curve = |l: &[f64]| vec![1.0, l[0], l[0] * l[0]];
        let e = check_russmann(&curve, &[0.5], &[1.5], 3, 20);
        assert!(e.holds, "{:?}", e.singular_values[0]);
    }

    #[test]
    fn diag_with_zero_gives_n_one() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 1.0, 1.0]));
        let w = DVector::from_vec(vec![1.0, 2f64.sqrt(), 0.0, 0.0]);
        let r = check_normal_form_conditions(&[m], &[w], 2, 1, &[ConditionName::A2]).unwrap();
        assert_eq!(r.n, Some(1));
        assert!(r.get(ConditionName::A2).unwrap().holds);
    }

    #[test]
    fn bordered_identity() {
        let w = DVector::from_vec(vec![0.3, -0.4]);
        let b = bordered(&DMatrix::identity(2, 2), &w);
        assert!((b.determinant() + w.norm_squared()).abs() < 1e-15);
    }

    #[test]
    fn convex_quadratic_is_g_nondegenerate() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let h0 = ActionFunction::quadratic(a.clone(), b.clone());
        let f = complete_frame(&[vec![1, 1]]).unwrap();
        // K'^T (A y + b) = 0 on the line 2.5 y1 + 1.5 y2 = 0
        let pts = vec![vec![0.3, -0.5], vec![-0.6, 1.0]];
        let r = check_rank_conditions(&h0, &f, &pts, None, &[ConditionName::S7, ConditionName::S2]).unwrap();
        assert!(r.get(ConditionName::S7).unwrap().holds);
        assert_eq!(r.n, Some(1));
    }
}
