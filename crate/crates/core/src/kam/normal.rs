use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::KamError;
use crate::series::{Cutoffs, EvalPlan, Series, Signature, Trig, Var};

/// `N = e + <omega, y> + (delta / 2) <w, M w> + higher(w)` with
/// `w = (y, u, v)`, where `higher` has vanishing 2-jet at `w = 0`.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub e: f64,
    pub omega: DVector<f64>,
    pub m: DMatrix<f64>,
    pub delta: f64,
    pub higher: Series,
}

/// The angle-averaged constant and linear data of a perturbation:
/// `P000 + <p, w>`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearData {
    pub p000: f64,
    pub p: DVector<f64>,
}

/// A translation `w -> w + w0` of the polynomial variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub w0: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialShift {
    pub shift: Shift,
    /// Preserved frequency components.
    pub preserved: Vec<usize>,
    /// Row exchange: preserved fast rows, then resonant rows, then the rest.
    pub order: Vec<usize>,
    /// Elimination block `D1` of `T1 = [[I, 0], [D1, I]]`, row-major.
    pub d1: Vec<Vec<f64>>,
    /// Frequency change on the components that are not preserved.
    pub drift: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoShift {
    pub shift: Shift,
    /// The frequency ratio is `1 + t`.
    pub t: f64,
    pub energy_error: f64,
    pub preserved: Vec<usize>,
}

fn origin(sig: &Signature, w: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; sig.m];
    s.extend_from_slice(w);
    s
}

/// Value, gradient and Hessian in `w` of an angle-free series.
struct Jet {
    sig: Signature,
    value: EvalPlan,
    grad: Vec<EvalPlan>,
    hess: Vec<Vec<EvalPlan>>,
}

fn poly_var(sig: &Signature, i: usize) -> Var {
    if i < sig.m {
        Var::Y(i)
    } else if i < sig.m + sig.m0 {
        Var::U(i - sig.m)
    } else {
        Var::V(i - sig.m - sig.m0)
    }
}

impl Jet {
    fn new(n: &Series, eps: f64) -> Jet {
        let sig = n.signature();
        let q = sig.polys();
        let g: Vec<Series> = (0..q).map(|i| n.partial(poly_var(&sig, i))).collect();
        let hess =
            (0..q).map(|i| (0..q).map(|j| EvalPlan::new(&g[i].partial(poly_var(&sig, j)), eps)).collect()).collect();
        Jet { sig, value: EvalPlan::new(n, eps), grad: g.iter().map(|s| EvalPlan::new(s, eps)).collect(), hess }
    }

    fn at(&self, w: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let s = origin(&self.sig, w);
        let q = w.len();
        (
            self.value.eval(&s),
            DVector::from_iterator(q, self.grad.iter().map(|p| p.eval(&s))),
            DMatrix::from_fn(q, q, |i, j| self.hess[i][j].eval(&s)),
        )
    }
}

impl NormalForm {
    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    /// The full series `N + P000 + <p, w>`.
    pub fn to_series(&self, sig: Signature, cut: Cutoffs, lin: Option<&LinearData>) -> Series {
        let q = sig.polys();
        let zero = vec![0; sig.waves()];
        let mut s = self.higher.with_cutoffs(cut);
        let mono = |idx: &[usize]| {
            let mut mo = vec![0u8; q];
            for &i in idx {
                mo[i] += 1;
            }
            mo
        };
        s.add_term(0, &zero, Trig::Cos, &mono(&[]), self.e + lin.map_or(0.0, |l| l.p000));
        for i in 0..q {
            let w = if i < sig.m { self.omega[i] } else { 0.0 };
            s.add_term(0, &zero, Trig::Cos, &mono(&[i]), w + lin.map_or(0.0, |l| l.p[i]));
            s.add_term(0, &zero, Trig::Cos, &mono(&[i, i]), 0.5 * self.delta * self.m[(i, i)]);
            for j in i + 1..q {
                s.add_term(0, &zero, Trig::Cos, &mono(&[i, j]), 0.5 * self.delta * (self.m[(i, j)] + self.m[(j, i)]));
            }
        }
        s.prune();
        s
    }
}

/// Read a normal form off an angle-free series, relative to prescribed
/// energy and frequency: the mismatch goes into the linear data.
pub fn split_normal_form(n: &Series, delta: f64, eps: f64, omega: &[f64], energy: f64) -> (NormalForm, LinearData) {
    let sig = n.signature();
    let q = sig.polys();
    let numeric = n.at_eps(eps);
    let (e, g, h) = Jet::new(&numeric, 1.0).at(&vec![0.0; q]);
    let mut p = g.clone();
    for i in 0..sig.m {
        p[i] -= omega[i];
    }
    let nf0 = NormalForm {
        e,
        omega: DVector::from_iterator(sig.m, g.iter().take(sig.m).copied()),
        m: &h / delta,
        delta,
        higher: Series::zero(sig, numeric.cutoffs()),
    };
    let jet2 = nf0.to_series(
        sig,
        numeric.cutoffs(),
        Some(&LinearData {
            p000: 0.0,
            p: {
                let mut z = g.clone();
                z.rows_mut(0, sig.m).fill(0.0);
                z
            },
        }),
    );
    let higher = &numeric - &jet2;
    let nf = NormalForm { e: energy, omega: DVector::from_column_slice(omega), higher, ..nf0 };
    (nf, LinearData { p000: e - energy, p })
}

fn rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let mx = sv.max();
    if mx == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * mx).count()
}

const MAX_NEWTON: usize = 50;

fn newton(
    mut x: DVector<f64>,
    tol: f64,
    mut eval: impl FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
) -> Result<(DVector<f64>, f64, usize), KamError> {
    let mut res = f64::INFINITY;
    for it in 0..MAX_NEWTON {
        let (f, j) = eval(&x);
        res = f.amax();
        if res <= tol {
            return Ok((x, res, it));
        }
        let step = j.lu().solve(&f).ok_or(KamError::NoConvergence { residual: res, iterations: it })?;
        x -= step;
    }
    let (f, _) = eval(&x);
    let last = f.amax();
    if last <= tol {
        return Ok((x, last, MAX_NEWTON));
    }
    Err(KamError::NoConvergence { residual: res.min(last), iterations: MAX_NEWTON })
}

/// Solve `delta M w0 + delta grad h(w0) = -p` so that the shifted normal
/// form keeps `omega` and has no linear term in `z`.
pub fn frequency_shift_full(nf: &NormalForm, lin: &LinearData) -> Result<Shift, KamError> {
    let q = nf.size();
    let r = rank(&nf.m);
    if r < q {
        return Err(KamError::SingularNormalForm { rank: r, size: q });
    }
    let sig = nf.higher.signature();
    let jet = Jet::new(&nf.to_series(sig, nf.higher.cutoffs(), Some(lin)), 1.0);
    let target = target_vector(nf, 1.0);
    let (w, res, it) = newton(DVector::zeros(q), 1e-13, |w| {
        let (_, g, h) = jet.at(w.as_slice());
        (g - &target, h)
    })?;
    Ok(Shift { w0: w.as_slice().to_vec(), residual: res, iterations: it })
}

fn target_vector(nf: &NormalForm, scale: f64) -> DVector<f64> {
    let mut t = DVector::zeros(nf.size());
    for i in 0..nf.omega.len() {
        t[i] = scale * nf.omega[i];
    }
    t
}

/// Pivoted Gram-Schmidt on the rows of `M`: the resonant rows first, then
/// fast rows by decreasing residual norm (ties to the lowest index).
fn pivot_rows(m: &DMatrix<f64>, fast: usize) -> Result<Vec<usize>, KamError> {
    let q = m.nrows();
    let scale = (0..q).map(|i| m.row(i).norm()).fold(0.0, f64::max);
    let tol = 1e-8 * scale.max(f64::MIN_POSITIVE);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let residual = |basis: &[DVector<f64>], i: usize| {
        let mut v: DVector<f64> = m.row(i).transpose();
        for b in basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        v
    };
    for i in fast..q {
        let v = residual(&basis, i);
        let nv = v.norm();
        if nv <= tol {
            return Err(KamError::ConditionViolated("A2: the resonant rows of M are dependent".into()));
        }
        basis.push(v / nv);
    }
    let mut chosen = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..fast).filter(|i| !chosen.contains(i)) {
            let nv = residual(&basis, i).norm();
            if best.is_none_or(|(_, b)| nv > b) {
                best = Some((i, nv));
            }
        }
        match best {
            Some((i, nv)) if nv > tol => {
                basis.push(residual(&basis, i) / nv);
                chosen.push(i);
            }
            _ => break,
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// The shift for singular `M`: preserve the frequency components whose rows
/// of `M` are independent, set the other fast shift components to zero and
/// report the drift of the rest.
pub fn frequency_shift_partial(nf: &NormalForm, lin: &LinearData) -> Result<PartialShift, KamError> {
    let q = nf.size();
    let fast = nf.omega.len();
    let preserved = pivot_rows(&nf.m, fast)?;
    let unknowns: Vec<usize> = preserved.iter().copied().chain(fast..q).collect();
    let rest: Vec<usize> = (0..fast).filter(|i| !preserved.contains(i)).collect();
    let sig = nf.higher.signature();
    let jet = Jet::new(&nf.to_series(sig, nf.higher.cutoffs(), Some(lin)), 1.0);
    let target = target_vector(nf, 1.0);
    let embed = |x: &DVector<f64>| {
        let mut w = vec![0.0; q];
        for (a, &i) in unknowns.iter().enumerate() {
            w[i] = x[a];
        }
        w
    };
    let n = unknowns.len();
    let (x, res, it) = newton(DVector::zeros(n), 1e-13, |x| {
        let w = embed(x);
        let (_, g, h) = jet.at(&w);
        let f = DVector::from_iterator(n, unknowns.iter().map(|&i| g[i] - target[i]));
        let j = DMatrix::from_fn(n, n, |a, b| h[(unknowns[a], unknowns[b])]);
        (f, j)
    })?;
    let w0 = embed(&x);
    let (_, g, _) = jet.at(&w0);
    let drift = rest.iter().map(|&i| g[i] - target[i]).collect();
    let mu = DMatrix::from_fn(n, q, |a, b| nf.m[(unknowns[a], b)]);
    let mj = DMatrix::from_fn(rest.len(), q, |a, b| nf.m[(rest[a], b)]);
    let gram = &mu * mu.transpose();
    let d1 = match gram.try_inverse() {
        Some(inv) => -(mj * mu.transpose() * inv),
        None => DMatrix::zeros(rest.len(), n),
    };
    Ok(PartialShift {
        shift: Shift { w0, residual: res, iterations: it },
        order: unknowns.iter().chain(&rest).copied().collect(),
        preserved,
        d1: (0..d1.nrows()).map(|i| d1.row(i).iter().copied().collect()).collect(),
        drift,
    })
}

/// Preserve the energy and the frequency ratios: solve for `(w0, t)` with
/// shifted frequency `(1 + t) omega` and shifted energy `e`. A singular `M`
/// uses the preserved rows of the partial shift.
pub fn frequency_shift_isoenergetic(nf: &NormalForm, lin: &LinearData) -> Result<IsoShift, KamError> {
    let q = nf.size();
    let fast = nf.omega.len();
    let preserved: Vec<usize> = if rank(&nf.m) == q { (0..fast).collect() } else { pivot_rows(&nf.m, fast)? };
    let unknowns: Vec<usize> = preserved.iter().copied().chain(fast..q).collect();
    let sig = nf.higher.signature();
    let jet = Jet::new(&nf.to_series(sig, nf.higher.cutoffs(), Some(lin)), 1.0);
    let omega_bar = target_vector(nf, 1.0);
    let n = unknowns.len();
    let embed = |x: &DVector<f64>| {
        let mut w = vec![0.0; q];
        for (a, &i) in unknowns.iter().enumerate() {
            w[i] = x[a];
        }
        w
    };
    let (x, res, it) = newton(DVector::zeros(n + 1), 1e-12, |x| {
        let t = x[n];
        let w = embed(x);
        let (e, g, h) = jet.at(&w);
        let mut f = DVector::zeros(n + 1);
        let mut j = DMatrix::zeros(n + 1, n + 1);
        for (a, &i) in unknowns.iter().enumerate() {
            f[a] = g[i] - (1.0 + t) * omega_bar[i];
            for (b, &k) in unknowns.iter().enumerate() {
                j[(a, b)] = h[(i, k)];
            }
            j[(a, n)] = -omega_bar[i];
            j[(n, a)] = g[i];
        }
        f[n] = e - nf.e;
        (f, j)
    })?;
    let w0 = embed(&x);
    let (e, _, _) = jet.at(&w0);
    Ok(IsoShift {
        shift: Shift { w0, residual: res, iterations: it },
        t: x[n],
        energy_error: (e - nf.e).abs(),
        preserved,
    })
}
