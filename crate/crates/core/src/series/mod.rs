//! Truncated Fourier-Taylor series on `T^m x R^m x R^{2 m0}`.
//!
//! A series is a finite sum of terms
//!
//! ```text
//! c * eps^(g / den) * trig(k . x + l . u) * y^a u^b v^c
//! ```
//!
//! where `trig` is `cos` or `sin`, `(k, l)` is a wavevector over the `m`
//! fast angles `x` and the `m0` resonant angles `u`, and `(a, b, c)` is a
//! monomial exponent over the `m + 2 m0` polynomial variables `(y, u, v)`.
//! The resonant angle `u` may appear both periodically (through `l`) and
//! polynomially (through `b`); the latter shape arises after expanding
//! around a critical point.
//!
//! Cosine and sine are kept as a real basis per wavevector orbit
//! `{w, -w}`: every stored wavevector is canonical (first nonzero
//! component positive) and `sin 0` never appears.

mod eval;
mod literal;
mod ops;

pub use eval::EvalPlan;
pub use literal::{SeriesLiteral, TermLiteral};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Coefficients with magnitude below this are dropped after every operation.
pub const PRUNE: f64 = 1e-16;

pub type Wave = SmallVec<[i32; 8]>;
pub type Mono = SmallVec<[u8; 12]>;

/// Dimensions of the phase space: `m` fast angles, `m0` resonant pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub m: usize,
    pub m0: usize,
}

impl Signature {
    pub fn new(m: usize, m0: usize) -> Self {
        assert!(m >= 1, "at least one fast angle is required");
        Signature { m, m0 }
    }

    /// Length of a wavevector `(k, l)`.
    pub fn waves(&self) -> usize {
        self.m + self.m0
    }

    /// Number of polynomial variables `(y, u, v)`.
    pub fn polys(&self) -> usize {
        self.m + 2 * self.m0
    }

    /// Length of a state vector `(x, y, u, v)`.
    pub fn state_len(&self) -> usize {
        2 * self.m + 2 * self.m0
    }
}

/// Storage cutoffs shared by every series taking part in an operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cutoffs {
    /// Maximum `|(k, l)|_1`.
    pub fourier: u32,
    /// Maximum total degree in `(y, u, v)`.
    pub degree: u32,
    /// Terms above this grade are dropped.
    pub grade_cap: Option<i32>,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs { fourier: 12, degree: 6, grade_cap: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Cos,
    Sin,
}

/// A phase-space variable, used to address derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
    U(usize),
    V(usize),
}

/// Identifies one basis function. The derived ordering sorts by grade,
/// then `|w|_1`, then `w`, then the monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    pub grade: i32,
    pub norm1: u32,
    pub wave: Wave,
    pub mono: Mono,
    pub trig: Trig,
}

impl Key {
    pub fn new(grade: i32, wave: Wave, trig: Trig, mono: Mono) -> Self {
        let norm1 = wave.iter().map(|k| k.unsigned_abs()).sum();
        Key { grade, norm1, wave, mono, trig }
    }

    pub fn degree(&self) -> u32 {
        self.mono.iter().map(|&a| a as u32).sum()
    }

    /// The fast-angle part `k` of the wavevector.
    pub fn k<'a>(&'a self, sig: &Signature) -> &'a [i32] {
        &self.wave[..sig.m]
    }

    /// The resonant-angle part `l` of the wavevector.
    pub fn l<'a>(&'a self, sig: &Signature) -> &'a [i32] {
        &self.wave[sig.m..]
    }

    pub fn is_x_free(&self, sig: &Signature) -> bool {
        self.k(sig).iter().all(|&k| k == 0)
    }

    pub fn is_trig_free(&self) -> bool {
        self.norm1 == 0
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SeriesError {
    #[error("signature or cutoff mismatch: {0}")]
    SignatureMismatch(String),
    #[error("malformed series literal: {0}")]
    Literal(String),
    #[error("evaluation point has wrong dimension: expected {expected}, got {got}")]
    PointDimension { expected: usize, got: usize },
}

/// Canonicalize a wavevector in place. Returns the sign the sine basis
/// function picks up, or `None` when the vector is zero.
pub(crate) fn canonicalize(wave: &mut Wave) -> Option<f64> {
    match wave.iter().find(|&&k| k != 0) {
        None => None,
        Some(&first) if first > 0 => Some(1.0),
        Some(_) => {
            for k in wave.iter_mut() {
                *k = -*k;
            }
            Some(-1.0)
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct Series {
    sig: Signature,
    cut: Cutoffs,
    grade_den: u32,
    terms: BTreeMap<Key, f64>,
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Series(m={}, m0={}, {} terms)", self.sig.m, self.sig.m0, self.terms.len())?;
        for (key, c) in &self.terms {
            writeln!(
                f,
                "  {c:+.6e} eps^{} {:?}{:?} {:?}",
                key.grade,
                key.trig,
                key.wave.as_slice(),
                key.mono.as_slice()
            )?;
        }
        Ok(())
    }
}

impl Series {
    pub fn zero(sig: Signature, cut: Cutoffs) -> Self {
        Series { sig, cut, grade_den: 1, terms: BTreeMap::new() }
    }

    pub fn constant(sig: Signature, cut: Cutoffs, c: f64) -> Self {
        let mut s = Series::zero(sig, cut);
        s.add_term(0, &vec![0; sig.waves()], Trig::Cos, &vec![0; sig.polys()], c);
        s
    }

    /// The polynomial variable `var` (which must not be `X`).
    pub fn var(sig: Signature, cut: Cutoffs, var: Var) -> Self {
        let mut mono = vec![0u8; sig.polys()];
        mono[poly_index(&sig, var).expect("angle x is not a polynomial variable")] = 1;
        let mut s = Series::zero(sig, cut);
        s.add_term(0, &vec![0; sig.waves()], Trig::Cos, &mono, 1.0);
        s
    }

    /// A single trigonometric mode `trig(k . x + l . u)` with unit coefficient.
    pub fn mode(sig: Signature, cut: Cutoffs, wave: &[i32], trig: Trig) -> Self {
        let mut s = Series::zero(sig, cut);
        s.add_term(0, wave, trig, &vec![0; sig.polys()], 1.0);
        s
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn cutoffs(&self) -> Cutoffs {
        self.cut
    }

    /// Grades are measured in units of `eps^(1/grade_den)`.
    pub fn grade_den(&self) -> u32 {
        self.grade_den
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, f64)> {
        self.terms.iter().map(|(k, &c)| (k, c))
    }

    pub fn coefficient(&self, key: &Key) -> f64 {
        self.terms.get(key).copied().unwrap_or(0.0)
    }

    /// Coefficient lookup that accepts a non-canonical wavevector.
    pub fn coeff(&self, grade: i32, wave: &[i32], trig: Trig, mono: &[u8]) -> f64 {
        let mut w: Wave = wave.iter().copied().collect();
        match canonicalize(&mut w) {
            None if trig == Trig::Sin => 0.0,
            None => self.coefficient(&Key::new(grade, w, trig, mono.iter().copied().collect())),
            Some(sign) => {
                let c = self.coefficient(&Key::new(grade, w, trig, mono.iter().copied().collect()));
                if trig == Trig::Sin {
                    sign * c
                } else {
                    c
                }
            }
        }
    }

    /// Add `c * eps^grade * trig(w . theta) * mono` respecting cutoffs.
    /// Non-canonical wavevectors are folded onto their canonical partner.
    pub fn add_term(&mut self, grade: i32, wave: &[i32], trig: Trig, mono: &[u8], c: f64) {
        assert_eq!(wave.len(), self.sig.waves(), "wavevector length");
        assert_eq!(mono.len(), self.sig.polys(), "monomial length");
        let mut w: Wave = wave.iter().copied().collect();
        let sign = match canonicalize(&mut w) {
            None if trig == Trig::Sin => return,
            None => 1.0,
            Some(s) if trig == Trig::Sin => s,
            Some(_) => 1.0,
        };
        self.insert(Key::new(grade, w, trig, mono.iter().copied().collect()), sign * c);
    }

    /// Accumulate onto an already-canonical key, enforcing cutoffs.
    pub(crate) fn insert(&mut self, key: Key, c: f64) {
        if !self.admits(&key) || c == 0.0 {
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
        }
    }

    pub(crate) fn admits(&self, key: &Key) -> bool {
        key.norm1 <= self.cut.fourier
            && key.degree() <= self.cut.degree
            && self.cut.grade_cap.is_none_or(|cap| key.grade <= cap)
    }

    /// Drop coefficients with magnitude below [`PRUNE`].
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE);
    }

    pub(crate) fn from_parts(sig: Signature, cut: Cutoffs, grade_den: u32, terms: BTreeMap<Key, f64>) -> Self {
        let mut s = Series { sig, cut, grade_den, terms };
        s.terms.retain(|k, c| {
            k.norm1 <= cut.fourier
                && k.degree() <= cut.degree
                && cut.grade_cap.is_none_or(|cap| k.grade <= cap)
                && c.abs() >= PRUNE
        });
        s
    }

    /// Same terms under different cutoffs (terms outside them are dropped).
    pub fn with_cutoffs(&self, cut: Cutoffs) -> Series {
        Series::from_parts(self.sig, cut, self.grade_den, self.terms.clone())
    }

    pub fn check_compatible(&self, other: &Series) -> Result<(), SeriesError> {
        if self.sig != other.sig {
            return Err(SeriesError::SignatureMismatch(format!("signatures {:?} and {:?}", self.sig, other.sig)));
        }
        if self.cut != other.cut {
            return Err(SeriesError::SignatureMismatch(format!("cutoffs {:?} and {:?}", self.cut, other.cut)));
        }
        if self.grade_den != other.grade_den {
            return Err(SeriesError::SignatureMismatch(format!(
                "grade units 1/{} and 1/{}",
                self.grade_den, other.grade_den
            )));
        }
        Ok(())
    }

    /// Keep the terms satisfying `pred`.
    pub fn filter(&self, mut pred: impl FnMut(&Key) -> bool) -> Series {
        let terms = self.terms.iter().filter(|(k, _)| pred(k)).map(|(k, &c)| (k.clone(), c)).collect();
        Series { sig: self.sig, cut: self.cut, grade_den: self.grade_den, terms }
    }

    /// The average over the fast angles: the `k = 0` slice.
    pub fn average(&self) -> Series {
        let sig = self.sig;
        self.filter(|k| k.is_x_free(&sig))
    }

    /// Everything except the `k = 0` slice.
    pub fn oscillating(&self) -> Series {
        let sig = self.sig;
        self.filter(|k| !k.is_x_free(&sig))
    }

    /// Terms with `|k|_1 <= kmax` (the resonant harmonics `l` are untouched).
    pub fn truncate_x_fourier(&self, kmax: u32) -> Series {
        let sig = self.sig;
        self.filter(|key| key.k(&sig).iter().map(|k| k.unsigned_abs()).sum::<u32>() <= kmax)
    }

    /// Terms of total polynomial degree `<= dmax`.
    pub fn truncate_degree(&self, dmax: u32) -> Series {
        self.filter(|k| k.degree() <= dmax)
    }

    /// Terms whose grade lies in `lo..=hi`.
    pub fn grade_slice(&self, lo: i32, hi: i32) -> Series {
        self.filter(|k| k.grade >= lo && k.grade <= hi)
    }

    pub fn min_grade(&self) -> Option<i32> {
        self.terms.keys().map(|k| k.grade).min()
    }

    pub fn max_grade(&self) -> Option<i32> {
        self.terms.keys().map(|k| k.grade).max()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Majorant norm `sum |c| eps^g e^{|w|_1 r} s^{|j|_1}`.
    pub fn weighted_norm(&self, r: f64, s: f64, eps: f64) -> f64 {
        self.terms
            .iter()
            .map(|(k, c)| {
                c.abs() * self.grade_factor(k.grade, eps) * (k.norm1 as f64 * r).exp() * s.powi(k.degree() as i32)
            })
            .sum()
    }

    pub(crate) fn grade_factor(&self, grade: i32, eps: f64) -> f64 {
        if grade == 0 {
            1.0
        } else if self.grade_den == 1 {
            eps.powi(grade)
        } else {
            eps.powf(grade as f64 / self.grade_den as f64)
        }
    }

    /// Substitute a numeric `eps`, collapsing every term to grade 0.
    pub fn at_eps(&self, eps: f64) -> Series {
        let mut out = Series::zero(self.sig, Cutoffs { grade_cap: None, ..self.cut });
        for (k, &c) in &self.terms {
            let key = Key { grade: 0, ..k.clone() };
            out.insert(key, c * self.grade_factor(k.grade, eps));
        }
        out.cut = self.cut;
        out.prune();
        out
    }

    /// Multiply every coefficient by `eps^shift` (a grade shift).
    pub fn shift_grade(&self, shift: i32) -> Series {
        let terms = self.terms.iter().map(|(k, &c)| (Key { grade: k.grade + shift, ..k.clone() }, c)).collect();
        Series::from_parts(self.sig, self.cut, self.grade_den, terms)
    }

    /// The largest absolute coefficient difference against `other`.
    pub fn max_abs_diff(&self, other: &Series) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &c) in &self.terms {
            worst = worst.max((c - other.coefficient(k)).abs());
        }
        for (k, &c) in &other.terms {
            if !self.terms.contains_key(k) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

/// Position of a polynomial variable inside a monomial exponent.
pub fn poly_index(sig: &Signature, var: Var) -> Option<usize> {
    match var {
        Var::X(_) => None,
        Var::Y(i) => Some(i),
        Var::U(i) => Some(sig.m + i),
        Var::V(i) => Some(sig.m + sig.m0 + i),
    }
}

/// Position of an angle inside a wavevector.
pub fn wave_index(sig: &Signature, var: Var) -> Option<usize> {
    match var {
        Var::X(i) => Some(i),
        Var::U(i) => Some(sig.m + i),
        _ => None,
    }
}

/// Position of a variable inside a state vector `(x, y, u, v)`.
pub fn state_index(sig: &Signature, var: Var) -> usize {
    match var {
        Var::X(i) => i,
        Var::Y(i) => sig.m + i,
        Var::U(i) => 2 * sig.m + i,
        Var::V(i) => 2 * sig.m + sig.m0 + i,
    }
}

/// The variable stored at a state index.
pub fn state_var(sig: &Signature, idx: usize) -> Var {
    let m = sig.m;
    let m0 = sig.m0;
    if idx < m {
        Var::X(idx)
    } else if idx < 2 * m {
        Var::Y(idx - m)
    } else if idx < 2 * m + m0 {
        Var::U(idx - 2 * m)
    } else {
        Var::V(idx - 2 * m - m0)
    }
}
