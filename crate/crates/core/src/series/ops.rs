use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use super::{
    canonicalize, poly_index, wave_index, Cutoffs, Key, Mono, Series, SeriesError, Signature, Trig, Var, Wave,
};

struct Acc {
    sig: Signature,
    cut: Cutoffs,
    map: HashMap<Key, f64>,
}

impl Acc {
    fn new(sig: Signature, cut: Cutoffs) -> Self {
        Acc { sig, cut, map: HashMap::new() }
    }

    fn push(&mut self, grade: i32, mut wave: Wave, trig: Trig, mono: &Mono, c: f64) {
        let sign = match canonicalize(&mut wave) {
            None if trig == Trig::Sin => return,
            None => 1.0,
            Some(s) if trig == Trig::Sin => s,
            Some(_) => 1.0,
        };
        let key = Key::new(grade, wave, trig, mono.clone());
        if key.norm1 > self.cut.fourier {
            return;
        }
        *self.map.entry(key).or_insert(0.0) += sign * c;
    }

    fn finish(self, grade_den: u32) -> Series {
        Series::from_parts(self.sig, self.cut, grade_den, self.map.into_iter().collect())
    }
}

impl Series {
    fn assert_compatible(&self, other: &Series) {
        if let Err(e) = self.check_compatible(other) {
            panic!("{e}");
        }
    }

    pub fn checked_add(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            out.insert(k.clone(), c);
        }
        out.prune();
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check_compatible(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub fn scale(&self, c: f64) -> Series {
        let terms = self.terms.iter().map(|(k, &v)| (k.clone(), v * c)).collect();
        Series::from_parts(self.sig, self.cut, self.grade_den, terms)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Series) {
        self.assert_compatible(other);
        for (k, &v) in &other.terms {
            self.insert(k.clone(), c * v);
        }
        self.prune();
    }

    fn mul_unchecked(&self, other: &Series) -> Series {
        let mut acc = Acc::new(self.sig, self.cut);
        let dmax = self.cut.degree;
        let cap = self.cut.grade_cap;
        for (ka, &ca) in &self.terms {
            let da = ka.degree();
            for (kb, &cb) in &other.terms {
                let grade = ka.grade + kb.grade;
                if cap.is_some_and(|g| grade > g) || da + kb.degree() > dmax {
                    continue;
                }
                if ka.norm1 + kb.norm1 > self.cut.fourier && ka.norm1.abs_diff(kb.norm1) > self.cut.fourier {
                    continue;
                }
                let mono: Mono = ka.mono.iter().zip(&kb.mono).map(|(a, b)| a + b).collect();
                let c = ca * cb;
                if ka.norm1 == 0 {
                    acc.push(grade, kb.wave.clone(), kb.trig, &mono, c);
                    continue;
                }
                if kb.norm1 == 0 {
                    acc.push(grade, ka.wave.clone(), ka.trig, &mono, c);
                    continue;
                }
                let sum: Wave = ka.wave.iter().zip(&kb.wave).map(|(a, b)| a + b).collect();
                let diff: Wave = ka.wave.iter().zip(&kb.wave).map(|(a, b)| a - b).collect();
                let h = 0.5 * c;
                match (ka.trig, kb.trig) {
                    (Trig::Cos, Trig::Cos) => {
                        acc.push(grade, diff, Trig::Cos, &mono, h);
                        acc.push(grade, sum, Trig::Cos, &mono, h);
                    }
                    (Trig::Sin, Trig::Sin) => {
                        acc.push(grade, diff, Trig::Cos, &mono, h);
                        acc.push(grade, sum, Trig::Cos, &mono, -h);
                    }
                    (Trig::Sin, Trig::Cos) => {
                        acc.push(grade, sum, Trig::Sin, &mono, h);
                        acc.push(grade, diff, Trig::Sin, &mono, h);
                    }
                    (Trig::Cos, Trig::Sin) => {
                        acc.push(grade, sum, Trig::Sin, &mono, h);
                        acc.push(grade, diff, Trig::Sin, &mono, -h);
                    }
                }
            }
        }
        acc.finish(self.grade_den)
    }

    /// Partial derivative with respect to one phase-space variable.
    pub fn partial(&self, var: Var) -> Series {
        let mut acc = Acc::new(self.sig, self.cut);
        let widx = wave_index(&self.sig, var);
        let pidx = poly_index(&self.sig, var);
        for (k, &c) in &self.terms {
            if let Some(w) = widx {
                let kw = k.wave[w];
                if kw != 0 {
                    match k.trig {
                        Trig::Cos => acc.push(k.grade, k.wave.clone(), Trig::Sin, &k.mono, -(kw as f64) * c),
                        Trig::Sin => acc.push(k.grade, k.wave.clone(), Trig::Cos, &k.mono, kw as f64 * c),
                    }
                }
            }
            if let Some(p) = pidx {
                let a = k.mono[p];
                if a > 0 {
                    let mut mono = k.mono.clone();
                    mono[p] -= 1;
                    acc.push(k.grade, k.wave.clone(), k.trig, &mono, a as f64 * c);
                }
            }
        }
        acc.finish(self.grade_den)
    }

    /// Gradient along every polynomial direction `(y, u, v)`.
    pub fn poly_gradient(&self) -> Vec<Series> {
        let sig = self.sig;
        poly_vars(&sig).into_iter().map(|v| self.partial(v)).collect()
    }

    /// `{F, G} = F_x G_y - F_y G_x + F_u G_v - F_v G_u`.
    pub fn poisson_bracket(&self, other: &Series) -> Series {
        self.assert_compatible(other);
        let mut out = Series::zero(self.sig, self.cut);
        out.grade_den = self.grade_den;
        for i in 0..self.sig.m {
            out.axpy(1.0, &(&self.partial(Var::X(i)) * &other.partial(Var::Y(i))));
            out.axpy(-1.0, &(&self.partial(Var::Y(i)) * &other.partial(Var::X(i))));
        }
        out.axpy(1.0, &self.bracket_z(other));
        out
    }

    /// The resonant-pair part `F_u G_v - F_v G_u` of the bracket.
    pub fn bracket_z(&self, other: &Series) -> Series {
        self.assert_compatible(other);
        let mut out = Series::zero(self.sig, self.cut);
        out.grade_den = self.grade_den;
        for j in 0..self.sig.m0 {
            out.axpy(1.0, &(&self.partial(Var::U(j)) * &other.partial(Var::V(j))));
            out.axpy(-1.0, &(&self.partial(Var::V(j)) * &other.partial(Var::U(j))));
        }
        out
    }

    /// Substitute `w -> w + c` in the polynomial variables `(y, u, v)`.
    pub fn translate(&self, c: &[f64]) -> Series {
        assert_eq!(c.len(), self.sig.polys(), "translation length");
        let mut acc = Acc::new(self.sig, self.cut);
        let active: Vec<usize> = (0..c.len()).filter(|&i| c[i] != 0.0).collect();
        for (k, &coef) in &self.terms {
            let mut stack: Vec<(usize, Mono, f64)> = vec![(0, k.mono.clone(), coef)];
            while let Some((pos, mono, val)) = stack.pop() {
                if pos == active.len() {
                    acc.push(k.grade, k.wave.clone(), k.trig, &mono, val);
                    continue;
                }
                let i = active[pos];
                let a = k.mono[i] as i32;
                let mut binom = 1.0;
                for b in 0..=a {
                    // keep w_i^(a-b), factor binom(a, b) c^b
                    let mut m2 = mono.clone();
                    m2[i] = (a - b) as u8;
                    stack.push((pos + 1, m2, val * binom * c[i].powi(b)));
                    binom = binom * (a - b) as f64 / (b + 1) as f64;
                }
            }
        }
        acc.finish(self.grade_den)
    }

    /// Substitute `theta -> theta + phi` in the angles `(x, u)`.
    pub fn rotate(&self, phi: &[f64]) -> Series {
        assert_eq!(phi.len(), self.sig.waves(), "rotation length");
        let mut acc = Acc::new(self.sig, self.cut);
        for (k, &c) in &self.terms {
            let a: f64 = k.wave.iter().zip(phi).map(|(&w, &p)| w as f64 * p).sum();
            let (s, co) = a.sin_cos();
            match k.trig {
                Trig::Cos => {
                    acc.push(k.grade, k.wave.clone(), Trig::Cos, &k.mono, c * co);
                    acc.push(k.grade, k.wave.clone(), Trig::Sin, &k.mono, -c * s);
                }
                Trig::Sin => {
                    acc.push(k.grade, k.wave.clone(), Trig::Sin, &k.mono, c * co);
                    acc.push(k.grade, k.wave.clone(), Trig::Cos, &k.mono, c * s);
                }
            }
        }
        acc.finish(self.grade_den)
    }

    /// Replace the periodic dependence on `u` by its Taylor expansion at
    /// `u = 0`, up to the degree cutoff.
    pub fn expand_resonant_harmonics(&self) -> Series {
        let sig = self.sig;
        let mut out = Series::zero(sig, self.cut);
        out.grade_den = self.grade_den;
        let dmax = self.cut.degree;
        let mut cache: HashMap<Vec<i32>, (Series, Series)> = HashMap::new();
        for (k, &c) in &self.terms {
            let l: Vec<i32> = k.l(&sig).to_vec();
            if l.iter().all(|&x| x == 0) {
                out.insert(k.clone(), c);
                continue;
            }
            let (cos_l, sin_l) = cache
                .entry(l.clone())
                .or_insert_with(|| {
                    let mut lin = Series::zero(sig, Cutoffs { grade_cap: None, ..self.cut });
                    lin.grade_den = self.grade_den;
                    for (i, &li) in l.iter().enumerate() {
                        if li != 0 {
                            lin.axpy(li as f64, &Series::var(sig, lin.cut, Var::U(i)).with_den(self.grade_den));
                        }
                    }
                    let mut cs = Series::constant(sig, lin.cut, 1.0).with_den(self.grade_den);
                    let mut sn = Series::zero(sig, lin.cut).with_den(self.grade_den);
                    let mut pw = Series::constant(sig, lin.cut, 1.0).with_den(self.grade_den);
                    let mut fact = 1.0;
                    for p in 1..=dmax {
                        pw = &pw * &lin;
                        fact *= p as f64;
                        let sign = if (p / 2) % 2 == 0 { 1.0 } else { -1.0 };
                        if p % 2 == 0 {
                            cs.axpy(sign / fact, &pw);
                        } else {
                            sn.axpy(sign / fact, &pw);
                        }
                    }
                    (cs.with_cutoffs(self.cut), sn.with_cutoffs(self.cut))
                })
                .clone();
            let mut kw: Vec<i32> = k.k(&sig).to_vec();
            kw.extend(std::iter::repeat_n(0, sig.m0));
            let mut base = Series::zero(sig, self.cut);
            base.grade_den = self.grade_den;
            base.add_term(k.grade, &kw, Trig::Cos, &k.mono, c);
            let mut base_s = Series::zero(sig, self.cut);
            base_s.grade_den = self.grade_den;
            base_s.add_term(k.grade, &kw, Trig::Sin, &k.mono, c);
            // cos(a + b) = cos a cos b - sin a sin b ; sin(a + b) = sin a cos b + cos a sin b
            match k.trig {
                Trig::Cos => {
                    out.axpy(1.0, &(&base * &cos_l));
                    out.axpy(-1.0, &(&base_s * &sin_l));
                }
                Trig::Sin => {
                    out.axpy(1.0, &(&base_s * &cos_l));
                    out.axpy(1.0, &(&base * &sin_l));
                }
            }
        }
        out.prune();
        out
    }

    pub(crate) fn with_den(mut self, den: u32) -> Series {
        self.grade_den = den;
        self
    }

    /// Multiply each term by a factor depending on its key and move it to a
    /// new grade. Used for rescalings.
    pub fn map_grades(&self, new_den: u32, mut f: impl FnMut(&Key) -> (i32, f64)) -> Series {
        let mut acc = Acc::new(self.sig, self.cut);
        for (k, &c) in &self.terms {
            let (g, factor) = f(k);
            acc.push(g, k.wave.clone(), k.trig, &k.mono, c * factor);
        }
        acc.finish(new_den)
    }

    /// Reduce `grade / grade_den` to lowest terms across all terms.
    pub fn normalize_grades(&self) -> Series {
        fn gcd(a: u32, b: u32) -> u32 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let mut g = self.grade_den;
        for k in self.terms.keys() {
            g = gcd(g, k.grade.unsigned_abs());
        }
        if g <= 1 {
            return self.clone();
        }
        let gi = g as i32;
        self.map_grades(self.grade_den / g, |k| (k.grade / gi, 1.0))
    }
}

pub(crate) fn poly_vars(sig: &Signature) -> Vec<Var> {
    let mut v: Vec<Var> = (0..sig.m).map(Var::Y).collect();
    v.extend((0..sig.m0).map(Var::U));
    v.extend((0..sig.m0).map(Var::V));
    v
}

impl Add for &Series {
    type Output = Series;
    fn add(self, rhs: &Series) -> Series {
        self.checked_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, rhs: &Series) -> Series {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(-1.0)
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, rhs: &Series) -> Series {
        self.checked_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}
