use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::decimal;
use crate::series::{Series, Signature, Trig};

type Buf = SmallVec<[f64; 32]>;

/// A Hamiltonian flattened for simultaneous evaluation of its value and
/// gradient in the state layout `(x, y, u, v)`.
#[derive(Clone, Debug)]
pub struct HamiltonianField {
    sig: Signature,
    degree: usize,
    coef: Vec<f64>,
    wave: Vec<i32>,
    mono: Vec<u8>,
    trig: Vec<Trig>,
}

impl HamiltonianField {
    pub fn new(h: &Series, eps: f64) -> Self {
        let sig = h.signature();
        let mut f = HamiltonianField {
            sig,
            degree: h.cutoffs().degree as usize,
            coef: Vec::with_capacity(h.len()),
            wave: Vec::with_capacity(h.len() * sig.waves()),
            mono: Vec::with_capacity(h.len() * sig.polys()),
            trig: Vec::with_capacity(h.len()),
        };
        for (k, c) in h.terms() {
            f.coef.push(c * h.grade_factor(k.grade, eps));
            f.wave.extend_from_slice(&k.wave);
            f.mono.extend_from_slice(&k.mono);
            f.trig.push(k.trig);
        }
        f
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    /// `H(z)` and `grad H(z)`.
    pub fn value_gradient(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let sig = self.sig;
        let m = sig.m;
        let nw = sig.waves();
        let np = sig.polys();
        debug_assert_eq!(z.len(), sig.state_len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let stride = self.degree + 1;
        let polys = &z[m..];
        let mut powers: Buf = SmallVec::from_elem(1.0, np * stride);
        for i in 0..np {
            for p in 1..stride {
                powers[i * stride + p] = powers[i * stride + p - 1] * polys[i];
            }
        }
        let mut total = 0.0;
        for t in 0..self.coef.len() {
            let w = &self.wave[t * nw..(t + 1) * nw];
            let mut phase = 0.0;
            for (a, &k) in w.iter().enumerate() {
                if k != 0 {
                    let s = if a < m { a } else { m + a };
                    phase += k as f64 * z[s];
                }
            }
            let (sn, cs) = phase.sin_cos();
            let (tv, dv) = match self.trig[t] {
                Trig::Cos => (cs, -sn),
                Trig::Sin => (sn, cs),
            };
            let e = &self.mono[t * np..(t + 1) * np];
            let mut mv = 1.0;
            for (i, &a) in e.iter().enumerate() {
                if a > 0 {
                    mv *= powers[i * stride + a as usize];
                }
            }
            let c = self.coef[t];
            total += c * tv * mv;
            if dv != 0.0 && mv != 0.0 {
                for (a, &k) in w.iter().enumerate() {
                    if k != 0 {
                        let s = if a < m { a } else { m + a };
                        grad[s] += c * dv * mv * k as f64;
                    }
                }
            }
            for (i, &a) in e.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let mut d = a as f64 * powers[i * stride + a as usize - 1];
                for (j, &b) in e.iter().enumerate() {
                    if j != i && b > 0 {
                        d *= powers[j * stride + b as usize];
                    }
                }
                grad[m + i] += c * tv * d;
            }
        }
        total
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let mut g: Buf = SmallVec::from_elem(0.0, z.len());
        self.value_gradient(z, &mut g)
    }

    /// `J grad H`: `(H_y, -H_x, H_v, -H_u)`.
    pub fn field(&self, z: &[f64], out: &mut [f64]) {
        let (m, m0) = (self.sig.m, self.sig.m0);
        let mut g: Buf = SmallVec::from_elem(0.0, z.len());
        self.value_gradient(z, &mut g);
        for i in 0..m {
            out[i] = g[m + i];
            out[m + i] = -g[i];
        }
        for j in 0..m0 {
            out[2 * m + j] = g[2 * m + m0 + j];
            out[2 * m + m0 + j] = -g[2 * m + j];
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size must be positive and not exceed the horizon (dt = {dt}, T = {t})")]
    BadStep { dt: f64, t: f64 },
    #[error("state has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("implicit midpoint iteration failed at t = {t} even after halving the step")]
    NoConvergence { t: f64 },
}

/// Inner fixed-point tolerance, relative to `max(1, |z_i|)`.
pub const MIDPOINT_TOL: f64 = 1e-14;
const MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One implicit midpoint step per step: second order.
    #[default]
    Midpoint,
    /// Triple-jump composition of three midpoint steps: fourth order.
    Composed4,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Midpoint => "implicit-midpoint",
            Method::Composed4 => "implicit-midpoint-composed4",
        }
    }
}

/// Implicit midpoint rule `z1 = z0 + dt J grad H((z0 + z1) / 2)`.
#[derive(Clone, Debug)]
pub struct Midpoint {
    pub field: HamiltonianField,
    pub method: Method,
}

impl Midpoint {
    pub fn new(h: &Series, eps: f64) -> Self {
        Midpoint { field: HamiltonianField::new(h, eps), method: Method::Midpoint }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    fn try_step(&self, z: &[f64], dt: f64) -> Option<Vec<f64>> {
        let n = z.len();
        let mut f = vec![0.0; n];
        self.field.field(z, &mut f);
        let mut z1: Vec<f64> = (0..n).map(|i| z[i] + dt * f[i]).collect();
        let mut mid = vec![0.0; n];
        for _ in 0..MAX_ITER {
            for i in 0..n {
                mid[i] = 0.5 * (z[i] + z1[i]);
            }
            self.field.field(&mid, &mut f);
            let mut diff: f64 = 0.0;
            for i in 0..n {
                let next = z[i] + dt * f[i];
                diff = diff.max((next - z1[i]).abs() / next.abs().max(1.0));
                z1[i] = next;
            }
            if !diff.is_finite() {
                return None;
            }
            if diff <= MIDPOINT_TOL {
                for i in 0..n {
                    mid[i] = 0.5 * (z[i] + z1[i]);
                }
                self.field.field(&mid, &mut f);
                for i in 0..n {
                    z1[i] = z[i] + dt * f[i];
                }
                return Some(z1);
            }
        }
        None
    }

    fn midpoint_step(&self, z: &[f64], dt: f64) -> Option<(Vec<f64>, bool)> {
        if let Some(z1) = self.try_step(z, dt) {
            return Some((z1, false));
        }
        let half = self.try_step(z, 0.5 * dt)?;
        self.try_step(&half, 0.5 * dt).map(|z1| (z1, true))
    }

    /// One step of size `dt` (either sign). A midpoint stage that does not
    /// converge is retried as two half steps; the flag reports that.
    pub fn step(&self, z: &[f64], dt: f64) -> Option<(Vec<f64>, bool)> {
        match self.method {
            Method::Midpoint => self.midpoint_step(z, dt),
            Method::Composed4 => {
                let c = 2f64.cbrt();
                let w1 = 1.0 / (2.0 - c);
                let w0 = -c / (2.0 - c);
                let (a, ha) = self.midpoint_step(z, w1 * dt)?;
                let (b, hb) = self.midpoint_step(&a, w0 * dt)?;
                let (d, hd) = self.midpoint_step(&b, w1 * dt)?;
                Some((d, ha || hb || hd))
            }
        }
    }

    /// Final state after `ceil(|t| / dt)` equal steps.
    pub fn advance(&self, z0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, IntegrateError> {
        if !(dt > 0.0) || !t.is_finite() {
            return Err(IntegrateError::BadStep { dt, t });
        }
        let steps = (t.abs() / dt - 1e-9).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut z = z0.to_vec();
        for i in 0..steps {
            z = self.step(&z, h).ok_or(IntegrateError::NoConvergence { t: i as f64 * h })?.0;
        }
        Ok(z)
    }

    /// Integrate over `[0, t]` with `ceil(t / dt)` equal steps, keeping
    /// every `stride`-th state. A negative `t` runs backwards.
    pub fn run(&self, z0: &[f64], t: f64, dt: f64, stride: usize) -> Result<Trajectory, IntegrateError> {
        let sig = self.field.signature();
        if z0.len() != sig.state_len() {
            return Err(IntegrateError::Dimension { expected: sig.state_len(), got: z0.len() });
        }
        if !(dt > 0.0) || !(t.abs() >= dt * (1.0 - 1e-12)) || !t.is_finite() {
            return Err(IntegrateError::BadStep { dt, t });
        }
        let steps = (t.abs() / dt - 1e-9).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let stride = stride.max(1);
        let cap = steps / stride + 2;
        let mut traj = Trajectory {
            signature: sig,
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            energy: Vec::with_capacity(cap),
            dt: h * stride as f64,
            step: h,
            method: self.method.name().into(),
            halved_steps: 0,
        };
        let mut z = z0.to_vec();
        traj.push(0.0, &z, self.field.value(&z));
        for i in 1..=steps {
            let (z1, halved) = self.step(&z, h).ok_or(IntegrateError::NoConvergence { t: (i - 1) as f64 * h })?;
            traj.halved_steps += halved as usize;
            z = z1;
            if i % stride == 0 {
                traj.push(i as f64 * h, &z, self.field.value(&z));
            }
        }
        Ok(traj)
    }
}

/// Integrate `H` from `z0` over `[0, t]` with implicit midpoint steps of
/// size at most `dt`, keeping every state.
pub fn integrate(h: &Series, eps: f64, z0: &[f64], t: f64, dt: f64) -> Result<Trajectory, IntegrateError> {
    integrate_with(h, eps, z0, t, dt, Method::Midpoint)
}

pub fn integrate_with(
    h: &Series,
    eps: f64,
    z0: &[f64],
    t: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory, IntegrateError> {
    if !(dt > 0.0) || t < dt {
        return Err(IntegrateError::BadStep { dt, t });
    }
    Midpoint::new(h, eps).with_method(method).run(z0, t, dt, 1)
}

/// Sampled orbit of an integrator run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub signature: Signature,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    /// Spacing of the stored samples.
    pub dt: f64,
    /// Integrator step.
    pub step: f64,
    pub method: String,
    /// Steps that needed the half-step retry.
    pub halved_steps: usize,
}

impl Trajectory {
    fn push(&mut self, t: f64, z: &[f64], e: f64) {
        self.times.push(t);
        self.states.push(z.to_vec());
        self.energy.push(e);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has the initial state")
    }

    /// `max_t |H(z(t)) - H(z(0))|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// Slope of a least-squares line through the energy error, times the
    /// time span: the secular part of the drift.
    pub fn secular_energy_drift(&self) -> f64 {
        let n = self.len() as f64;
        if self.len() < 2 {
            return 0.0;
        }
        let mt = self.times.iter().sum::<f64>() / n;
        let me = self.energy.iter().sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (t, e) in self.times.iter().zip(&self.energy) {
            sxx += (t - mt) * (t - mt);
            sxy += (t - mt) * (e - me);
        }
        let span = self.times[self.len() - 1] - self.times[0];
        (sxy / sxx * span).abs()
    }

    /// Column names in state order.
    pub fn columns(&self) -> Vec<String> {
        let (m, m0) = (self.signature.m, self.signature.m0);
        let mut c = vec!["t".to_string()];
        c.extend((1..=m).map(|i| format!("x{i}")));
        c.extend((1..=m).map(|i| format!("y{i}")));
        c.extend((1..=m0).map(|i| format!("u{i}")));
        c.extend((1..=m0).map(|i| format!("v{i}")));
        c.push("energy".into());
        c
    }

    /// `t, state..., energy` rows.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns().join(",");
        s.push('\n');
        for i in 0..self.len() {
            s.push_str(&decimal::format(self.times[i]));
            for x in &self.states[i] {
                s.push(',');
                s.push_str(&decimal::format(*x));
            }
            s.push(',');
            s.push_str(&decimal::format(self.energy[i]));
            s.push('\n');
        }
        s
    }
}
