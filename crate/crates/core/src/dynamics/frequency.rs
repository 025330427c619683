use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Trajectory;

/// Fewest samples accepted by [`frequency_analysis`].
pub const MIN_SAMPLES: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Angular frequency.
    pub frequency: f64,
    /// Modulus of the fitted complex amplitude.
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFit {
    pub peaks: Vec<Peak>,
    /// `||w r|| / ||w s||` after removing the mean and the fitted tones.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    /// Index among the angles `(x, u)`.
    pub angle: usize,
    pub frequency: f64,
    pub amplitude: f64,
    pub residual: f64,
    /// No peak above the noise floor; `frequency` and `amplitude` are 0.
    pub flagged: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrequencyError {
    #[error("{got} samples, at least {MIN_SAMPLES} needed")]
    TooFewSamples { got: usize },
    #[error("angle {angle} out of range ({count} angles)")]
    NoSuchAngle { angle: usize, count: usize },
    #[error("samples are not uniformly spaced")]
    NonUniform,
}

fn hann(n: usize) -> Vec<f64> {
    let d = (n - 1).max(1) as f64;
    (0..n).map(|j| (PI * j as f64 / d).sin().powi(2)).collect()
}

/// `sum_j w_j r_j exp(-i nu j dt)`.
fn dtft(r: &[Complex64], w: &[f64], nu: f64, dt: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, -nu * dt);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut ph = Complex64::new(1.0, 0.0);
    for (j, (x, wj)) in r.iter().zip(w).enumerate() {
        if j % 1024 == 0 {
            ph = Complex64::from_polar(1.0, -nu * dt * j as f64);
        }
        acc += x * ph * *wj;
        ph *= rot;
    }
    acc
}

fn subtract_tone(r: &mut [Complex64], a: Complex64, nu: f64, dt: f64) {
    let rot = Complex64::from_polar(1.0, nu * dt);
    let mut ph = Complex64::new(1.0, 0.0);
    for (j, x) in r.iter_mut().enumerate() {
        if j % 1024 == 0 {
            ph = Complex64::from_polar(1.0, nu * dt * j as f64);
        }
        *x -= a * ph;
        ph *= rot;
    }
}

/// Golden-section maximisation of `|D(nu)|` on `[lo, hi]`.
fn refine(r: &[Complex64], w: &[f64], dt: f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |nu: f64| dtft(r, w, nu, dt).norm();
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Up to `count` tones of a uniformly sampled complex signal. Each peak
/// is located on a Hann-windowed, zero-padded FFT, placed by quadratic
/// interpolation of the log spectrum, then polished by maximising the
/// windowed transform and subtracted.
pub fn spectral_peaks(signal: &[Complex64], dt: f64, count: usize) -> SpectralFit {
    let n = signal.len();
    let w = hann(n);
    let mean = signal.iter().sum::<Complex64>() / n as f64;
    let mut r: Vec<Complex64> = signal.iter().map(|x| x - mean).collect();
    let norm = |r: &[Complex64]| r.iter().zip(&w).map(|(x, wj)| (x * wj).norm_sqr()).sum::<f64>().sqrt();
    let base = norm(&r);
    let wsum: f64 = w.iter().sum();
    let scale = signal.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let len = (2 * n).next_power_of_two();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let bin = TAU / (len as f64 * dt);
    let mut peaks: Vec<(f64, Complex64)> = Vec::new();
    for _ in 0..count {
        let mut buf: Vec<Complex64> = r.iter().zip(&w).map(|(x, wj)| x * wj).collect();
        buf.resize(len, Complex64::new(0.0, 0.0));
        fft.process(&mut buf);
        let (k, top) =
            buf.iter()
                .enumerate()
                .map(|(k, x)| (k, x.norm()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
        if top <= 1e-10 * wsum * scale {
            break;
        }
        let at = |j: isize| buf[j.rem_euclid(len as isize) as usize].norm().max(f64::MIN_POSITIVE).ln();
        let (a, b, c) = (at(k as isize - 1), at(k as isize), at(k as isize + 1));
        let den = a - 2.0 * b + c;
        let off = if den.abs() > 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
        let kk = if k > len / 2 { k as f64 - len as f64 } else { k as f64 };
        let nu0 = (kk + off) * bin;
        let nu = refine(&r, &w, dt, nu0 - bin, nu0 + bin);
        let amp = dtft(&r, &w, nu, dt) / wsum;
        subtract_tone(&mut r, amp, nu, dt);
        peaks.push((nu, amp));
    }
    // one more pass to remove the leakage of the later tones
    if peaks.len() > 1 {
        for p in peaks.iter_mut() {
            subtract_tone(&mut r, -p.1, p.0, dt);
            let nu = refine(&r, &w, dt, p.0 - bin, p.0 + bin);
            let amp = dtft(&r, &w, nu, dt) / wsum;
            subtract_tone(&mut r, amp, nu, dt);
            *p = (nu, amp);
        }
    }
    let residual = if base > 0.0 { norm(&r) / base } else { 0.0 };
    SpectralFit { peaks: peaks.iter().map(|&(f, a)| Peak { frequency: f, amplitude: a.norm() }).collect(), residual }
}

/// Dominant frequency of `exp(i theta(t))` for one angle of an orbit.
/// `angle < m` selects `x_angle`, otherwise `u_(angle - m)`.
pub fn frequency_analysis(traj: &Trajectory, angle: usize) -> Result<FrequencyEstimate, FrequencyError> {
    let sig = traj.signature;
    let count = sig.waves();
    if angle >= count {
        return Err(FrequencyError::NoSuchAngle { angle, count });
    }
    let n = traj.len();
    if n < MIN_SAMPLES {
        return Err(FrequencyError::TooFewSamples { got: n });
    }
    let dt = traj.dt;
    let uniform = traj
        .times
        .iter()
        .enumerate()
        .all(|(j, t)| (t - traj.times[0] - j as f64 * dt).abs() <= 1e-9 * (j as f64 * dt).max(1.0));
    if !uniform {
        return Err(FrequencyError::NonUniform);
    }
    let idx = if angle < sig.m { angle } else { sig.m + angle };
    let signal: Vec<Complex64> = traj.states.iter().map(|z| Complex64::from_polar(1.0, z[idx])).collect();
    let fit = spectral_peaks(&signal, dt, 1);
    Ok(match fit.peaks.first() {
        Some(p) => FrequencyEstimate {
            angle,
            frequency: p.frequency,
            amplitude: p.amplitude,
            residual: fit.residual,
            flagged: false,
        },
        None => FrequencyEstimate { angle, frequency: 0.0, amplitude: 0.0, residual: fit.residual, flagged: true },
    })
}
