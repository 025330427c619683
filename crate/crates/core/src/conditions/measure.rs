use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScanSet;
use crate::decimal;

/// Excluded-fraction estimates for a list of `gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub gammas: Vec<f64>,
    pub fractions: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: u64,
    /// Least-squares slope of `log fraction` against `log gamma`.
    pub slope: Option<f64>,
    /// 95% half-width of the slope.
    pub slope_halfwidth: Option<f64>,
    /// Some `gamma` had no failing sample and was left out of the fit.
    pub censored: bool,
}

const CHUNK: u64 = 4096;

/// Draw `samples` frequencies uniformly from the box `[lo, hi]` and count
/// those failing the `(gamma, tau)` condition up to `kmax`. Sample `i`
/// always uses the same stream position, so the result does not depend on
/// the thread count.
pub fn excluded_measure(
    lo: &[f64],
    hi: &[f64],
    gammas: &[f64],
    tau: f64,
    kmax: u32,
    samples: u64,
    seed: u64,
) -> MeasureEstimate {
    assert_eq!(lo.len(), hi.len());
    let m = lo.len();
    let set = ScanSet::new(m, tau, kmax);
    let chunks = samples.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = c * CHUNK;
            // two 32-bit words per f64
            rng.set_word_pos((start * 2 * m as u64) as u128);
            let end = (start + CHUNK).min(samples);
            let mut cnt = vec![0u64; gammas.len()];
            let mut w = vec![0.0; m];
            for _ in start..end {
                for i in 0..m {
                    let t: f64 = rng.random();
                    w[i] = lo[i] + (hi[i] - lo[i]) * t;
                }
                let (q, _, _) = set.quality(&w);
                for (g, n) in gammas.iter().zip(cnt.iter_mut()) {
                    if q <= *g {
                        *n += 1;
                    }
                }
            }
            cnt
        })
        .collect();
    let mut total = vec![0u64; gammas.len()];
    for c in &counts {
        for (t, n) in total.iter_mut().zip(c) {
            *t += n;
        }
    }
    let nf = samples as f64;
    let fractions: Vec<f64> = total.iter().map(|&n| n as f64 / nf).collect();
    let stderr = fractions.iter().map(|&p| (p * (1.0 - p) / nf).sqrt()).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (g, &p) in gammas.iter().zip(&fractions) {
        if p > 0.0 {
            xs.push(g.ln());
            ys.push(p.ln());
        }
    }
    let censored = xs.len() < gammas.len();
    let (slope, slope_halfwidth) = fit(&xs, &ys).map_or((None, None), |(a, h)| (Some(a), h));
    MeasureEstimate { gammas: gammas.to_vec(), fractions, stderr, samples, slope, slope_halfwidth, censored }
}

fn fit(xs: &[f64], ys: &[f64]) -> Option<(f64, Option<f64>)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    if n < 3 {
        return Some((a, None));
    }
    let b = my - a * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    Some((a, Some(1.96 * se)))
}

impl MeasureEstimate {
    /// `gamma,fraction,stderr` rows with decimal formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,fraction,stderr\n");
        for i in 0..self.gammas.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                decimal::format(self.gammas[i]),
                decimal::format(self.fractions[i]),
                decimal::format(self.stderr[i])
            ));
        }
        s
    }

    /// Whitespace-separated plot data: `log10 gamma`, `log10 fraction`, stderr.
    pub fn to_plot_data(&self) -> String {
        let mut s = String::from("# log10_gamma log10_fraction stderr\n");
        for i in 0..self.gammas.len() {
            let lf = if self.fractions[i] > 0.0 { self.fractions[i].log10() } else { f64::NEG_INFINITY };
            s.push_str(&format!("{} {} {}\n", self.gammas[i].log10(), lf, self.stderr[i]));
        }
        s
    }

    /// The fraction does not grow as `gamma` shrinks, up to `nsigma`
    /// standard errors.
    pub fn is_monotone(&self, nsigma: f64) -> bool {
        let mut idx: Vec<usize> = (0..self.gammas.len()).collect();
        idx.sort_by(|&a, &b| self.gammas[a].total_cmp(&self.gammas[b]));
        idx.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let tol = nsigma * (self.stderr[a].powi(2) + self.stderr[b].powi(2)).sqrt();
            self.fractions[b] + tol >= self.fractions[a]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturates_for_huge_gamma() {
        let e = excluded_measure(&[1.0, 1.0], &[2.0, 2.0], &[1e6], 2.0, 5, 2000, 7);
        assert_eq!(e.fractions, vec![1.0]);
    }

    #[test]
    fn same_seed_same_csv() {
        let g = [1e-1, 1e-2];
        let a = excluded_measure(&[1.0, 1.0], &[2.0, 2.0], &g, 3.0, 10, 10_000, 42);
        let b = excluded_measure(&[1.0, 1.0], &[2.0, 2.0], &g, 3.0, 10, 10_000, 42);
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
