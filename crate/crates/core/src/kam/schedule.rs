use serde::{Deserialize, Serialize};

/// Which constants drive the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Constants from the proof; typically vacuous, reported for reference.
    Paper,
    /// `c0 = 1`, `b = 1`, `l0 = d`, `lambda0 = 1/2`.
    Practical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub tau: f64,
    pub sigma: f64,
    pub eta: u32,
    pub lambda0: f64,
    pub b: f64,
    pub l0: f64,
    pub c0: f64,
}

impl ScheduleConstants {
    /// `m` fast angles, `m0` resonant pairs.
    pub fn new(profile: Profile, tau: f64, m: usize, m0: usize) -> Self {
        let sigma = 1.0 / 12.0;
        let eta = smallest_eta(sigma);
        let d = (m + m0) as f64;
        let q = (m + 2 * m0) as f64;
        match profile {
            Profile::Practical => ScheduleConstants { tau, sigma, eta, lambda0: 0.5, b: 1.0, l0: d, c0: 1.0 },
            Profile::Paper => {
                let l0 = d;
                let b = (2.0 * l0 * l0 + 3.0) * q * q;
                // c_star = M_star = 1 normalisation
                let c0 = q.powi(4) * 2f64.powf(q * q);
                ScheduleConstants { tau, sigma, eta, lambda0: 0.5, b, l0, c0 }
            }
        }
    }
}

/// Smallest integer `eta` with `(1 + sigma)^eta > 2`.
pub fn smallest_eta(sigma: f64) -> u32 {
    let mut eta = 1;
    while (1.0 + sigma).powi(eta as i32) <= 2.0 {
        eta += 1;
    }
    eta
}

/// One level of the iterative scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamSchedule {
    pub nu: u32,
    pub m: usize,
    pub r0: f64,
    pub r: f64,
    pub s: f64,
    pub gamma0: f64,
    pub gamma: f64,
    pub mu: f64,
    pub alpha: f64,
    /// Fourier cutoff for this step, as a real number (it can be astronomically large).
    pub k_plus: f64,
    pub constants: ScheduleConstants,
}

/// Monitored hypotheses for one transition. `None` means not evaluable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub h1: bool,
    pub h2: bool,
    pub h3: Option<bool>,
    pub h4: bool,
    pub h5: bool,
    pub h6: bool,
    pub h7: bool,
    pub contracting: bool,
    pub log_gamma_sum: f64,
}

pub fn k_plus_of(mu: f64, eta: u32) -> f64 {
    let l = if mu < 1.0 { (1.0 / mu).ln().floor() } else { 0.0 };
    (l + 1.0).powi(3 * eta as i32)
}

impl KamSchedule {
    pub fn initial(constants: ScheduleConstants, m: usize, r0: f64, s0: f64, gamma0: f64, mu0: f64) -> Self {
        KamSchedule {
            nu: 0,
            m,
            r0,
            r: r0,
            s: s0,
            gamma0,
            gamma: gamma0,
            mu: mu0,
            alpha: mu0.cbrt(),
            k_plus: k_plus_of(mu0, constants.eta),
            constants,
        }
    }

    /// The cutoff actually usable with a series Fourier cutoff `storage`.
    /// For `mu >= 1` the cutoff formula degenerates and the whole storage
    /// range is used.
    pub fn effective_k(&self, storage: u32) -> u32 {
        if self.mu >= 1.0 || self.k_plus >= storage as f64 {
            storage
        } else {
            self.k_plus.floor().max(1.0) as u32
        }
    }

    /// Advance one level. The domain and Diophantine constants follow
    /// `r_nu = r0 (1 - sum_{i=1}^{nu} 2^{-(i+1)})`.
    pub fn next(&self) -> (KamSchedule, Hypotheses) {
        let c = self.constants;
        let shrink = 1.0 / 2f64.powi(self.nu as i32 + 2);
        let r_plus = self.r - self.r0 * shrink;
        let gamma_plus = self.gamma - self.gamma0 * shrink;
        let s_plus = self.alpha * self.s / 8.0;
        let mu_plus = (64.0 * c.c0).powf(1.0 / (1.0 - c.lambda0)) * self.mu.powf(1.0 + c.sigma);
        let next = KamSchedule {
            nu: self.nu + 1,
            m: self.m,
            r0: self.r0,
            r: r_plus,
            s: s_plus,
            gamma0: self.gamma0,
            gamma: gamma_plus,
            mu: mu_plus,
            alpha: mu_plus.cbrt(),
            k_plus: k_plus_of(mu_plus, c.eta),
            constants: c,
        };
        let hyp = self.hypotheses(&next, None);
        (next, hyp)
    }

    /// Evaluate H1-H7 for the transition `self -> next`. H3 needs the drift
    /// of the higher-order part, supplied by the caller.
    pub fn hypotheses(&self, next: &KamSchedule, h_drift: Option<f64>) -> Hypotheses {
        let c = self.constants;
        let rho = self.r - next.r;
        let n = self.m as f64 + c.l0;
        let k = self.k_plus;
        let chi = (c.b + 2.0) * c.tau + 5.0 * c.l0 + 10.0;
        let log_gamma_sum = log_lattice_sum(self.m, k, chi, rho / 8.0);
        let log_mu_sigma = c.sigma * self.mu.ln();
        let h5_lhs = c.c0.ln() + log_mu_sigma + log_gamma_sum;
        Hypotheses {
            h1: k >= 8.0 * n / rho,
            h2: log_tail_integral(n.round() as u32, k, rho / 8.0) <= self.mu.ln(),
            h3: h_drift.map(|dh| dh <= self.mu.sqrt()),
            h4: self.s * k.powf(c.tau) < self.gamma,
            h5: h5_lhs < (rho / 8.0).ln(),
            h6: h5_lhs < (self.alpha / 8.0).ln(),
            h7: log_mu_sigma + 3.0 * log_gamma_sum <= c.b * (next.gamma / self.gamma).ln(),
            contracting: next.mu < self.mu,
            log_gamma_sum,
        }
    }

    /// `c_drift delta s (gamma^b mu + s)`, the frequency drift scale.
    pub fn drift_scale(&self, delta: f64) -> f64 {
        delta * self.s * (self.gamma.powf(self.constants.b) * self.mu + self.s)
    }
}

/// `log int_K^inf x^n e^{-c x} dx`.
pub fn log_tail_integral(n: u32, k: f64, c: f64) -> f64 {
    // n! / c^{n+1} e^{-cK} sum_j (cK)^j / j!
    let ck = c * k;
    let mut log_terms = Vec::with_capacity(n as usize + 1);
    let mut log_fact = 0.0;
    for j in 0..=n {
        if j > 0 {
            log_fact += (j as f64).ln();
        }
        log_terms.push(j as f64 * ck.ln() - log_fact);
    }
    let log_nfact = log_fact;
    log_nfact - (n as f64 + 1.0) * c.ln() - ck + log_sum_exp(&log_terms)
}

/// `log sum_{0 < |k|_1 <= K} |k|^chi e^{-|k| c}` over `Z^m`.
pub fn log_lattice_sum(m: usize, kmax: f64, chi: f64, c: f64) -> f64 {
    let peak = (chi / c).max(1.0);
    let limit = kmax.min(peak * 4.0 + 200.0 / c.max(1e-12)).max(1.0);
    let mut logs = Vec::new();
    let mut n = 1.0;
    while n <= limit {
        logs.push(log_shell_count(m, n) + chi * n.ln() - c * n);
        n += 1.0;
        if logs.len() > 2_000_000 {
            break;
        }
    }
    log_sum_exp(&logs)
}

/// `log #{k in Z^m : |k|_1 = n}`.
fn log_shell_count(m: usize, n: f64) -> f64 {
    // sum_{i=1}^{m} 2^i C(m, i) C(n-1, i-1)
    let mut logs = Vec::new();
    for i in 1..=m {
        if (i as f64) > n {
            break;
        }
        logs.push(i as f64 * 2f64.ln() + log_binom(m as f64, i as f64) + log_binom(n - 1.0, i as f64 - 1.0));
    }
    log_sum_exp(&logs)
}

fn log_binom(n: f64, k: f64) -> f64 {
    let mut s = 0.0;
    let mut i = 0.0;
    while i < k {
        s += (n - i).ln() - (i + 1.0).ln();
        i += 1.0;
    }
    s
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + xs.iter().map(|&x| (x - mx).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_is_nine() {
        assert_eq!(smallest_eta(1.0 / 12.0), 9);
    }

    #[test]
    fn first_domain_is_three_quarters() {
        let c = ScheduleConstants::new(Profile::Practical, 3.0, 2, 0);
        let s = KamSchedule::initial(c, 2, 1.0, 1.0, 0.1, 1e-3);
        let (n, _) = s.next();
        assert!((n.r - 0.75).abs() < 1e-15);
        assert!((n.gamma - 0.075).abs() < 1e-15);
        let (n2, _) = n.next();
        assert!((n2.r - 0.625).abs() < 1e-15);
    }

    #[test]
    fn practical_mu_update() {
        let c = ScheduleConstants::new(Profile::Practical, 3.0, 2, 0);
        let s = KamSchedule::initial(c, 2, 1.0, 1.0, 0.1, 1e-3);
        let (n, h) = s.next();
        assert!((n.mu / (4096.0 * 1e-3f64.powf(13.0 / 12.0)) - 1.0).abs() < 1e-12);
        assert!(!h.contracting);
    }

    #[test]
    fn tail_integral_closed_form() {
        // int_1^inf x e^{-x} dx = 2/e
        assert!((log_tail_integral(1, 1.0, 1.0) - (2.0f64 / std::f64::consts::E).ln()).abs() < 1e-13);
    }

    #[test]
    fn shell_counts() {
        assert!((log_shell_count(2, 3.0).exp() - 12.0).abs() < 1e-9);
        assert!((log_shell_count(1, 5.0).exp() - 2.0).abs() < 1e-12);
    }
}
