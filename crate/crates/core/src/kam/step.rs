use serde::{Deserialize, Serialize};

use super::{
    divisor_data, frequency_shift_full, frequency_shift_isoenergetic, frequency_shift_partial, lie_transform,
    remainder_prime, solve_homological, split_normal_form, Hypotheses, KamError, KamSchedule,
};
use crate::conditions::check_diophantine;
use crate::series::{Series, Signature, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    /// Averaging only: the frequency is allowed to drift.
    None,
    /// Full shift, preserving every frequency component.
    Plain,
    /// Shift preserving the components with independent rows of `M`.
    Partial,
    /// Shift preserving the energy and the frequency ratios.
    Isoenergetic,
}

/// Which part of the perturbation a step removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RShape {
    /// Degree at most 2 in `(y, z)`.
    Quadratic,
    /// Every stored degree.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub mode: ShiftMode,
    pub shape: RShape,
    pub lie_order: usize,
    /// Numeric value of the grading parameter.
    pub eps: f64,
    /// The factor in front of the quadratic part of `N`.
    pub delta: f64,
    /// Reference domain for reported norms.
    pub norm_r: f64,
    pub norm_s: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            mode: ShiftMode::Plain,
            shape: RShape::Quadratic,
            lie_order: 6,
            eps: 1.0,
            delta: 1.0,
            norm_r: 0.5,
            norm_s: 0.5,
        }
    }
}

/// `H = N + P` with `N` independent of the fast angles.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitHamiltonian {
    pub normal: Series,
    pub pert: Series,
}

impl SplitHamiltonian {
    /// Put every angle-free term in `N` and the rest in `P`.
    pub fn from_series(h: &Series) -> Self {
        SplitHamiltonian { normal: h.filter(|k| k.is_trig_free()), pert: h.filter(|k| !k.is_trig_free()) }
    }

    pub fn total(&self) -> Series {
        &self.normal + &self.pert
    }
}

pub fn origin_state(sig: &Signature) -> Vec<f64> {
    vec![0.0; sig.state_len()]
}

fn frequency(n: &Series, eps: f64) -> Vec<f64> {
    let sig = n.signature();
    let z = origin_state(&sig);
    (0..sig.m).map(|i| n.partial(Var::Y(i)).value(&z, eps)).collect()
}

/// What a step did to the coordinates.
#[derive(Clone, Debug)]
pub struct TransformRecord {
    pub generator: Series,
    pub w0: Vec<f64>,
    pub t: Option<f64>,
    pub preserved: Vec<usize>,
    pub d1: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub nu: u32,
    pub k_eff: u32,
    pub pert_norm_before: f64,
    pub pert_norm_after: f64,
    pub truncation_norm: f64,
    pub generator_norm: f64,
    pub min_divisor: f64,
    /// `||{N,F} + R - [R] - R'|| / ||R||`.
    pub homological_residual: f64,
    pub lie_order: usize,
    pub lie_remainder: f64,
    pub shift_residual: f64,
    pub omega_before: Vec<f64>,
    pub omega_after: Vec<f64>,
    pub drift_norm: f64,
    /// `delta s (gamma^b mu + s)` for this level.
    pub drift_scale: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// Number of angle-averaged terms left in the new perturbation.
    pub averaged_terms_left: usize,
    pub hypotheses: Hypotheses,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub next: SplitHamiltonian,
    pub record: TransformRecord,
    pub report: StepReport,
    /// `N_plus - N` before the shift: the averaged terms absorbed by this step.
    pub absorbed: Series,
    pub schedule: KamSchedule,
}

/// The truncation `R` removed by a step: `|k|_1 <= kmax` and, for the
/// quadratic shape, degree at most 2.
pub fn build_truncation(p: &Series, kmax: u32, shape: RShape) -> Series {
    let r = p.truncate_x_fourier(kmax);
    match shape {
        RShape::Quadratic => r.truncate_degree(2),
        RShape::Full => r,
    }
}

pub fn kam_step(h: &SplitHamiltonian, sched: &KamSchedule, cfg: &StepConfig) -> Result<StepOutcome, KamError> {
    h.normal.check_compatible(&h.pert)?;
    let sig = h.normal.signature();
    let cut = h.pert.cutoffs();
    let (nr, ns, eps) = (cfg.norm_r, cfg.norm_s, cfg.eps);
    let k_eff = sched.effective_k(cut.fourier);
    let r = build_truncation(&h.pert, k_eff, cfg.shape);
    let r_avg = r.average();
    let r_osc = r.oscillating();
    let div = divisor_data(&h.normal);
    let tau = sched.constants.tau;
    let scan = check_diophantine(&div.omega, sched.gamma, tau, k_eff);
    let f = solve_homological(&div, &r_osc, sched.gamma, tau, k_eff)?;
    let rp = remainder_prime(&h.normal, &f, &div);
    let mut resid = h.normal.poisson_bracket(&f);
    resid.axpy(1.0, &r);
    resid.axpy(-1.0, &r_avg);
    resid.axpy(-1.0, &rp);
    let r_norm = r.weighted_norm(nr, ns, eps);
    let homological_residual = if r_norm > 0.0 { resid.weighted_norm(nr, ns, eps) / r_norm } else { 0.0 };

    let lie = lie_transform(&h.total(), &f, cfg.lie_order, nr, ns, eps);
    let nbar = lie.series.average();
    let pbar = lie.series.oscillating();
    let absorbed = &nbar - &h.normal;

    let z0 = origin_state(&sig);
    let omega_before = frequency(&h.normal, eps);
    let energy_before = h.normal.value(&z0, eps);
    let q = sig.polys();
    let (w0, t, preserved, d1, shift_residual) = match cfg.mode {
        ShiftMode::None => (vec![0.0; q], None, vec![], vec![], 0.0),
        mode => {
            let (nf, lin) = split_normal_form(&nbar, cfg.delta, eps, &omega_before, energy_before);
            match mode {
                ShiftMode::Plain => {
                    let s = frequency_shift_full(&nf, &lin)?;
                    (s.w0, None, (0..sig.m).collect(), vec![], s.residual)
                }
                ShiftMode::Partial => {
                    let s = frequency_shift_partial(&nf, &lin)?;
                    (s.shift.w0, None, s.preserved, s.d1, s.shift.residual)
                }
                _ => {
                    let s = frequency_shift_isoenergetic(&nf, &lin)?;
                    (s.shift.w0, Some(s.t), s.preserved, vec![], s.shift.residual)
                }
            }
        }
    };
    let (normal, pert) = if w0.iter().any(|&w| w != 0.0) {
        let mut phi = vec![0.0; sig.waves()];
        phi[sig.m..].copy_from_slice(&w0[sig.m..sig.m + sig.m0]);
        let apply = |s: &Series| s.translate(&w0).rotate(&phi);
        (apply(&nbar), apply(&pbar))
    } else {
        (nbar, pbar)
    };
    let next = SplitHamiltonian { normal, pert };
    let omega_after = frequency(&next.normal, eps);
    let drift_norm = omega_after.iter().zip(&omega_before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (next_sched, hypotheses) = sched.next();
    let report = StepReport {
        nu: sched.nu,
        k_eff,
        pert_norm_before: h.pert.weighted_norm(nr, ns, eps),
        pert_norm_after: next.pert.weighted_norm(nr, ns, eps),
        truncation_norm: r_norm,
        generator_norm: f.weighted_norm(nr, ns, eps),
        min_divisor: scan.min_divisor,
        homological_residual,
        lie_order: lie.order,
        lie_remainder: lie.remainder,
        shift_residual,
        omega_before,
        omega_after,
        drift_norm,
        drift_scale: sched.drift_scale(cfg.delta),
        energy_before,
        energy_after: next.normal.value(&z0, eps),
        averaged_terms_left: next.pert.average().len(),
        hypotheses,
    };
    Ok(StepOutcome {
        next,
        record: TransformRecord { generator: f, w0, t, preserved, d1 },
        report,
        absorbed,
        schedule: next_sched,
    })
}

/// Run `steps` consecutive steps, advancing the schedule each time.
pub fn run_steps(
    h: &SplitHamiltonian,
    sched: &KamSchedule,
    cfg: &StepConfig,
    steps: usize,
) -> Result<Vec<StepOutcome>, KamError> {
    let mut out: Vec<StepOutcome> = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (cur_h, cur_s) = match out.last() {
            Some(o) => (&o.next, &o.schedule),
            None => (h, sched),
        };
        let o = kam_step(cur_h, cur_s, cfg)?;
        out.push(o);
    }
    Ok(out)
}
