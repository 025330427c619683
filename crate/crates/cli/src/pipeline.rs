//! Stage chain behind the subcommands.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{anyhow, Result};
use nalgebra::{DMatrix, DVector};
use nfkam::conditions::{
    check_diophantine, check_normal_form_conditions, check_rank_conditions, check_russmann, excluded_measure,
    ConditionName, ConditionReport, DiophantineScan, MeasureEstimate,
};
use nfkam::degeneracy::{
    assemble_gbar, classify, default_delta_grid, detect_order, euler_characteristic, find_critical_points,
    normal_hessians, CriticalPoint, DegeneracyReport, TorusType,
};
use nfkam::dynamics::{default_u_star, frequency_analysis, integrate_with, torus_residual, TorusPrediction};
use nfkam::kam::{
    divisor_data, kam_step, split_normal_form, Hypotheses, KamSchedule, ScheduleConstants, SplitHamiltonian,
    StepConfig, StepOutcome, StepReport,
};
use nfkam::lattice::{
    check_symplectic_frame, complete_frame, reduce_at_resonance, resonant_surface_sample, ActionFunction, Frame,
    FrameCheck,
};
use nfkam::series::SeriesLiteral;
use nfkam::{Series, Signature};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Reduce,
    Check,
    Kam,
    Degeneracy,
    Verify,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReduceStage {
    pub signature: Signature,
    pub frame: Option<Frame>,
    pub frame_check: Option<FrameCheck>,
    pub omega_star: Vec<f64>,
    pub omega_prime: Vec<f64>,
    /// Value of the grading parameter substituted in the reduced series.
    pub numeric_eps: f64,
    pub constant: f64,
    pub terms: usize,
    pub series: SeriesLiteral,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckStage {
    pub frequency: Vec<f64>,
    pub diophantine: DiophantineScan,
    pub conditions: Option<ConditionReport>,
    pub conditions_error: Option<String>,
    pub measure: Option<MeasureEstimate>,
}

/// One step as persisted: schedule, generator, shift, residuals and flags.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub schedule: KamSchedule,
    pub generator: SeriesLiteral,
    pub shift: Vec<f64>,
    pub ratio: Option<f64>,
    pub preserved: Vec<usize>,
    pub report: StepReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KamStage {
    pub steps: Vec<StepRecord>,
    pub error: Option<String>,
    pub final_normal: Option<SeriesLiteral>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusReport {
    pub u: Vec<f64>,
    pub torus_type: TorusType,
    pub eigenvalues: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegeneracyStage {
    pub report: Option<DegeneracyReport>,
    pub error: Option<String>,
    pub critical_points: Vec<CriticalPoint>,
    pub euler: Option<i64>,
    pub tori: Vec<TorusReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyStage {
    pub u_star: Vec<f64>,
    pub predicted_frequency: Vec<f64>,
    /// After `0, 1, ..` steps.
    pub torus_residuals: Vec<f64>,
    pub measured_frequency: Option<f64>,
    pub energy_drift: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Stages {
    pub reduce: Option<ReduceStage>,
    pub check: Option<CheckStage>,
    pub kam: Option<KamStage>,
    pub degeneracy: Option<DegeneracyStage>,
    pub verify: Option<VerifyStage>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunArtifact {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub strict: bool,
    pub config: ModelConfig,
    pub stages: Stages,
    pub gates: Vec<Gate>,
    /// Wall-clock seconds per stage; the only nondeterministic field.
    pub timings: BTreeMap<String, f64>,
}

impl RunArtifact {
    pub fn gates_pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn failed(&self) -> bool {
        let s = &self.stages;
        s.kam.as_ref().is_some_and(|k| k.error.is_some()) || s.verify.as_ref().is_some_and(|v| v.error.is_some())
    }
}

struct Work {
    frame: Option<Frame>,
    reduced: Series,
    h0_ambient: Option<ActionFunction>,
    eps: f64,
    history: Vec<StepOutcome>,
}

fn reduce(cfg: &ModelConfig) -> Result<(Work, ReduceStage)> {
    let spec = &cfg.model;
    let loaded = spec.load()?;
    let eps = cfg.eps.0;
    if spec.generators.is_empty() {
        let n = &loaded.total;
        let omega = divisor_data(&n.filter(|k| k.is_trig_free())).omega;
        let stage = ReduceStage {
            signature: n.signature(),
            frame: None,
            frame_check: None,
            omega_star: omega,
            omega_prime: vec![],
            numeric_eps: eps,
            constant: 0.0,
            terms: n.len(),
            series: n.to_literal(),
        };
        let w = Work { frame: None, reduced: n.clone(), h0_ambient: None, eps, history: vec![] };
        return Ok((w, stage));
    }
    let frame = complete_frame(&spec.generators).map_err(|e| anyhow!("reduce: {e}"))?;
    let y0: Vec<f64> = spec.y0.as_ref().expect("checked on load").iter().map(|d| d.0).collect();
    let red = reduce_at_resonance(&loaded.total, &frame, &y0, spec.cutoffs);
    let numeric_eps = eps.powf(0.25);
    let stage = ReduceStage {
        signature: red.series.signature(),
        frame: Some(frame.clone()),
        frame_check: Some(check_symplectic_frame(&frame.k0)),
        omega_star: red.omega_star.as_slice().to_vec(),
        omega_prime: red.omega_prime.as_slice().to_vec(),
        numeric_eps,
        constant: red.constant,
        terms: red.series.len(),
        series: red.series.to_literal(),
    };
    let w = Work {
        frame: Some(frame),
        reduced: red.series,
        h0_ambient: Some(ActionFunction::polynomial(loaded.h0.clone())),
        eps: numeric_eps,
        history: vec![],
    };
    Ok((w, stage))
}

fn check(cfg: &ModelConfig, w: &Work) -> CheckStage {
    let n = w.reduced.filter(|k| k.is_trig_free());
    let omega = divisor_data(&n).omega;
    let s = &cfg.schedule;
    let diophantine = check_diophantine(&omega, s.gamma0.0, s.tau.0, w.reduced.cutoffs().fourier);
    let names: Vec<ConditionName> = cfg.conditions.names.iter().filter_map(|n| ConditionName::parse(n)).collect();
    let (mut conditions, mut conditions_error) = (None, None);
    if !names.is_empty() {
        let (s_names, a_names): (Vec<_>, Vec<_>) =
            names.iter().partition(|c| !matches!(c, ConditionName::A1 | ConditionName::A2 | ConditionName::A3));
        let mut report: Option<ConditionReport> = None;
        let mut merge = |r: ConditionReport| match &mut report {
            Some(acc) => acc.entries.extend(r.entries),
            None => report = Some(r),
        };
        if !s_names.is_empty() {
            match (&w.h0_ambient, &w.frame, &cfg.model.y0) {
                (Some(h0), Some(frame), Some(y0)) => {
                    let r = cfg.conditions.radius.map_or(0.25, |d| d.0);
                    let lo: Vec<f64> = y0.iter().map(|y| y.0 - r).collect();
                    let hi: Vec<f64> = y0.iter().map(|y| y.0 + r).collect();
                    let pts = resonant_surface_sample(h0, frame, &lo, &hi, cfg.conditions.samples.unwrap_or(8));
                    let s_names: Vec<ConditionName> = s_names.into_iter().copied().collect();
                    match check_rank_conditions(h0, frame, &pts, None, &s_names) {
                        Ok(r) => merge(r),
                        Err(e) => conditions_error = Some(e.to_string()),
                    }
                }
                _ => conditions_error = Some("rank conditions need an unreduced model with generators".into()),
            }
        }
        if a_names.contains(&&ConditionName::A1) {
            match (&w.h0_ambient, &cfg.model.y0) {
                (Some(h0), Some(y0)) => {
                    let r = cfg.conditions.radius.map_or(0.25, |d| d.0);
                    let lo: Vec<f64> = y0.iter().map(|y| y.0 - r).collect();
                    let hi: Vec<f64> = y0.iter().map(|y| y.0 + r).collect();
                    let omega = |y: &[f64]| h0.gradient(y).as_slice().to_vec();
                    let e = check_russmann(&omega, &lo, &hi, y0.len(), cfg.conditions.samples.unwrap_or(8));
                    merge(ConditionReport { entries: vec![e], n: None });
                }
                _ => conditions_error = Some("A1 needs an unreduced model".into()),
            }
        }
        let a_names: Vec<ConditionName> = a_names.into_iter().copied().filter(|c| *c != ConditionName::A1).collect();
        if !a_names.is_empty() {
            let sig = w.reduced.signature();
            let z0 = vec![0.0; sig.state_len()];
            let energy = n.value(&z0, w.eps);
            let (nf, _) = split_normal_form(&n, cfg.delta.0, w.eps, &omega, energy);
            let ms: Vec<DMatrix<f64>> = vec![nf.m.clone()];
            let ws: Vec<DVector<f64>> = vec![nf.omega.clone()];
            match check_normal_form_conditions(&ms, &ws, sig.m, sig.m0, &a_names) {
                Ok(r) => merge(r),
                Err(e) => conditions_error = Some(e.to_string()),
            }
        }
        conditions = report;
    }
    let measure = cfg.conditions.measure.as_ref().map(|m| {
        let lo: Vec<f64> = m.lo.iter().map(|d| d.0).collect();
        let hi: Vec<f64> = m.hi.iter().map(|d| d.0).collect();
        let g: Vec<f64> = m.gammas.iter().map(|d| d.0).collect();
        excluded_measure(&lo, &hi, &g, m.tau.0, m.kmax, m.samples, cfg.seed)
    });
    CheckStage { frequency: omega, diophantine, conditions, conditions_error, measure }
}

fn kam(cfg: &ModelConfig, w: &mut Work) -> KamStage {
    let sig = w.reduced.signature();
    let s = &cfg.schedule;
    let c = ScheduleConstants::new(s.profile, s.tau.0, sig.m, sig.m0);
    let sched = KamSchedule::initial(c, sig.m, s.r0.0, s.s0.0, s.gamma0.0, s.mu0.0);
    let step_cfg =
        StepConfig { mode: cfg.mode, shape: cfg.shape, eps: w.eps, delta: cfg.delta.0, ..Default::default() };
    let split = SplitHamiltonian::from_series(&w.reduced);
    let mut history: Vec<StepOutcome> = Vec::new();
    let mut error = None;
    let mut cur = (split, sched.clone());
    for _ in 0..cfg.steps {
        match kam_step(&cur.0, &cur.1, &step_cfg) {
            Ok(o) => {
                cur = (o.next.clone(), o.schedule.clone());
                history.push(o);
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let mut prev = sched;
    let steps = history
        .iter()
        .map(|o| {
            let rec = StepRecord {
                schedule: prev.clone(),
                generator: o.record.generator.to_literal(),
                shift: o.record.w0.clone(),
                ratio: o.record.t,
                preserved: o.record.preserved.clone(),
                report: o.report.clone(),
            };
            prev = o.schedule.clone();
            rec
        })
        .collect();
    let final_normal = history.last().map(|o| o.next.normal.to_literal());
    w.history = history;
    KamStage { steps, error, final_normal }
}

fn degeneracy(cfg: &ModelConfig, w: &Work) -> DegeneracyStage {
    let empty = DegeneracyStage { report: None, error: None, critical_points: vec![], euler: None, tori: vec![] };
    if w.reduced.signature().m0 == 0 {
        return DegeneracyStage { error: Some("no resonant angles".into()), ..empty };
    }
    let Some(last) = w.history.last() else {
        return DegeneracyStage { error: Some("no KAM steps to assemble".into()), ..empty };
    };
    let gbar = assemble_gbar(&w.history);
    let grid =
        cfg.degeneracy.delta_grid.as_ref().map(|g| g.iter().map(|d| d.0).collect()).unwrap_or_else(default_delta_grid);
    let (report, error) = match detect_order(&gbar, &grid, cfg.degeneracy.order_cap) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let points = find_critical_points(&gbar, w.eps);
    let tori = points
        .iter()
        .map(|p| {
            let (nvv, v) = normal_hessians(&last.next.normal, &p.u, w.eps);
            let (torus_type, eigenvalues) = classify(&nvv, &v);
            TorusReport { u: p.u.clone(), torus_type, eigenvalues }
        })
        .collect();
    DegeneracyStage { report, error, euler: euler_characteristic(&points), critical_points: points, tori }
}

fn verify(cfg: &ModelConfig, w: &Work) -> VerifyStage {
    let v = &cfg.verify;
    let h = &w.reduced;
    let split = SplitHamiltonian::from_series(h);
    let base = TorusPrediction::of_normal_form(&split.normal, w.eps, None);
    let u0 = match w.history.last() {
        Some(last) if h.signature().m0 > 0 => Some(default_u_star(&last.next.normal, w.eps)),
        _ => None,
    };
    let base = match &u0 {
        Some(u) => TorusPrediction::of_normal_form(&split.normal, w.eps, Some(u.clone())),
        None => base,
    };
    let mut residuals = vec![torus_residual(h, &base, v.probes, v.residual_dt.0)];
    for k in 1..=w.history.len() {
        let p = TorusPrediction::from_history(&w.history[..k], w.eps, u0.clone());
        residuals.push(torus_residual(h, &p, v.probes, v.residual_dt.0));
    }
    let pred = if w.history.is_empty() { base } else { TorusPrediction::from_history(&w.history, w.eps, u0) };
    let mut out = VerifyStage {
        u_star: pred.u_star.clone(),
        predicted_frequency: pred.omega.clone(),
        torus_residuals: residuals,
        measured_frequency: None,
        energy_drift: None,
        error: None,
    };
    if v.horizon.0 > 0.0 {
        let z0 = pred.initial_state(&vec![0.0; h.signature().m]);
        match integrate_with(h, w.eps, &z0, v.horizon.0, v.dt.0, v.method) {
            Ok(traj) => {
                out.energy_drift = Some(traj.energy_drift());
                match frequency_analysis(&traj, 0) {
                    Ok(f) if !f.flagged => out.measured_frequency = Some(f.frequency),
                    Ok(_) => out.error = Some("no spectral peak in x".into()),
                    Err(e) => out.error = Some(e.to_string()),
                }
            }
            Err(e) => out.error = Some(e.to_string()),
        }
    }
    out
}

fn gates(cfg: &ModelConfig, s: &Stages, strict: bool) -> Vec<Gate> {
    let mut g = Vec::new();
    let mut push = |name: &str, pass: bool| g.push(Gate { name: name.into(), pass });
    if let Some(c) = &s.check {
        push("diophantine", c.diophantine.holds);
        if let Some(r) = &c.conditions {
            push("conditions", r.all_hold());
        }
        if c.conditions_error.is_some() {
            push("conditions", false);
        }
        if let Some(m) = &c.measure {
            push("measure-monotone", m.is_monotone(2.0));
        }
    }
    if let Some(k) = &s.kam {
        push("kam-completed", k.error.is_none() && k.steps.len() == cfg.steps);
        let decays = k.steps.iter().all(|r| r.report.pert_norm_after < r.report.pert_norm_before);
        push("kam-norm-decay", decays);
        if strict {
            let all = |f: fn(&Hypotheses) -> bool| k.steps.iter().all(|r| f(&r.report.hypotheses));
            push("kam-contracting", all(|h| h.contracting));
            push("h1", all(|h| h.h1));
            push("h2", all(|h| h.h2));
            push("h3", all(|h| h.h3.unwrap_or(true)));
            push("h4", all(|h| h.h4));
            push("h5", all(|h| h.h5));
            push("h6", all(|h| h.h6));
            push("h7", all(|h| h.h7));
        }
    }
    if let Some(d) = &s.degeneracy {
        push("degeneracy-order", d.report.is_some());
        if d.critical_points.iter().all(|p| !p.degenerate) && !d.critical_points.is_empty() {
            push("euler-characteristic", d.euler == Some(0));
        }
    }
    if let Some(v) = &s.verify {
        push("verify-completed", v.error.is_none());
        if v.torus_residuals.len() > 1 {
            push("torus-residual-decreases", v.torus_residuals.windows(2).all(|w| w[1] < w[0]));
        }
        if let Some(f) = v.measured_frequency {
            let w = v.predicted_frequency.first().copied().unwrap_or(f64::NAN);
            push("frequency", (f - w).abs() <= cfg.verify.frequency_tol.0);
        }
        if let Some(e) = v.energy_drift {
            push("energy", e <= cfg.verify.energy_tol.0);
        }
    }
    g
}

/// Run the requested stages. The reduction always runs; the KAM steps run
/// whenever a later stage needs them. With `strict` the monitored step
/// hypotheses become gates.
pub fn run(cfg: &ModelConfig, subcommand: &str, stages: &[Stage], strict: bool) -> Result<RunArtifact> {
    let mut timings = BTreeMap::new();
    let mut out = Stages::default();
    let t = Instant::now();
    let (mut w, red) = reduce(cfg)?;
    timings.insert("reduce".to_string(), t.elapsed().as_secs_f64());
    out.reduce = Some(red);
    if stages.contains(&Stage::Check) {
        let t = Instant::now();
        out.check = Some(check(cfg, &w));
        timings.insert("check".to_string(), t.elapsed().as_secs_f64());
    }
    let needs_steps = stages.iter().any(|s| matches!(s, Stage::Kam | Stage::Degeneracy | Stage::Verify));
    if needs_steps {
        let t = Instant::now();
        let k = kam(cfg, &mut w);
        timings.insert("kam".to_string(), t.elapsed().as_secs_f64());
        let failed = k.error.is_some();
        out.kam = Some(k);
        if !failed {
            if stages.contains(&Stage::Degeneracy) {
                let t = Instant::now();
                out.degeneracy = Some(degeneracy(cfg, &w));
                timings.insert("degeneracy".to_string(), t.elapsed().as_secs_f64());
            }
            if stages.contains(&Stage::Verify) {
                let t = Instant::now();
                out.verify = Some(verify(cfg, &w));
                timings.insert("verify".to_string(), t.elapsed().as_secs_f64());
            }
        }
    }
    let gates = gates(cfg, &out, strict);
    Ok(RunArtifact {
        tool: "nfkam".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        strict,
        config: cfg.clone(),
        stages: out,
        gates,
        timings,
    })
}
