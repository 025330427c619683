use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{frequency_analysis, integrate_with, torus_residual, Method, TorusPrediction};
use crate::decimal::Dec;
use crate::degeneracy::{assemble_gbar, classify, euler_characteristic, find_critical_points, normal_hessians};
use crate::degeneracy::{CriticalPoint, TorusType};
use crate::kam::{
    flow_map, lie_transform, run_steps, KamError, KamSchedule, Profile, RShape, ScheduleConstants, ShiftMode,
    SplitHamiltonian, StepConfig, StepOutcome, StepReport,
};
use crate::models::{appendix_a, appendix_b, appendix_cutoffs, APPENDIX_A_OMEGA, APPENDIX_B_OMEGA};
use crate::series::{Key, Series, Trig, Var, Wave};

pub const GOLDEN_APPENDIX_A: &str = include_str!("../../golden/appendix_a.json");
pub const GOLDEN_APPENDIX_B_I0: &str = include_str!("../../golden/appendix_b_i0.json");
pub const GOLDEN_APPENDIX_B_I1: &str = include_str!("../../golden/appendix_b_i1.json");

/// A term in the series-literal layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenTerm {
    pub k: Vec<i32>,
    #[serde(default)]
    pub l: Vec<i32>,
    pub basis: Trig,
    pub j: Vec<u32>,
    pub egrade: i32,
    pub coef: Dec,
    /// Values the coefficient could take; `coef` is the one accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Dec>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesGolden {
    pub stage: String,
    /// `generator-N`, `normal-N`, `pert-N` or `gbar`.
    pub target: String,
    pub tol: Dec,
    /// Every stored term in the window must be listed.
    #[serde(default)]
    pub exhaustive: bool,
    #[serde(default)]
    pub max_grade: Option<i32>,
    #[serde(default)]
    pub max_degree: Option<u32>,
    /// Every term below this grade must vanish.
    #[serde(default)]
    pub vanish_below_grade: Option<i32>,
    pub terms: Vec<GoldenTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenPoint {
    pub u: Dec,
    #[serde(default, rename = "type")]
    pub torus_type: Option<TorusType>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointsGolden {
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub min_count: Option<usize>,
    #[serde(default)]
    pub euler: Option<i64>,
    pub residual_tol: Dec,
    pub expected: Vec<GoldenPoint>,
}

/// `d_u g / eps^2` at a point of the section `y = v = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientGolden {
    pub u: Dec,
    pub expected: Dec,
    pub tol: Dec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGolden {
    pub residual_decreases: bool,
    pub frequency_tol: Dec,
    pub energy_tol: Dec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Golden {
    pub model: String,
    pub omega: Dec,
    pub eps: Dec,
    pub steps: usize,
    pub series: Vec<SeriesGolden>,
    #[serde(default)]
    pub points: Option<PointsGolden>,
    #[serde(default)]
    pub gradients: Vec<GradientGolden>,
    #[serde(default)]
    pub torus: Option<TorusGolden>,
}

impl Golden {
    pub fn parse(text: &str) -> Result<Golden, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One compared quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub stage: String,
    pub label: String,
    pub expected: f64,
    pub got: f64,
    pub diff: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn close(stage: &str, label: String, expected: f64, got: f64, tol: f64) -> Check {
        let diff = (got - expected).abs();
        Check { stage: stage.into(), label, expected, got, diff, tol, pass: diff <= tol }
    }

    /// Passes when `got <= bound`.
    fn below(stage: &str, label: String, got: f64, bound: f64) -> Check {
        Check { stage: stage.into(), label, expected: bound, got, diff: got, tol: bound, pass: got <= bound }
    }

    fn flag(stage: &str, label: String, ok: bool) -> Check {
        let v = if ok { 1.0 } else { 0.0 };
        Check { stage: stage.into(), label, expected: 1.0, got: v, diff: 1.0 - v, tol: 0.0, pass: ok }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifiedPoint {
    pub point: CriticalPoint,
    pub torus_type: TorusType,
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Outcome of an appendix pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressionBundle {
    pub model: String,
    pub checks: Vec<Check>,
    pub critical_points: Vec<ClassifiedPoint>,
    pub steps: Vec<StepReport>,
    /// `torus_residual` after `0, 1, ..` steps.
    pub torus_residuals: Vec<f64>,
    pub measured_frequency: Option<f64>,
    pub energy_drift: Option<f64>,
    pub pass: bool,
}

impl RegressionBundle {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, label_prefix: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.label.starts_with(label_prefix))
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}\n", self.model, if self.pass { "pass" } else { "FAIL" });
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {:<20} {} expected {:e} got {:e} diff {:e} tol {:e}\n",
                if c.pass { "ok" } else { "FAIL" },
                c.stage,
                c.label,
                c.expected,
                c.got,
                c.diff,
                c.tol
            ));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionOptions {
    /// Horizon of the frequency and energy check; `0` skips it.
    pub horizon: f64,
    pub dt: f64,
    pub method: Method,
    pub probes: usize,
    /// Step of the torus-residual integrations.
    pub residual_dt: f64,
    /// Points used by the flow oracle of the first Lie transform.
    pub oracle_points: usize,
    pub seed: u64,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        RegressionOptions {
            horizon: 1e4,
            dt: 1e-2,
            method: Method::Composed4,
            probes: 8,
            residual_dt: 1e-3,
            oracle_points: 20,
            seed: 0,
        }
    }
}

/// Schedule and step settings shared by the appendix runs.
pub fn appendix_schedule() -> (KamSchedule, StepConfig) {
    let c = ScheduleConstants::new(Profile::Practical, 2.0, 1, 1);
    let sched = KamSchedule::initial(c, 1, 0.5, 0.5, 0.1, 1e-3);
    let cfg = StepConfig { mode: ShiftMode::None, shape: RShape::Full, eps: 1e-3, ..Default::default() };
    (sched, cfg)
}

fn term_label(target: &str, t: &GoldenTerm) -> String {
    let trig = match t.basis {
        Trig::Cos => "cos",
        Trig::Sin => "sin",
    };
    format!("{target} eps^{} {trig}{:?}{:?} j{:?}", t.egrade, t.k, t.l, t.j)
}

fn key_of(t: &GoldenTerm) -> Key {
    let wave: Wave = t.k.iter().chain(&t.l).copied().collect();
    Key::new(t.egrade, wave, t.basis, t.j.iter().map(|&a| a as u8).collect())
}

fn compare_series(g: &SeriesGolden, s: &Series, out: &mut Vec<Check>) {
    let tol = g.tol.0;
    let in_window =
        |k: &Key| g.max_grade.is_none_or(|mg| k.grade <= mg) && g.max_degree.is_none_or(|md| k.degree() <= md);
    let mut listed = Vec::new();
    for t in &g.terms {
        let key = key_of(t);
        out.push(Check::close(&g.stage, term_label(&g.target, t), t.coef.0, s.coefficient(&key), tol));
        listed.push(key);
    }
    if g.exhaustive {
        let extra =
            s.terms().filter(|(k, _)| in_window(k) && !listed.contains(k)).map(|(_, c)| c.abs()).fold(0.0, f64::max);
        out.push(Check::below(&g.stage, format!("{} unlisted terms", g.target), extra, tol));
    }
    if let Some(below) = g.vanish_below_grade {
        let worst = s.terms().filter(|(k, _)| k.grade < below).map(|(_, c)| c.abs()).fold(0.0, f64::max);
        out.push(Check::below(&g.stage, format!("{} below grade {below}", g.target), worst, tol));
    }
}

fn target<'a>(name: &str, history: &'a [StepOutcome], gbar: &'a Series) -> Option<&'a Series> {
    if name == "gbar" {
        return Some(gbar);
    }
    let (kind, n) = name.rsplit_once('-')?;
    let n: usize = n.parse().ok()?;
    let o = history.get(n.checked_sub(1)?)?;
    match kind {
        "generator" => Some(&o.record.generator),
        "normal" => Some(&o.next.normal),
        "pert" => Some(&o.next.pert),
        _ => None,
    }
}

/// `max |H(phi_F(p)) - (exp ad_F H)(p)|` over seeded points, with the flow
/// integrated by RK4.
pub fn flow_oracle(h: &Series, f: &Series, eps: f64, points: usize, seed: u64) -> f64 {
    let sig = h.signature();
    let lie = lie_transform(h, f, 6, 0.5, 0.5, eps).series;
    let field = f.vector_field(eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, m0) = (sig.m, sig.m0);
    (0..points)
        .map(|_| {
            let z: Vec<f64> = (0..sig.state_len())
                .map(|i| {
                    if i < m || (2 * m..2 * m + m0).contains(&i) {
                        rng.random_range(0.0..TAU)
                    } else {
                        rng.random_range(-0.1..0.1)
                    }
                })
                .collect();
            let moved = flow_map(&field, &z, 1.0, 200);
            (h.value(&moved, eps) - lie.value(&z, eps)).abs()
        })
        .fold(0.0, f64::max)
}

fn run_pipeline(h: Series, golden: &Golden, opts: &RegressionOptions) -> Result<RegressionBundle, KamError> {
    let (sched, mut cfg) = appendix_schedule();
    let eps = golden.eps.0;
    cfg.eps = eps;
    let split = SplitHamiltonian::from_series(&h);
    let history = run_steps(&split, &sched, &cfg, golden.steps)?;
    let gbar = assemble_gbar(&history);
    let mut checks = Vec::new();

    for g in &golden.series {
        match target(&g.target, &history, &gbar.gbar) {
            Some(s) => compare_series(g, s, &mut checks),
            None => checks.push(Check::flag(&g.stage, format!("unknown target {}", g.target), false)),
        }
    }
    let fo = flow_oracle(&h, &history[0].record.generator, eps, opts.oracle_points, opts.seed);
    checks.push(Check::below("flow-oracle", "H(phi_F) - exp(ad_F) H".into(), fo, 1e-8));

    let points = find_critical_points(&gbar, eps);
    let n_final = &history.last().expect("steps").next.normal;
    let classified: Vec<ClassifiedPoint> = points
        .iter()
        .map(|p| {
            let (nvv, v) = normal_hessians(n_final, &p.u, eps);
            let (torus_type, eigenvalues) = classify(&nvv, &v);
            ClassifiedPoint { point: p.clone(), torus_type, eigenvalues }
        })
        .collect();
    if let Some(pg) = &golden.points {
        let tol = pg.residual_tol.0;
        if let Some(c) = pg.count {
            checks.push(Check::close("critical-points", "count".into(), c as f64, points.len() as f64, 0.0));
        }
        if let Some(c) = pg.min_count {
            checks.push(Check::flag("critical-points", format!("count {} >= {c}", points.len()), points.len() >= c));
        }
        if let Some(e) = pg.euler {
            let got = euler_characteristic(&points).map_or(f64::NAN, |x| x as f64);
            checks.push(Check::close("critical-points", "euler characteristic".into(), e as f64, got, 0.0));
        }
        for gp in &pg.expected {
            let near = classified.iter().find(|c| {
                let d = (c.point.u[0] - gp.u.0).rem_euclid(TAU);
                d.min(TAU - d) < 1e-6
            });
            match near {
                Some(c) => {
                    checks.push(Check::below(
                        "critical-points",
                        format!("gradient at u={}", gp.u.0),
                        c.point.gradient_residual,
                        tol,
                    ));
                    if let Some(t) = gp.torus_type {
                        checks.push(Check::flag(
                            "classification",
                            format!("type at u={} is {t:?} (got {:?})", gp.u.0, c.torus_type),
                            t == c.torus_type,
                        ));
                    }
                }
                None => checks.push(Check::flag("critical-points", format!("point at u={}", gp.u.0), false)),
            }
        }
    }
    let section = gbar.section();
    let du = section.partial(Var::U(0));
    for gg in &golden.gradients {
        let mut z = vec![0.0; section.signature().state_len()];
        z[2] = gg.u.0;
        let got = du.value(&z, eps) / (eps * eps);
        checks.push(Check::close("gradient", format!("d_u g / eps^2 at u={}", gg.u.0), gg.expected.0, got, gg.tol.0));
    }

    let mut torus_residuals = Vec::new();
    let mut measured_frequency = None;
    let mut energy_drift = None;
    if let Some(tg) = &golden.torus {
        let u0 = classified
            .iter()
            .find(|c| c.torus_type == TorusType::Elliptic)
            .or(classified.first())
            .map(|c| c.point.u.clone());
        let base = TorusPrediction::of_normal_form(&split.normal, eps, u0.clone());
        torus_residuals.push(torus_residual(&h, &base, opts.probes, opts.residual_dt));
        for k in 1..=history.len() {
            let p = TorusPrediction::from_history(&history[..k], eps, u0.clone());
            torus_residuals.push(torus_residual(&h, &p, opts.probes, opts.residual_dt));
        }
        if tg.residual_decreases {
            let ok = torus_residuals.windows(2).all(|w| w[1] < w[0]);
            checks.push(Check::flag("torus", format!("residual decreases {torus_residuals:?}"), ok));
        }
        if opts.horizon > 0.0 {
            let pred = TorusPrediction::from_history(&history, eps, u0);
            let z0 = pred.initial_state(&vec![0.0; h.signature().m]);
            match integrate_with(&h, eps, &z0, opts.horizon, opts.dt, opts.method) {
                Ok(traj) => {
                    let drift = traj.energy_drift();
                    energy_drift = Some(drift);
                    checks.push(Check::below("torus", "energy drift".into(), drift, tg.energy_tol.0));
                    match frequency_analysis(&traj, 0) {
                        Ok(f) if !f.flagged => {
                            measured_frequency = Some(f.frequency);
                            checks.push(Check::close(
                                "torus",
                                "x-frequency".into(),
                                pred.omega[0],
                                f.frequency,
                                tg.frequency_tol.0,
                            ));
                        }
                        _ => checks.push(Check::flag("torus", "x-frequency peak".into(), false)),
                    }
                }
                Err(e) => checks.push(Check::flag("torus", format!("integration: {e}"), false)),
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(RegressionBundle {
        model: golden.model.clone(),
        checks,
        critical_points: classified,
        steps: history.iter().map(|o| o.report.clone()).collect(),
        torus_residuals,
        measured_frequency,
        energy_drift,
        pass,
    })
}

pub fn run_appendix_a_with(opts: &RegressionOptions) -> Result<RegressionBundle, KamError> {
    let golden = Golden::parse(GOLDEN_APPENDIX_A).expect("golden file parses");
    run_pipeline(appendix_a(appendix_cutoffs(), APPENDIX_A_OMEGA), &golden, opts)
}

pub fn run_appendix_b_with(iota: u8, opts: &RegressionOptions) -> Result<RegressionBundle, KamError> {
    let text = if iota == 0 { GOLDEN_APPENDIX_B_I0 } else { GOLDEN_APPENDIX_B_I1 };
    let golden = Golden::parse(text).expect("golden file parses");
    run_pipeline(appendix_b(iota, appendix_cutoffs(), APPENDIX_B_OMEGA), &golden, opts)
}

/// Reduced normal form, two steps, averaged potential, critical points and
/// their type, and direct integration, each compared with its golden file.
pub fn run_appendix_a() -> Result<RegressionBundle, KamError> {
    run_appendix_a_with(&RegressionOptions::default())
}

pub fn run_appendix_b(iota: u8) -> Result<RegressionBundle, KamError> {
    run_appendix_b_with(iota, &RegressionOptions::default())
}
