//! Model configuration files. Every real number is a decimal string.

use anyhow::{anyhow, bail, Context, Result};
use nfkam::conditions::ConditionName;
use nfkam::decimal::Dec;
use nfkam::dynamics::Method;
use nfkam::kam::{Profile, RShape, ShiftMode};
use nfkam::models::{builtin, Builtin};
use nfkam::series::SeriesLiteral;
use nfkam::{Cutoffs, Series, Signature, Trig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum H0Spec {
    /// `y^T A y / 2 + b^T y` on `(d, 0)`.
    Quadratic { matrix: Vec<Vec<Dec>>, linear: Vec<Dec> },
    /// A trig-free series.
    Series(SeriesLiteral),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub signature: Signature,
    pub cutoffs: Cutoffs,
    pub h0: H0Spec,
    #[serde(default)]
    pub perturbation: Option<SeriesLiteral>,
    /// Resonance generators; empty when the model is already reduced.
    #[serde(default)]
    pub generators: Vec<Vec<i64>>,
    #[serde(default)]
    pub y0: Option<Vec<Dec>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub profile: Profile,
    pub tau: Dec,
    pub r0: Dec,
    pub s0: Dec,
    pub gamma0: Dec,
    pub mu0: Dec,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            profile: Profile::Practical,
            tau: Dec(2.0),
            r0: Dec(0.5),
            s0: Dec(0.5),
            gamma0: Dec(0.1),
            mu0: Dec(1e-3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub lo: Vec<Dec>,
    pub hi: Vec<Dec>,
    pub gammas: Vec<Dec>,
    pub tau: Dec,
    pub kmax: u32,
    pub samples: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsConfig {
    /// Rank conditions to test, by name (`S1` .. `S8`, `S3'`, `A1` .. `A3`).
    #[serde(default)]
    pub names: Vec<String>,
    /// Half-width of the box around `y0` sampled for the surface points.
    #[serde(default)]
    pub radius: Option<Dec>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub measure: Option<MeasureConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegeneracyConfig {
    #[serde(default)]
    pub delta_grid: Option<Vec<Dec>>,
    pub order_cap: u32,
}

impl Default for DegeneracyConfig {
    fn default() -> Self {
        DegeneracyConfig { delta_grid: None, order_cap: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub horizon: Dec,
    pub dt: Dec,
    pub method: Method,
    pub probes: usize,
    pub residual_dt: Dec,
    pub frequency_tol: Dec,
    pub energy_tol: Dec,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            horizon: Dec(1e4),
            dt: Dec(1e-2),
            method: Method::Composed4,
            probes: 8,
            residual_dt: Dec(1e-3),
            frequency_tol: Dec(1e-4),
            energy_tol: Dec(1e-9),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub model: ModelSpec,
    pub eps: Dec,
    #[serde(default = "unit")]
    pub delta: Dec,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub mode: ShiftMode,
    pub shape: RShape,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub conditions: ConditionsConfig,
    #[serde(default)]
    pub degeneracy: DegeneracyConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn unit() -> Dec {
    Dec(1.0)
}

/// The Hamiltonian described by a model, split into its parts.
pub struct LoadedModel {
    pub h0: Series,
    pub total: Series,
}

impl ModelSpec {
    pub fn load(&self) -> Result<LoadedModel> {
        let sig = self.signature;
        let h0 = match &self.h0 {
            H0Spec::Series(lit) => Series::from_literal(lit).context("h0")?,
            H0Spec::Quadratic { matrix, linear } => {
                if sig.m0 != 0 {
                    bail!("h0: a quadratic action function needs signature (d, 0)");
                }
                let d = sig.m;
                if linear.len() != d || matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    bail!("h0: matrix must be {d} x {d} and linear must have length {d}");
                }
                let mut s = Series::zero(sig, self.cutoffs);
                let zero = vec![0; d];
                for i in 0..d {
                    let mut e = vec![0u8; d];
                    e[i] = 1;
                    s.add_term(0, &zero, Trig::Cos, &e, linear[i].0);
                    for j in i..d {
                        let mut e = vec![0u8; d];
                        e[i] += 1;
                        e[j] += 1;
                        let c = if i == j { 0.5 * matrix[i][i].0 } else { 0.5 * (matrix[i][j].0 + matrix[j][i].0) };
                        s.add_term(0, &zero, Trig::Cos, &e, c);
                    }
                }
                s
            }
        };
        if h0.signature() != sig {
            bail!("h0: signature {:?} differs from the model signature {:?}", h0.signature(), sig);
        }
        if h0.terms().any(|(k, _)| !k.is_trig_free()) {
            bail!("h0: must not depend on the angles");
        }
        let h0 = h0.with_cutoffs(self.cutoffs);
        let mut total = h0.clone();
        if let Some(p) = &self.perturbation {
            let p = Series::from_literal(p).context("perturbation")?;
            if p.signature() != sig {
                bail!("perturbation: signature {:?} differs from the model signature {:?}", p.signature(), sig);
            }
            total.axpy(1.0, &p.with_cutoffs(self.cutoffs));
        }
        if !self.generators.is_empty() {
            if sig.m0 != 0 {
                bail!("generators: a model with resonance generators lives on (d, 0)");
            }
            if self.generators.iter().any(|g| g.len() != sig.m) {
                bail!("generators: every generator needs {} entries", sig.m);
            }
            match &self.y0 {
                Some(y) if y.len() == sig.m => {}
                _ => bail!("y0: a point with {} entries is required with generators", sig.m),
            }
        }
        Ok(LoadedModel { h0, total })
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<ModelConfig> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| anyhow!("config: {e}"))?;
        cfg.model.load()?;
        for n in &cfg.conditions.names {
            if ConditionName::parse(n).is_none() {
                bail!("conditions.names: unknown condition {n:?}");
            }
        }
        if !(cfg.eps.0 > 0.0) {
            bail!("eps: must be positive");
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// A complete config for a built-in model.
    pub fn for_builtin(name: &str) -> Option<ModelConfig> {
        let b = builtin(name)?;
        let (model, eps, steps, mode) = match b {
            Builtin::Reduced { series, .. } => {
                let h0 = series.filter(|k| k.is_trig_free());
                let p = series.filter(|k| !k.is_trig_free());
                let spec = ModelSpec {
                    signature: series.signature(),
                    cutoffs: series.cutoffs(),
                    h0: H0Spec::Series(h0.to_literal()),
                    perturbation: Some(p.to_literal()),
                    generators: vec![],
                    y0: None,
                };
                (spec, 1e-3, 2, ShiftMode::None)
            }
            Builtin::Ambient { series, generators, y0 } => {
                let sig = series.signature();
                let h0 = series.filter(|k| k.is_trig_free() && k.grade == 0);
                let p = series.filter(|k| !(k.is_trig_free() && k.grade == 0));
                let spec = ModelSpec {
                    signature: sig,
                    cutoffs: series.cutoffs(),
                    h0: H0Spec::Series(h0.to_literal()),
                    perturbation: Some(p.to_literal()),
                    generators,
                    y0: Some(y0.into_iter().map(Dec).collect()),
                };
                (spec, 1e-4, 1, ShiftMode::None)
            }
        };
        Some(ModelConfig {
            name: name.to_string(),
            model,
            eps: Dec(eps),
            delta: Dec(1.0),
            schedule: ScheduleConfig::default(),
            mode,
            shape: RShape::Full,
            steps,
            seed: 0,
            conditions: ConditionsConfig::default(),
            degeneracy: DegeneracyConfig::default(),
            verify: VerifyConfig::default(),
        })
    }
}
