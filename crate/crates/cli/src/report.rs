//! Tables and plot data from a stored artifact.

use nfkam::decimal;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Plotdata,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Table => "txt",
            Format::Csv => "csv",
            Format::Plotdata => "dat",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.columns.join(",") + "\n";
                for r in &self.rows {
                    s.push_str(&r.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Plotdata => {
                let mut s = format!("# {}\n", self.columns.join(" "));
                for r in &self.rows {
                    s.push_str(&r.join(" "));
                    s.push('\n');
                }
                s
            }
            Format::Table => {
                let mut width: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
                for r in &self.rows {
                    for (w, c) in width.iter_mut().zip(r) {
                        *w = (*w).max(c.len());
                    }
                }
                let line = |cells: Vec<&str>| {
                    let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
                    padded.join("  ").trim_end().to_string() + "\n"
                };
                let mut s = line(self.columns.clone());
                s.push_str(&line(
                    width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|x| x.as_str()).collect(),
                ));
                for r in &self.rows {
                    s.push_str(&line(r.iter().map(|c| c.as_str()).collect()));
                }
                s
            }
        }
    }
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => decimal::format(x + 0.0),
        None => match v {
            Value::Bool(b) => b.to_string(),
            Value::String(s) => s.clone(),
            Value::Null => "nan".into(),
            other => other.to_string().replace(',', ";"),
        },
    }
}

fn list(v: &Value) -> String {
    match v.as_array() {
        Some(a) => a.iter().map(num).collect::<Vec<_>>().join(";"),
        None => num(v),
    }
}

fn array<'a>(v: &'a Value, path: &[&str]) -> &'a [Value] {
    let mut cur = v;
    for p in path {
        match cur.get(p) {
            Some(x) => cur = x,
            None => return &[],
        }
    }
    cur.as_array().map(|a| a.as_slice()).unwrap_or(&[])
}

/// Every table of an artifact. Missing stages give empty tables.
pub fn tables(artifact: &Value) -> Vec<Table> {
    let steps = array(artifact, &["stages", "kam", "steps"]);
    let norm_decay = Table {
        name: "norm_decay",
        columns: vec!["nu", "pert_norm_before", "pert_norm_after", "generator_norm", "homological_residual"],
        rows: steps
            .iter()
            .map(|s| {
                let r = &s["report"];
                vec![
                    num(&r["nu"]),
                    num(&r["pert_norm_before"]),
                    num(&r["pert_norm_after"]),
                    num(&r["generator_norm"]),
                    num(&r["homological_residual"]),
                ]
            })
            .collect(),
    };
    let drift = Table {
        name: "drift",
        columns: vec!["nu", "drift_norm", "drift_scale", "omega_before", "omega_after"],
        rows: steps
            .iter()
            .map(|s| {
                let r = &s["report"];
                vec![
                    num(&r["nu"]),
                    num(&r["drift_norm"]),
                    num(&r["drift_scale"]),
                    list(&r["omega_before"]),
                    list(&r["omega_after"]),
                ]
            })
            .collect(),
    };
    let m = &artifact["stages"]["check"]["measure"];
    let gammas = array(m, &["gammas"]);
    let measure = Table {
        name: "measure",
        columns: vec!["gamma", "fraction", "stderr"],
        rows: (0..gammas.len()).map(|i| vec![num(&gammas[i]), num(&m["fractions"][i]), num(&m["stderr"][i])]).collect(),
    };
    let pts = array(artifact, &["stages", "degeneracy", "critical_points"]);
    let tori = array(artifact, &["stages", "degeneracy", "tori"]);
    let critical = Table {
        name: "critical_points",
        columns: vec!["u", "gradient_residual", "morse_index", "degenerate", "type"],
        rows: pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                vec![
                    list(&p["u"]),
                    num(&p["gradient_residual"]),
                    num(&p["morse_index"]),
                    num(&p["degenerate"]),
                    tori.get(i).map_or("-".to_string(), |t| num(&t["torus_type"])),
                ]
            })
            .collect(),
    };
    vec![norm_decay, drift, measure, critical]
}
