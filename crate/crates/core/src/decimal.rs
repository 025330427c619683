//! Real numbers stored as decimal strings in configs and artifacts.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Shortest decimal string that parses back to exactly `x`.
pub fn format(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn parse(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a decimal number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number: {s:?}"))
    }
}

/// An `f64` that serializes as a decimal string.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Dec(pub f64);

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(self.0))
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map(Dec).map_err(serde::de::Error::custom)
    }
}

impl From<f64> for Dec {
    fn from(x: f64) -> Self {
        Dec(x)
    }
}

pub fn vec(xs: &[f64]) -> Vec<Dec> {
    xs.iter().copied().map(Dec).collect()
}

pub fn unvec(xs: &[Dec]) -> Vec<f64> {
    xs.iter().map(|d| d.0).collect()
}
