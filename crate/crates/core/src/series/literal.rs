use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{canonicalize, Cutoffs, Key, Series, SeriesError, Signature, Trig, Wave};
use crate::decimal;

/// One stored term. `k` and `l` are the fast and resonant parts of the
/// wavevector, `j` the exponent over `(y, u, v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermLiteral {
    pub k: Vec<i32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub l: Vec<i32>,
    pub basis: Trig,
    pub j: Vec<u32>,
    pub coef: String,
    pub egrade: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesLiteral {
    pub signature: Signature,
    pub cutoffs: Cutoffs,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub grade_den: u32,
    pub terms: Vec<TermLiteral>,
}

fn one() -> u32 {
    1
}

fn is_one(x: &u32) -> bool {
    *x == 1
}

impl Series {
    /// Terms in storage order: `(egrade, |w|_1, w, j)`.
    pub fn to_literal(&self) -> SeriesLiteral {
        let sig = self.signature();
        let terms = self
            .terms()
            .map(|(key, c)| TermLiteral {
                k: key.k(&sig).to_vec(),
                l: key.l(&sig).to_vec(),
                basis: key.trig,
                j: key.mono.iter().map(|&a| a as u32).collect(),
                coef: decimal::format(c),
                egrade: key.grade,
            })
            .collect();
        SeriesLiteral { signature: sig, cutoffs: self.cutoffs(), grade_den: self.grade_den(), terms }
    }

    pub fn from_literal(lit: &SeriesLiteral) -> Result<Series, SeriesError> {
        let sig = lit.signature;
        if sig.m == 0 {
            return Err(SeriesError::Literal("m must be at least 1".into()));
        }
        if lit.grade_den == 0 {
            return Err(SeriesError::Literal("grade_den must be positive".into()));
        }
        let mut terms = BTreeMap::new();
        for (n, t) in lit.terms.iter().enumerate() {
            let bad = |msg: String| SeriesError::Literal(format!("term {n}: {msg}"));
            if t.k.len() != sig.m {
                return Err(bad(format!("k has length {}, expected {}", t.k.len(), sig.m)));
            }
            if t.l.len() != sig.m0 && !(t.l.is_empty() && sig.m0 == 0) {
                return Err(bad(format!("l has length {}, expected {}", t.l.len(), sig.m0)));
            }
            if t.j.len() != sig.polys() {
                return Err(bad(format!("j has length {}, expected {}", t.j.len(), sig.polys())));
            }
            if t.j.iter().any(|&a| a > u8::MAX as u32) {
                return Err(bad("exponent too large".into()));
            }
            let coef = decimal::parse(&t.coef).map_err(bad)?;
            let mut wave: Wave = t.k.iter().chain(&t.l).copied().collect();
            let sign = match canonicalize(&mut wave) {
                None if t.basis == Trig::Sin => return Err(bad("sine of the zero wavevector".into())),
                None => 1.0,
                Some(s) if t.basis == Trig::Sin => s,
                Some(_) => 1.0,
            };
            let key = Key::new(t.egrade, wave, t.basis, t.j.iter().map(|&a| a as u8).collect());
            if key.norm1 > lit.cutoffs.fourier || key.degree() > lit.cutoffs.degree {
                return Err(bad("term lies outside the declared cutoffs".into()));
            }
            if lit.cutoffs.grade_cap.is_some_and(|g| key.grade > g) {
                return Err(bad("term lies above the grade cap".into()));
            }
            if terms.insert(key, sign * coef).is_some() {
                return Err(bad("duplicate term".into()));
            }
        }
        Ok(Series::from_parts(sig, lit.cutoffs, lit.grade_den, terms))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_literal()).expect("literal serializes")
    }

    pub fn from_json(text: &str) -> Result<Series, SeriesError> {
        let lit: SeriesLiteral = serde_json::from_str(text).map_err(|e| SeriesError::Literal(e.to_string()))?;
        Series::from_literal(&lit)
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn missing_key_is_rejected() {
        let text = r#"{"signature":{"m":1,"m0":0},"cutoffs":{"fourier":4,"degree":2,"grade_cap":null},
            "terms":[{"k":[1],"basis":"cos","j":[0],"egrade":0}]}"#;
        assert!(Series::from_json(text).is_err());
    }

    #[test]
    fn extra_key_is_rejected() {
        let text = r#"{"signature":{"m":1,"m0":0},"cutoffs":{"fourier":4,"degree":2,"grade_cap":null},
            "terms":[{"k":[1],"basis":"cos","j":[0],"coef":"1","egrade":0,"x":1}]}"#;
        assert!(Series::from_json(text).is_err());
    }

    #[test]
    fn fractional_wavevector_is_rejected() {
        let text = r#"{"signature":{"m":1,"m0":0},"cutoffs":{"fourier":4,"degree":2,"grade_cap":null},
            "terms":[{"k":[1.5],"basis":"cos","j":[0],"coef":"1","egrade":0}]}"#;
        assert!(Series::from_json(text).is_err());
    }

    #[test]
    fn round_trip_keeps_order_and_bits() {
        let sig = Signature::new(1, 1);
        let mut s = Series::zero(sig, Cutoffs::default());
        s.add_term(1, &[1, -1], Trig::Sin, &[2, 0, 1], 0.1);
        s.add_term(0, &[0, 0], Trig::Cos, &[1, 0, 0], std::f64::consts::PI);
        let back = Series::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.to_literal().terms[0].egrade, 0);
    }
}
