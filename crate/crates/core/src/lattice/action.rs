use nalgebra::{DMatrix, DVector};

use crate::series::{Cutoffs, EvalPlan, Series, Signature, Trig, Var};

/// An integrable part `H0(y)` on `R^d`, with exact first and second
/// derivatives.
#[derive(Clone, Debug)]
pub enum ActionFunction {
    /// `H0 = y^T A y / 2 + b^T y`.
    Quadratic { a: DMatrix<f64>, b: DVector<f64> },
    /// A polynomial stored as a trig-free series on signature `(d, 0)`.
    Polynomial { series: Series, grad: Vec<EvalPlan>, hess: Vec<Vec<EvalPlan>> },
}

impl ActionFunction {
    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert!(a.is_square() && a.nrows() == b.len());
        ActionFunction::Quadratic { a, b }
    }

    /// Panics if the series depends on the angles or carries resonant pairs.
    pub fn polynomial(series: Series) -> Self {
        let sig = series.signature();
        assert_eq!(sig.m0, 0, "action functions live on (d, 0)");
        assert!(series.terms().all(|(k, _)| k.is_trig_free()), "action functions are angle-free");
        let d = sig.m;
        let grad = (0..d).map(|i| EvalPlan::new(&series.partial(Var::Y(i)), 1.0)).collect();
        let hess = (0..d)
            .map(|i| {
                let gi = series.partial(Var::Y(i));
                (0..d).map(|j| EvalPlan::new(&gi.partial(Var::Y(j)), 1.0)).collect()
            })
            .collect();
        ActionFunction::Polynomial { series, grad, hess }
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionFunction::Quadratic { b, .. } => b.len(),
            ActionFunction::Polynomial { series, .. } => series.signature().m,
        }
    }

    fn state(&self, y: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; y.len()];
        s.extend_from_slice(y);
        s
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            ActionFunction::Quadratic { a, b } => {
                let v = DVector::from_column_slice(y);
                0.5 * v.dot(&(a * &v)) + b.dot(&v)
            }
            ActionFunction::Polynomial { series, .. } => series.value(&self.state(y), 1.0),
        }
    }

    /// The frequency map `omega(y) = grad H0(y)`.
    pub fn gradient(&self, y: &[f64]) -> DVector<f64> {
        match self {
            ActionFunction::Quadratic { a, b } => a * DVector::from_column_slice(y) + b,
            ActionFunction::Polynomial { grad, .. } => {
                let s = self.state(y);
                DVector::from_iterator(grad.len(), grad.iter().map(|p| p.eval(&s)))
            }
        }
    }

    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        match self {
            ActionFunction::Quadratic { a, .. } => a.clone(),
            ActionFunction::Polynomial { hess, .. } => {
                let s = self.state(y);
                let d = hess.len();
                DMatrix::from_fn(d, d, |i, j| hess[i][j].eval(&s))
            }
        }
    }

    /// The same function as a series on `(d, 0)`.
    pub fn to_series(&self, cut: Cutoffs) -> Series {
        match self {
            ActionFunction::Quadratic { a, b } => {
                let d = b.len();
                let sig = Signature::new(d, 0);
                let mut s = Series::zero(sig, cut);
                let zero = vec![0; d];
                for i in 0..d {
                    let mut mono = vec![0u8; d];
                    mono[i] = 1;
                    s.add_term(0, &zero, Trig::Cos, &mono, b[i]);
                    for j in i..d {
                        let mut mono = vec![0u8; d];
                        mono[i] += 1;
                        mono[j] += 1;
                        let c = if i == j { 0.5 * a[(i, i)] } else { 0.5 * (a[(i, j)] + a[(j, i)]) };
                        s.add_term(0, &zero, Trig::Cos, &mono, c);
                    }
                }
                s.prune();
                s
            }
            ActionFunction::Polynomial { series, .. } => series.with_cutoffs(cut),
        }
    }
}
