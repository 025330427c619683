use super::{Series, SeriesError, Signature, Trig, Var};

/// A series flattened for repeated evaluation at a fixed `eps`.
#[derive(Clone, Debug)]
pub struct EvalPlan {
    sig: Signature,
    degree: usize,
    coef: Vec<f64>,
    wave: Vec<i32>,
    mono: Vec<u8>,
    trig: Vec<Trig>,
}

impl EvalPlan {
    pub fn new(series: &Series, eps: f64) -> Self {
        let sig = series.signature();
        let n = series.len();
        let mut plan = EvalPlan {
            sig,
            degree: series.cutoffs().degree as usize,
            coef: Vec::with_capacity(n),
            wave: Vec::with_capacity(n * sig.waves()),
            mono: Vec::with_capacity(n * sig.polys()),
            trig: Vec::with_capacity(n),
        };
        for (k, c) in series.terms() {
            plan.coef.push(c * series.grade_factor(k.grade, eps));
            plan.wave.extend_from_slice(&k.wave);
            plan.mono.extend_from_slice(&k.mono);
            plan.trig.push(k.trig);
        }
        plan
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    /// Value at a state `(x, y, u, v)`.
    pub fn eval(&self, state: &[f64]) -> f64 {
        let sig = self.sig;
        let (m, m0) = (sig.m, sig.m0);
        debug_assert_eq!(state.len(), sig.state_len());
        let angles: Vec<f64> = state[..m].iter().chain(&state[2 * m..2 * m + m0]).copied().collect();
        let polys = &state[m..];
        let np = sig.polys();
        let nw = sig.waves();
        // powers[i * (degree + 1) + p] = w_i^p
        let stride = self.degree + 1;
        let mut powers = vec![1.0; np * stride];
        for i in 0..np {
            for p in 1..stride {
                powers[i * stride + p] = powers[i * stride + p - 1] * polys[i];
            }
        }
        let mut total = 0.0;
        for t in 0..self.coef.len() {
            let w = &self.wave[t * nw..(t + 1) * nw];
            let phase: f64 = w.iter().zip(&angles).map(|(&k, &a)| k as f64 * a).sum();
            let tv = match self.trig[t] {
                Trig::Cos => phase.cos(),
                Trig::Sin => phase.sin(),
            };
            let mut mv = 1.0;
            for (i, &a) in self.mono[t * np..(t + 1) * np].iter().enumerate() {
                if a > 0 {
                    mv *= powers[i * stride + a as usize];
                }
            }
            total += self.coef[t] * tv * mv;
        }
        total
    }
}

impl Series {
    /// Value at a state vector `(x, y, u, v)` with `eps` substituted.
    pub fn eval(&self, state: &[f64], eps: f64) -> Result<f64, SeriesError> {
        let sig = self.signature();
        if state.len() != sig.state_len() {
            return Err(SeriesError::PointDimension { expected: sig.state_len(), got: state.len() });
        }
        Ok(EvalPlan::new(self, eps).eval(state))
    }

    /// Value at a state vector, panicking on a dimension mismatch.
    pub fn value(&self, state: &[f64], eps: f64) -> f64 {
        self.eval(state, eps).unwrap_or_else(|e| panic!("{e}"))
    }

    /// The Hamiltonian vector field `J grad H` as evaluation plans, one per
    /// state component.
    pub fn vector_field(&self, eps: f64) -> Vec<EvalPlan> {
        let sig = self.signature();
        let mut out = Vec::with_capacity(sig.state_len());
        for i in 0..sig.m {
            out.push(EvalPlan::new(&self.partial(Var::Y(i)), eps));
        }
        for i in 0..sig.m {
            out.push(EvalPlan::new(&self.partial(Var::X(i)).scale(-1.0), eps));
        }
        for j in 0..sig.m0 {
            out.push(EvalPlan::new(&self.partial(Var::V(j)), eps));
        }
        for j in 0..sig.m0 {
            out.push(EvalPlan::new(&self.partial(Var::U(j)).scale(-1.0), eps));
        }
        out
    }
}
