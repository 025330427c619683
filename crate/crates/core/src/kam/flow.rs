use nalgebra::DMatrix;

use crate::series::{EvalPlan, Series, Signature};

/// Time-one map of `F` by classical RK4.
pub fn flow_map(field: &[EvalPlan], state: &[f64], time: f64, steps: usize) -> Vec<f64> {
    let n = state.len();
    let h = time / steps as f64;
    let f = |z: &[f64]| -> Vec<f64> { field.iter().map(|p| p.eval(z)).collect() };
    let mut z = state.to_vec();
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        let k1 = f(&z);
        for i in 0..n {
            tmp[i] = z[i] + 0.5 * h * k1[i];
        }
        let k2 = f(&tmp);
        for i in 0..n {
            tmp[i] = z[i] + 0.5 * h * k2[i];
        }
        let k3 = f(&tmp);
        for i in 0..n {
            tmp[i] = z[i] + h * k3[i];
        }
        let k4 = f(&tmp);
        for i in 0..n {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    z
}

/// The change of variables of one step: translate `w` by `w0`, then follow
/// the time-one flow of `F`. New coordinates map to old ones.
#[derive(Clone, Debug)]
pub struct StepMap {
    sig: Signature,
    field: Vec<EvalPlan>,
    w0: Vec<f64>,
    steps: usize,
}

pub fn step_map(f: &Series, w0: &[f64], eps: f64) -> StepMap {
    StepMap { sig: f.signature(), field: f.vector_field(eps), w0: w0.to_vec(), steps: 64 }
}

impl StepMap {
    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        let m = self.sig.m;
        let mut z = state.to_vec();
        for (i, w) in self.w0.iter().enumerate() {
            z[m + i] += w;
        }
        flow_map(&self.field, &z, 1.0, self.steps)
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }
}

/// Central-difference Jacobian of a map.
pub fn jacobian(map: impl Fn(&[f64]) -> Vec<f64>, z: &[f64], h: f64) -> DMatrix<f64> {
    let n = z.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut zp = z.to_vec();
    for j in 0..n {
        zp[j] = z[j] + h;
        let fp = map(&zp);
        zp[j] = z[j] - h;
        let fm = map(&zp);
        zp[j] = z[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// `J` for the state layout `(x, y, u, v)`.
pub fn omega_matrix(sig: &Signature) -> DMatrix<f64> {
    let (m, m0) = (sig.m, sig.m0);
    let n = sig.state_len();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    for i in 0..m0 {
        j[(2 * m + i, 2 * m + m0 + i)] = 1.0;
        j[(2 * m + m0 + i, 2 * m + i)] = -1.0;
    }
    j
}

/// `max |G^T J G - J|`.
pub fn symplectic_defect(g: &DMatrix<f64>, sig: &Signature) -> f64 {
    let j = omega_matrix(sig);
    (g.transpose() * &j * g - &j).amax()
}
