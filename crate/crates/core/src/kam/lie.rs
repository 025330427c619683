use crate::series::Series;

#[derive(Clone, Debug)]
pub struct LieResult {
    pub series: Series,
    /// Number of bracket terms added.
    pub order: usize,
    /// Weighted norm of the first neglected term, zero when the series
    /// terminated inside the truncation.
    pub remainder: f64,
}

/// `H o phi_F^1 = sum_j ad_F^j H / j!` with `ad_F G = {G, F}`.
///
/// When the cutoffs carry a grade cap and `F` has positive grade, the sum
/// runs until the brackets leave the truncation, so `order` is only a
/// floor. Otherwise exactly `order` brackets are taken and the next one is
/// estimated. Norms use `(r, s, eps)`.
pub fn lie_transform(h: &Series, f: &Series, order: usize, r: f64, s: f64, eps: f64) -> LieResult {
    let graded = h.cutoffs().grade_cap.is_some() && f.min_grade().is_some_and(|g| g > 0);
    let mut out = h.clone();
    let mut term = h.clone();
    let mut j = 0;
    loop {
        if !graded && j >= order {
            break;
        }
        let next = term.poisson_bracket(f).scale(1.0 / (j + 1) as f64);
        if next.is_empty() {
            return LieResult { series: out, order: j, remainder: 0.0 };
        }
        j += 1;
        out.axpy(1.0, &next);
        term = next;
    }
    let tail = term.poisson_bracket(f).scale(1.0 / (j + 1) as f64);
    LieResult { series: out, order: j, remainder: tail.weighted_norm(r, s, eps) }
}
