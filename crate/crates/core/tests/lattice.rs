use nalgebra::{DMatrix, DVector};
use nfkam::lattice::{
    check_symplectic_frame, complete_frame, reduce_at_resonance, resonant_surface_sample, smith_invariants,
    ActionFunction, LatticeError,
};
use nfkam::models::{convex_2dof, CONVEX_2DOF_GENERATOR, CONVEX_2DOF_Y0};
use nfkam::{Cutoffs, Series, Signature, Trig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn generators(seed: u64, d: usize, m0: usize) -> Vec<Vec<i64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m0).map(|_| (0..d).map(|_| rng.random_range(-4i64..=4)).collect()).collect()
}

fn matmul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|p| a[i][p] * b[p][j]).sum()).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn completed_frames_are_unimodular(seed in any::<u64>(), d in 2usize..5, m0 in 1usize..3) {
        prop_assume!(m0 < d);
        let g = generators(seed, d, m0);
        let Ok(f) = complete_frame(&g) else { return Ok(()); };
        prop_assert_eq!(f.det().abs(), 1);
        for (j, gen) in g.iter().enumerate() {
            prop_assert_eq!(&f.column(f.m() + j), gen);
        }
        let inv = f.inverse();
        let id = matmul(&f.k0, &inv);
        for (i, row) in id.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                prop_assert_eq!(v, i64::from(i == j));
            }
        }
        prop_assert!(check_symplectic_frame(&f.k0).holds);
    }

    #[test]
    fn completion_matches_invariant_factors(seed in any::<u64>(), d in 2usize..5, m0 in 1usize..3) {
        prop_assume!(m0 < d);
        let g = generators(seed, d, m0);
        let cols: Vec<Vec<i64>> = (0..d).map(|i| g.iter().map(|v| v[i]).collect()).collect();
        let factors = smith_invariants(&cols);
        let primitive = factors.len() == m0 && factors.iter().all(|&f| f == 1);
        match complete_frame(&g) {
            Ok(_) => prop_assert!(primitive),
            Err(LatticeError::Dependent { .. } | LatticeError::NotCompletable { .. }) => prop_assert!(!primitive),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn reduction_agrees_with_the_explicit_map(seed in any::<u64>()) {
        let cut = Cutoffs { fourier: 12, degree: 6, grade_cap: None };
        let h = convex_2dof(cut);
        let f = complete_frame(&[CONVEX_2DOF_GENERATOR.to_vec()]).unwrap();
        let red = reduce_at_resonance(&h, &f, &CONVEX_2DOF_Y0, cut);
        let eps: f64 = 1e-4;
        let e = eps.powf(0.25);
        let k0 = f.matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let p = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_column_slice(&CONVEX_2DOF_Y0) + &k0 * &p * e;
            let q = k0.transpose() * &x;
            let ambient = h.value(&[x[0], x[1], y[0], y[1]], eps);
            let reduced = red.constant + e * red.series.value(&[q[0], p[0], q[1], p[1]], e);
            prop_assert!((ambient - reduced).abs() <= 1e-12 * (1.0 + ambient.abs()), "{ambient} {reduced}");
        }
    }
}

#[test]
fn reduced_frequencies_at_the_resonance() {
    let cut = Cutoffs { fourier: 12, degree: 6, grade_cap: None };
    let f = complete_frame(&[CONVEX_2DOF_GENERATOR.to_vec()]).unwrap();
    let red = reduce_at_resonance(&convex_2dof(cut), &f, &CONVEX_2DOF_Y0, cut);
    assert_eq!(red.series.signature(), Signature::new(1, 1));
    assert!(red.omega_prime.amax() < 1e-15);
    assert!((red.omega_star.amax() - 1.0).abs() < 1e-15);
    // the resonant harmonic cos(x1 - x2) becomes cos u at grade 3
    assert!((red.series.coeff(3, &[0, 1], Trig::Cos, &[0, 0, 0]) - 1.0).abs() < 1e-15);
}

#[test]
fn primitive_failure_is_reported() {
    assert!(matches!(complete_frame(&[vec![2, 4]]), Err(LatticeError::NotCompletable { offending: 2, .. })));
    assert!(matches!(complete_frame(&[vec![1, 2], vec![2, 4]]), Err(LatticeError::NoFastAngle { .. })));
    assert!(matches!(complete_frame(&[vec![1, 2, 0], vec![2, 4, 0]]), Err(LatticeError::Dependent { .. })));
}

#[test]
fn surface_samples_lie_on_the_surface() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
    let b = DVector::from_column_slice(&[0.2, -0.1, 0.4]);
    let h0 = ActionFunction::quadratic(a, b);
    let f = complete_frame(&[vec![1, -1, 0]]).unwrap();
    let pts = resonant_surface_sample(&h0, &f, &[-1.0; 3], &[1.0; 3], 20);
    assert_eq!(pts.len(), 20);
    for y in &pts {
        let g = h0.gradient(y);
        assert!((g[0] - g[1]).abs() <= 1e-10);
        assert!(y.iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn polynomial_action_derivatives() {
    let sig = Signature::new(2, 0);
    let cut = Cutoffs { fourier: 0, degree: 4, grade_cap: None };
    let mut s = Series::zero(sig, cut);
    s.add_term(0, &[0, 0], Trig::Cos, &[3, 1], 1.0);
    s.add_term(0, &[0, 0], Trig::Cos, &[0, 2], -0.5);
    let h0 = ActionFunction::polynomial(s);
    let y = [0.7, -0.4];
    assert!((h0.value(&y) - (0.343 * -0.4 - 0.5 * 0.16)).abs() < 1e-15);
    let g = h0.gradient(&y);
    assert!((g[0] - 3.0 * 0.49 * -0.4).abs() < 1e-14);
    assert!((g[1] - (0.343 + 0.4)).abs() < 1e-14);
    let hess = h0.hessian(&y);
    assert!((hess[(0, 0)] - 6.0 * 0.7 * -0.4).abs() < 1e-14);
    assert!((hess[(0, 1)] - 3.0 * 0.49).abs() < 1e-14);
    assert!((hess[(1, 1)] + 1.0).abs() < 1e-14);
}
