use nalgebra::{DMatrix, DVector};
use nfkam::conditions::{
    check_diophantine, check_normal_form_conditions, check_rank_conditions, excluded_measure, half_lattice,
    numeric_rank, ConditionError, ConditionName,
};
use nfkam::lattice::{complete_frame, resonant_surface_sample, ActionFunction};
use proptest::prelude::*;

fn brute_force(omega: &[f64], gamma: f64, tau: f64, kmax: i32) -> bool {
    let m = omega.len();
    let side = (2 * kmax + 1) as usize;
    (0..side.pow(m as u32)).all(|mut c| {
        let k: Vec<i32> = (0..m)
            .map(|_| {
                let v = (c % side) as i32 - kmax;
                c /= side;
                v
            })
            .collect();
        let n: i32 = k.iter().map(|v| v.abs()).sum();
        if n == 0 || n > kmax {
            return true;
        }
        let dot: f64 = k.iter().zip(omega).map(|(&a, b)| a as f64 * b).sum();
        dot.abs() > gamma / (n as f64).powf(tau)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn diophantine_scan_matches_brute_force(
        omega in prop::collection::vec(-2.0f64..2.0, 1..4),
        gamma in 1e-4f64..0.3,
        kmax in 1u32..7,
    ) {
        let scan = check_diophantine(&omega, gamma, 2.0, kmax);
        prop_assert_eq!(scan.holds, brute_force(&omega, gamma, 2.0, kmax as i32));
        if let Some(k) = &scan.worst_k {
            let dot: f64 = k.iter().zip(&omega).map(|(&a, b)| a as f64 * b).sum();
            prop_assert!((dot.abs() - scan.worst_value).abs() <= 1e-12);
        }
    }

    #[test]
    fn half_lattice_covers_each_pair_once(m in 1usize..4, kmax in 1u32..6) {
        let ks = half_lattice(m, kmax);
        let full = (0..(2 * kmax as usize + 1).pow(m as u32)).filter(|&c| {
            let mut c = c;
            let n: i64 = (0..m).map(|_| { let v = (c % (2 * kmax as usize + 1)) as i64 - kmax as i64; c /= 2 * kmax as usize + 1; v.abs() }).sum();
            n > 0 && n <= kmax as i64
        }).count();
        prop_assert_eq!(2 * ks.len(), full);
        for k in &ks {
            prop_assert!(*k.iter().find(|&&c| c != 0).unwrap() > 0);
        }
    }

    #[test]
    fn rank_verdicts_ignore_positive_scaling(c in 0.05f64..20.0) {
        let which = [ConditionName::S1, ConditionName::S2, ConditionName::S5, ConditionName::S6, ConditionName::S7, ConditionName::S8];
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let b = DVector::from_column_slice(&[0.2, -0.1, 0.4]);
        let f = complete_frame(&[vec![1, -1, 0]]).unwrap();
        let base = ActionFunction::quadratic(a.clone(), b.clone());
        let pts = resonant_surface_sample(&base, &f, &[-1.0; 3], &[1.0; 3], 8);
        let r1 = check_rank_conditions(&base, &f, &pts, None, &which).unwrap();
        let scaled = ActionFunction::quadratic(a * c, b * c);
        let r2 = check_rank_conditions(&scaled, &f, &pts, None, &which).unwrap();
        for (e1, e2) in r1.entries.iter().zip(&r2.entries) {
            prop_assert_eq!(e1.name, e2.name);
            prop_assert_eq!(e1.holds, e2.holds);
            prop_assert_eq!(&e1.ranks, &e2.ranks);
        }
        prop_assert_eq!(r1.n, r2.n);
    }
}

#[test]
fn rank_conditions_without_samples_fail() {
    let f = complete_frame(&[vec![1, -1]]).unwrap();
    let h0 = ActionFunction::quadratic(DMatrix::identity(2, 2), DVector::zeros(2));
    assert_eq!(check_rank_conditions(&h0, &f, &[], None, &[ConditionName::S1]).unwrap_err(), ConditionError::NoSamples);
}

#[test]
fn numeric_rank_of_simple_matrices() {
    assert_eq!(numeric_rank(&DMatrix::zeros(3, 3)).0, 0);
    assert_eq!(numeric_rank(&DMatrix::identity(4, 4)).0, 4);
    let r = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    assert_eq!(numeric_rank(&r).0, 1);
}

#[test]
fn normal_form_count_must_agree_across_samples() {
    let full = DMatrix::identity(3, 3);
    let mut low = DMatrix::identity(3, 3);
    low[(0, 0)] = 0.0;
    let w = DVector::from_column_slice(&[1.0]);
    let err = check_normal_form_conditions(&[full.clone(), low], &[w.clone(), w.clone()], 1, 1, &[ConditionName::A2]);
    assert!(matches!(err, Err(ConditionError::InconsistentN { .. })));
    let ok = check_normal_form_conditions(&[full], &[w], 1, 1, &[ConditionName::A2]).unwrap();
    assert_eq!(ok.n, Some(1));
}

#[test]
fn measure_is_monotone_and_reproducible() {
    let gammas = [0.2, 0.1, 0.05, 0.02, 0.01];
    let a = excluded_measure(&[1.0, 1.0], &[2.0, 2.0], &gammas, 2.0, 20, 20_000, 11);
    let b = excluded_measure(&[1.0, 1.0], &[2.0, 2.0], &gammas, 2.0, 20, 20_000, 11);
    assert_eq!(a, b);
    assert!(a.is_monotone(0.0));
    assert!(a.fractions.windows(2).all(|w| w[1] <= w[0]));
    let slope = a.slope.unwrap();
    assert!((slope - 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn measure_does_not_depend_on_the_thread_count() {
    let run = || excluded_measure(&[0.5], &[1.5], &[0.1, 0.01], 2.0, 30, 10_000, 3);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one = pool.install(run);
    assert_eq!(one, run());
}
