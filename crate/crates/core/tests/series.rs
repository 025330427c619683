use nfkam::series::{state_var, SeriesLiteral};
use nfkam::{Cutoffs, Series, Signature, Trig, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WIDE: Cutoffs = Cutoffs { fourier: 40, degree: 20, grade_cap: None };

/// Small series with integer coefficients, so sums and products are exact.
fn small(seed: u64, sig: Signature, cut: Cutoffs, terms: usize, max_deg: u32) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Series::zero(sig, cut);
    for _ in 0..terms {
        let wave: Vec<i32> = (0..sig.waves()).map(|_| rng.random_range(-2..=2)).collect();
        let mut mono = vec![0u8; sig.polys()];
        for _ in 0..rng.random_range(0..=max_deg) {
            mono[rng.random_range(0..sig.polys())] += 1;
        }
        let trig = if rng.random_bool(0.5) { Trig::Cos } else { Trig::Sin };
        let c = rng.random_range(-4..=4) as f64;
        s.add_term(rng.random_range(0..=2), &wave, trig, &mono, c);
    }
    s
}

fn point(seed: u64, sig: Signature) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    (0..sig.state_len()).map(|_| rng.random_range(-0.7..0.7)).collect()
}

fn sig_of(k: u8) -> Signature {
    [Signature::new(1, 0), Signature::new(1, 1), Signature::new(2, 0), Signature::new(2, 1)][k as usize % 4]
}

fn vars(sig: Signature) -> Vec<Var> {
    (0..sig.state_len()).map(|i| state_var(&sig, i)).collect()
}

/// Poisson bracket by central differences of the evaluated series.
fn bracket_oracle(f: &Series, g: &Series, z: &[f64], eps: f64) -> f64 {
    let sig = f.signature();
    let h = 1e-5;
    let d = |s: &Series, i: usize| {
        let mut a = z.to_vec();
        let mut b = z.to_vec();
        a[i] += h;
        b[i] -= h;
        (s.value(&a, eps) - s.value(&b, eps)) / (2.0 * h)
    };
    let (m, m0) = (sig.m, sig.m0);
    let mut acc = 0.0;
    for i in 0..m {
        acc += d(f, i) * d(g, m + i) - d(f, m + i) * d(g, i);
    }
    for i in 0..m0 {
        let (u, v) = (2 * m + i, 2 * m + m0 + i);
        acc += d(f, u) * d(g, v) - d(f, v) * d(g, u);
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms_exact_below_cutoffs(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let a = small(seed, sig, WIDE, 4, 2);
        let b = small(seed.wrapping_add(1), sig, WIDE, 4, 2);
        let c = small(seed.wrapping_add(2), sig, WIDE, 4, 2);
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_empty());
        let one = Series::constant(sig, WIDE, 1.0);
        prop_assert_eq!(&a * &one, a.clone());
    }

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let f = small(seed, sig, WIDE, 5, 3);
        let g = small(seed ^ 7, sig, WIDE, 5, 3);
        prop_assert_eq!(f.poisson_bracket(&g), -&g.poisson_bracket(&f));
    }

    #[test]
    fn leibniz_rule(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let f = small(seed, sig, WIDE, 3, 2);
        let g = small(seed ^ 11, sig, WIDE, 3, 2);
        let h = small(seed ^ 13, sig, WIDE, 3, 2);
        let lhs = (&f * &g).poisson_bracket(&h);
        let rhs = &(&f * &g.poisson_bracket(&h)) + &(&f.poisson_bracket(&h) * &g);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * (1.0 + lhs.max_abs_coefficient()));
    }

    #[test]
    fn jacobi_identity(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let f = small(seed, sig, WIDE, 3, 2);
        let g = small(seed ^ 17, sig, WIDE, 3, 2);
        let h = small(seed ^ 19, sig, WIDE, 3, 2);
        let mut sum = f.poisson_bracket(&g.poisson_bracket(&h));
        sum.axpy(1.0, &g.poisson_bracket(&h.poisson_bracket(&f)));
        sum.axpy(1.0, &h.poisson_bracket(&f.poisson_bracket(&g)));
        prop_assert!(sum.max_abs_coefficient() <= 1e-10);
    }

    #[test]
    fn bracket_matches_finite_differences(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let f = small(seed, sig, WIDE, 5, 3);
        let g = small(seed ^ 23, sig, WIDE, 5, 3);
        let z = point(seed, sig);
        let exact = f.poisson_bracket(&g).value(&z, 0.5);
        let fd = bracket_oracle(&f, &g, &z, 0.5);
        prop_assert!((exact - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{} vs {}", exact, fd);
    }

    #[test]
    fn products_evaluate_pointwise(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let a = small(seed, sig, WIDE, 5, 3);
        let b = small(seed ^ 29, sig, WIDE, 5, 3);
        let z = point(seed, sig);
        let ab = (&a * &b).value(&z, 0.3);
        let want = a.value(&z, 0.3) * b.value(&z, 0.3);
        prop_assert!((ab - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn derivatives_match_finite_differences(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let a = small(seed, sig, WIDE, 6, 3);
        let z = point(seed, sig);
        for (i, v) in vars(sig).into_iter().enumerate() {
            let mut p = z.clone();
            let mut q = z.clone();
            p[i] += 1e-5;
            q[i] -= 1e-5;
            let fd = (a.value(&p, 0.4) - a.value(&q, 0.4)) / 2e-5;
            let exact = a.partial(v).value(&z, 0.4);
            prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn truncation_is_a_partition(seed in any::<u64>(), k in 0u8..4, kmax in 0u32..4, dmax in 0u32..4) {
        let sig = sig_of(k);
        let a = small(seed, sig, WIDE, 10, 4);
        let head = a.truncate_x_fourier(kmax);
        let tail = a.filter(|key| key.k(&sig).iter().map(|x| x.unsigned_abs()).sum::<u32>() > kmax);
        prop_assert_eq!(&head + &tail, a.clone());
        prop_assert_eq!(head.len() + tail.len(), a.len());
        let low = a.truncate_degree(dmax);
        let high = a.filter(|key| key.degree() > dmax);
        prop_assert_eq!(&low + &high, a.clone());
        prop_assert_eq!(&a.average() + &a.oscillating(), a);
    }

    #[test]
    fn weighted_norm_is_submultiplicative(seed in any::<u64>(), k in 0u8..4, r in 0.0f64..1.0, s in 0.0f64..1.5) {
        let sig = sig_of(k);
        let cut = Cutoffs { fourier: 3, degree: 3, grade_cap: None };
        let a = small(seed, sig, cut, 6, 3);
        let b = small(seed ^ 31, sig, cut, 6, 3);
        let eps = 0.5;
        let lhs = (&a * &b).weighted_norm(r, s, eps);
        let rhs = a.weighted_norm(r, s, eps) * b.weighted_norm(r, s, eps);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn literal_round_trip(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let mut a = small(seed, sig, WIDE, 8, 3);
        a.axpy(std::f64::consts::PI, &small(seed ^ 37, sig, WIDE, 4, 2));
        let lit = a.to_literal();
        let json = serde_json::to_string(&lit).unwrap();
        let back: SeriesLiteral = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(Series::from_literal(&back).unwrap(), a.clone());
        prop_assert_eq!(Series::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn at_eps_agrees_with_value(seed in any::<u64>(), k in 0u8..4, eps in 0.01f64..1.0) {
        let sig = sig_of(k);
        let a = small(seed, sig, WIDE, 8, 3);
        let z = point(seed, sig);
        let want = a.value(&z, eps);
        prop_assert!((a.at_eps(eps).value(&z, 1.0) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn translate_shifts_the_argument(seed in any::<u64>(), k in 0u8..4) {
        let sig = sig_of(k);
        let a = small(seed, sig, WIDE, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..sig.polys()).map(|_| rng.random_range(-0.3..0.3)).collect();
        let z = point(seed, sig);
        let mut zc = z.clone();
        for (i, ci) in c.iter().enumerate() {
            zc[sig.m + i] += ci;
        }
        let want = a.value(&zc, 0.7);
        let mut phi = vec![0.0; sig.waves()];
        phi[sig.m..].copy_from_slice(&c[sig.m..sig.m + sig.m0]);
        prop_assert!((a.translate(&c).rotate(&phi).value(&z, 0.7) - want).abs() <= 1e-11 * (1.0 + want.abs()));
    }
}

#[test]
fn cutoffs_govern_products() {
    let sig = Signature::new(1, 0);
    let cut = Cutoffs { fourier: 2, degree: 2, grade_cap: Some(1) };
    let c1 = Series::mode(sig, cut, &[1], Trig::Cos);
    let sq = &c1 * &c1;
    assert_eq!(sq.coeff(0, &[2], Trig::Cos, &[0]), 0.5);
    assert_eq!(sq.coeff(0, &[0], Trig::Cos, &[0]), 0.5);
    let c2 = Series::mode(sig, cut, &[2], Trig::Cos);
    // cos 2x cos x = (cos x + cos 3x) / 2, the cos 3x half is dropped
    let p = &c2 * &c1;
    assert_eq!(p.len(), 1);
    assert_eq!(p.coeff(0, &[1], Trig::Cos, &[0]), 0.5);
    let y = Series::var(sig, cut, Var::Y(0));
    assert!((&(&y * &y) * &y).is_empty());
    let graded = y.shift_grade(1);
    assert!((&graded * &graded).is_empty());
}

#[test]
fn mismatched_signatures_are_errors() {
    let a = Series::zero(Signature::new(1, 0), WIDE);
    let b = Series::zero(Signature::new(2, 0), WIDE);
    assert!(a.checked_add(&b).is_err());
    assert!(a.checked_mul(&b).is_err());
}

#[test]
fn canonical_bracket_of_coordinates() {
    let sig = Signature::new(1, 1);
    let y = Series::var(sig, WIDE, Var::Y(0));
    let u = Series::var(sig, WIDE, Var::U(0));
    let v = Series::var(sig, WIDE, Var::V(0));
    // {y, cos x} = -d_y y d_x cos x = sin x
    let cx = Series::mode(sig, WIDE, &[1, 0], Trig::Cos);
    assert_eq!(y.poisson_bracket(&cx), Series::mode(sig, WIDE, &[1, 0], Trig::Sin));
    assert_eq!(u.poisson_bracket(&v), Series::constant(sig, WIDE, 1.0));
    assert_eq!(v.poisson_bracket(&u), Series::constant(sig, WIDE, -1.0));
}
