mod common;

use common::*;
use netcp::{ar_log_marginal, gauss_mean_log_marginal, ArModelHyper, GaussMeanHyper, ObservationMatrix, SegmentModel, SegmentSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn quadrature_rule_is_sound() {
    for k in 0..8 {
        let v = integrate(|x| x.powi(k), 0.0, 1.0, 1e-14);
        assert!((v - 1.0 / (k + 1) as f64).abs() < 1e-14);
    }
    let g = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-14);
    assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-13);
}

#[test]
fn gauss_mean_matches_direct_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (s2, g2) = (rng.random_range(0.05..4.0), rng.random_range(0.05..10.0));
        let h = GaussMeanHyper::new(s2, g2).unwrap();
        let a = gauss_mean_log_marginal(&y, &h).unwrap();
        let b = gauss_mean_direct(&y, s2, g2);
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn ar_matches_student_t_with_two_lags() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let len = 9;
        let row: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let context = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let y = ObservationMatrix::with_lag_context(vec![row.clone()], vec![context.clone()]).unwrap();
        let alpha = rng.random_range(0.5..3.0);
        let beta = rng.random_range(0.2..3.0);
        let delta = vec![rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
        let h = ArModelHyper::new(alpha, beta, delta.clone()).unwrap();
        let s = rng.random_range(0..len - 1);
        let t = rng.random_range(s + 1..=len);
        let value = |k: isize| if k >= 1 { row[(k - 1) as usize] } else { context[(-k) as usize] };
        let obs: Vec<f64> = (s + 1..=t).map(|k| value(k as isize)).collect();
        let design: Vec<Vec<f64>> = (s + 1..=t).map(|k| vec![value(k as isize - 1), value(k as isize - 2)]).collect();
        let want = ar_student_t(&obs, &design, alpha, beta, &delta);
        let direct = ar_log_marginal(&y, 0, s, t, &h).unwrap();
        assert!((direct - want).abs() < 1e-9 * want.abs().max(1.0), "{direct} vs {want}");
        let spec = SegmentSpec::Ar {
            alpha,
            beta,
            delta,
            lags: None,
        };
        let prefix = SegmentModel::new(&y, &[spec]).unwrap().log_marginal(0, s, t).unwrap();
        assert!((prefix - want).abs() < 1e-8 * want.abs().max(1.0), "{prefix} vs {want}");
    }
}

#[test]
fn ar_matches_nested_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y0 = rng.random_range(-1.5..1.5);
        let y = ObservationMatrix::with_lag_context(vec![row.clone()], vec![vec![y0]]).unwrap();
        let (alpha, beta, delta) = (rng.random_range(0.8..3.0), rng.random_range(0.3..2.0), rng.random_range(0.2..2.0));
        let h: Vec<f64> = std::iter::once(y0).chain(row[..n - 1].iter().copied()).collect();
        let want = ar1_quadrature(&row, &h, alpha, beta, delta);
        let got = ar_log_marginal(&y, 0, 0, n, &ArModelHyper::new(alpha, beta, vec![delta]).unwrap()).unwrap();
        assert!(((got - want) / want).abs() < 1e-5, "{got} vs {want}");
    }
}

#[test]
fn single_observation_densities_integrate_to_one() {
    let h = GaussMeanHyper::new(0.7, 2.0).unwrap();
    let total = integrate(|v| gauss_mean_log_marginal(&[v], &h).unwrap().exp(), -40.0, 40.0, 1e-12);
    assert!((total - 1.0).abs() < 1e-9);

    // AR(1) with a fixed lag value: heavy Student-t tails need a wide window
    let hyper = ArModelHyper::new(2.0, 1.0, vec![0.5]).unwrap();
    let f = |v: f64| {
        let y = ObservationMatrix::with_lag_context(vec![vec![v]], vec![vec![0.8]]).unwrap();
        ar_log_marginal(&y, 0, 0, 1, &hyper).unwrap().exp()
    };
    let total = integrate(f, -2000.0, 2000.0, 1e-12);
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn two_observation_gauss_density_integrates_to_one() {
    let h = GaussMeanHyper::new(0.5, 3.0).unwrap();
    let total = integrate(
        |a| integrate(|b| gauss_mean_log_marginal(&[a, b], &h).unwrap().exp(), -30.0, 30.0, 1e-11),
        -30.0,
        30.0,
        1e-10,
    );
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_prefix_sums_match_direct(
        y in proptest::collection::vec(-20.0f64..20.0, 2..30),
        s2 in 0.01f64..5.0,
        g2 in 0.01f64..20.0,
        cut in 0usize..1000,
    ) {
        let len = y.len();
        let s = cut % len;
        let obs = ObservationMatrix::new(vec![y.clone()], 0).unwrap();
        let model = SegmentModel::new(&obs, &[SegmentSpec::gauss_mean(s2, g2)]).unwrap();
        let want = gauss_mean_direct(&y[s..], s2, g2);
        let got = model.log_marginal(0, s, len).unwrap();
        prop_assert!((got - want).abs() < 1e-8 * want.abs().max(1.0));
    }
}
