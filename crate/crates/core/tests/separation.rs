//! Linear separation oracles and scoring properties.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal, Uniform};
use slowflow::ad::Matrix;
use slowflow::eval::{correlation_matrix, match_and_score, score_sources};
use slowflow::ica::{fastica, lagged_cov_diagnostic, linear_sfa, mean_squared_increments};

/// Uniform and Laplace sources alternating by column.
fn nongaussian_sources(t: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let u = Uniform::new(-3f64.sqrt(), 3f64.sqrt());
    let e = Exp::new(2f64.sqrt()).unwrap();
    Matrix::from_fn(t, d, |_, j| {
        if j % 2 == 0 {
            u.sample(rng)
        } else {
            let m: f64 = e.sample(rng);
            if rng.gen_bool(0.5) { m } else { -m }
        }
    })
}

/// Random well-conditioned mixing matrix.
fn random_mixing(d: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    loop {
        let a = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
        let e = slowflow::ica::linalg::sym_eigen(&a.matmul_tn(&a).unwrap()).unwrap();
        if e.values[0] > 1e-2 * e.values[d - 1] {
            return a;
        }
    }
}

#[test]
fn fastica_recovers_linear_mixtures() {
    for d in 2..=4 {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 10 + d as u64);
            let s = nongaussian_sources(10_000, d, &mut rng);
            let x = s.matmul(&random_mixing(d, &mut rng)).unwrap();
            let r = fastica(&x, 500, 1e-6).unwrap();
            let est = r.demixing.apply(&x).unwrap();
            let score = score_sources(&s, &est).unwrap().matched_mean;
            assert!(score > 95.0, "d={d} seed={seed}: {score}");
        }
    }
}

#[test]
fn separated_sources_pass_the_independence_diagnostic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = nongaussian_sources(10_000, 3, &mut rng);
    let x = s.matmul(&random_mixing(3, &mut rng)).unwrap();
    let est = fastica(&x, 500, 1e-6).unwrap().demixing.apply(&x).unwrap();
    assert!(lagged_cov_diagnostic(&est).unwrap().max_offdiag < 0.05);
}

#[test]
fn sfa_orders_mixed_sinusoids_by_frequency() {
    let t = 5000;
    let freqs = [0.002, 0.01, 0.05];
    let s = Matrix::from_fn(t, 3, |i, j| (std::f64::consts::TAU * freqs[j] * i as f64).sin());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = s.matmul(&random_mixing(3, &mut rng)).unwrap();
    let y = linear_sfa(&x, 3).unwrap();
    let c = correlation_matrix(&s, &y).unwrap();
    for j in 0..3 {
        assert!(c.get(j, j) > 0.99, "component {j}: {}", c.get(j, j));
    }
    let msi = mean_squared_increments(&y);
    assert!(msi.windows(2).all(|w| w[0] < w[1]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matched_score_is_permutation_and_sign_invariant(seed in any::<u64>(), d in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Matrix::<f64>::from_fn(300, d, |_, _| StandardNormal.sample(&mut rng));
        let noise = Normal::new(0.0, 0.7).unwrap();
        let est = Matrix::from_fn(300, d, |i, j| s.get(i, j) + noise.sample(&mut rng));
        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let shuffled = Matrix::from_fn(300, d, |i, j| -2.5 * est.get(i, perm[j]));
        let a = score_sources(&s, &est).unwrap().matched_mean;
        let b = score_sources(&s, &shuffled).unwrap().matched_mean;
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&a));
    }

    #[test]
    fn matching_never_below_identity(seed in any::<u64>(), d in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Matrix::from_fn(d, d, |_, _| rng.gen_range(0.0..1.0));
        let (assign, best) = match_and_score(&c).unwrap();
        let diag: f64 = (0..d).map(|i| c.get(i, i)).sum::<f64>() * 100.0 / d as f64;
        prop_assert!(best + 1e-9 >= diag);
        let mut sorted = assign.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..d).collect::<Vec<_>>());
    }
}
