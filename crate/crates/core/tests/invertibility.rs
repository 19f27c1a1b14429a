//! Round trips and log-determinants of flow stacks.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use slowflow::ad::{Init, Matrix};
use slowflow::flows::{slow_cumsum, slow_diff, FlowStack};

fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_stack(seed: u64, max_layers: usize) -> (FlowStack<f64>, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=6);
    let depth = rng.gen_range(1..=max_layers);
    let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=16)).collect();
    let std = rng.gen_range(0.1..0.6);
    let mut s = FlowStack::realnvp(d, depth, &hidden, Init::Normal(std), false, &mut rng).unwrap();
    if rng.gen_bool(0.5) {
        s = s.with_slow_flow();
    }
    (s, rng)
}

#[test]
fn hundred_random_stacks_round_trip() {
    for seed in 0..100 {
        let (s, mut rng) = random_stack(seed, 8);
        let x = randn(50, s.dim(), &mut rng);
        let err = s.decode(&s.encode(&x).unwrap()).unwrap().max_abs_diff(&x).unwrap();
        assert!(err < 1e-6, "seed {seed}: {err}");
        let err = s.encode(&s.decode(&x).unwrap()).unwrap().max_abs_diff(&x).unwrap();
        assert!(err < 1e-6, "seed {seed}: {err}");
    }
}

#[test]
fn slow_flow_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        let x = randn(200, 3, &mut rng);
        assert!(slow_cumsum(&slow_diff(&x).unwrap()).unwrap().max_abs_diff(&x).unwrap() < 1e-12);
        assert!(slow_diff(&slow_cumsum(&x).unwrap()).unwrap().max_abs_diff(&x).unwrap() < 1e-12);
    }
}

/// Determinant by partial-pivot elimination.
fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

/// `log|det|` of the full `(T*d) x (T*d)` Jacobian of `encode`, by central
/// differences on the flattened series.
fn numeric_logdet(s: &FlowStack<f64>, x: &Matrix<f64>) -> f64 {
    let n = x.len();
    let h = 1e-6;
    let mut jac = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut xp = x.clone();
        xp.as_mut_slice()[k] += h;
        let mut xm = x.clone();
        xm.as_mut_slice()[k] -= h;
        let zp = s.encode(&xp).unwrap();
        let zm = s.encode(&xm).unwrap();
        for i in 0..n {
            jac[i][k] = (zp.as_slice()[i] - zm.as_slice()[i]) / (2.0 * h);
        }
    }
    det(jac).abs().ln()
}

#[test]
fn logdet_matches_numerical_jacobian() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = rng.gen_range(1..=5);
        let base = FlowStack::<f64>::realnvp(2, depth, &[8], Init::Normal(0.5), false, &mut rng).unwrap();
        let x = randn(3, 2, &mut rng);
        for s in [base.clone(), base.with_slow_flow()] {
            let (_, ld) = s.encode_with_logdet(&x).unwrap();
            let analytic: f64 = ld.iter().sum();
            let numeric = numeric_logdet(&s, &x);
            assert!((analytic - numeric).abs() < 1e-3, "seed {seed}: {analytic} vs {numeric}");
        }
    }
}

#[test]
fn slow_flow_is_volume_preserving() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = FlowStack::<f64>::identity(2).with_slow_flow();
    let x = randn(3, 2, &mut rng);
    let (_, ld) = s.encode_with_logdet(&x).unwrap();
    assert!(ld.iter().all(|&v| v == 0.0));
    assert!(numeric_logdet(&s, &x).abs() < 1e-9);
}

#[test]
fn encode_and_decode_logdets_cancel() {
    for seed in 0..20 {
        let (s, mut rng) = random_stack(seed, 6);
        let z = randn(10, s.dim(), &mut rng);
        let (x, fwd) = s.decode_with_logdet(&z).unwrap();
        let (_, inv) = s.encode_with_logdet(&x).unwrap();
        for (a, b) in fwd.iter().zip(&inv) {
            assert!((a + b).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_property(seed in any::<u64>(), scale in 0.1f64..5.0) {
        let (s, mut rng) = random_stack(seed, 8);
        let x = randn(20, s.dim(), &mut rng).scale(scale);
        let err = s.decode(&s.encode(&x).unwrap()).unwrap().max_abs_diff(&x).unwrap();
        prop_assert!(err < 1e-6 * scale.max(1.0), "{}", err);
    }

    #[test]
    fn slow_diff_inverts_cumsum(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let x = Matrix::new(v.len(), 1, v).unwrap();
        let back = slow_cumsum(&slow_diff(&x).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x).unwrap() <= 1e-12 * x.max_abs().max(1.0) * x.rows() as f64);
    }

    #[test]
    fn total_logdet_is_sum_of_layers(seed in any::<u64>()) {
        let (s, mut rng) = random_stack(seed, 5);
        let x = randn(7, s.dim(), &mut rng);
        let (_, total) = s.encode_with_logdet(&x).unwrap();
        let mut parts = vec![0.0; x.rows()];
        let mut z = x.clone();
        for layer in s.layers().iter().rev() {
            let one = FlowStack::from_layers(s.dim(), vec![layer.clone()]).unwrap();
            let (next, ld) = one.encode_with_logdet(&z).unwrap();
            for (p, l) in parts.iter_mut().zip(ld) {
                *p += l;
            }
            z = next;
        }
        for (a, b) in total.iter().zip(&parts) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
