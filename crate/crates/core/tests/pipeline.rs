//! Data generation through scoring, without training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowflow::datagen::{gen_structural, make_mixing, make_mixing_with, read_csv, MixingConfig, StructuralSpec};
use slowflow::eval::score_sources;
use slowflow::ica::fastica;
use slowflow::{Dataset, MixingModel, Series};

fn identity_mixing(d: usize) -> MixingModel {
    let cfg = MixingConfig {
        scale_std: 0.0,
        shift_std: 0.0,
        min_residual: 0.0,
        ..MixingConfig::default()
    };
    make_mixing_with(d, 2, 0, &cfg).unwrap()
}

#[test]
fn identity_mixing_leaves_sources_untouched() {
    let s = gen_structural::<f64>(&StructuralSpec::with_seed(2)).unwrap();
    let ds = Dataset::build(&s, &identity_mixing(4), 256, 0.0).unwrap();
    assert!(ds.observed.max_abs_diff(&ds.sources).unwrap() < 1e-12);
}

#[test]
fn ica_is_near_perfect_without_mixing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = Series::from_fn(4000, 3, |_, j| match j {
        0 => rng.gen_range(-1.0..1.0),
        1 => rng.gen_range(-1.0f64..1.0).powi(3),
        _ => (rng.gen_range(0.0f64..1.0)).ln(),
    });
    let ds = Dataset::build(&s, &identity_mixing(3), 100, 0.0).unwrap();
    let est = fastica(&ds.observed, 500, 1e-8).unwrap().demixing.apply(&ds.observed).unwrap();
    let score = score_sources(&ds.sources, &est).unwrap().matched_mean;
    assert!(score > 99.0, "{score}");
}

#[test]
fn mixing_is_deterministic_and_invertible() {
    let a: MixingModel = make_mixing(4, 4, 1007).unwrap();
    let b: MixingModel = make_mixing(4, 4, 1007).unwrap();
    assert_eq!(a.stack, b.stack);
    assert_eq!(a.report, b.report);
    assert!(a.report.residual_fraction >= 0.05);
    assert!(a.report.min_logdet >= -4.0 && a.report.max_logdet <= 4.0);
    let s = gen_structural::<f64>(&StructuralSpec::with_seed(7)).unwrap();
    let x = a.mix(&s).unwrap();
    assert!(a.unmix(&x).unwrap().max_abs_diff(&s).unwrap() < 1e-8);
}

#[test]
fn dataset_split_and_csv_round_trip() {
    let s = gen_structural::<f64>(&StructuralSpec { length: 1000, ..StructuralSpec::default() }).unwrap();
    let m: MixingModel = make_mixing(4, 3, 3).unwrap();
    let ds = Dataset::build(&s, &m, 100, 0.25).unwrap();
    assert_eq!(ds.boundary, 750);
    assert_eq!(ds.eval_range(), 750..1000);
    assert_eq!(ds.train_windows().len(), 7);
    assert!(ds.window_ranges().iter().all(|r| r.end <= ds.boundary));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.csv");
    ds.write_csv(&path).unwrap();
    let (src, obs) = read_csv::<f64>(&path).unwrap();
    assert_eq!(src, ds.sources);
    assert_eq!(obs, ds.observed);
}

#[test]
fn window_larger_than_training_region_is_refused() {
    let s = gen_structural::<f64>(&StructuralSpec { length: 256, ..StructuralSpec::default() }).unwrap();
    let m: MixingModel = make_mixing(4, 2, 0).unwrap();
    assert!(Dataset::build(&s, &m, 256, 0.25).is_err());
}
