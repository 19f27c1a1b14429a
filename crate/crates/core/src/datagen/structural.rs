//! Trend, seasonality and two asynchronous cycles.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::ad::Series;
use crate::datagen::standardize;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameters of the four structural components.
///
/// Columns are `trend, season, cycle_1, cycle_2`. `None` fields scale with
/// `length`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuralSpec {
    pub length: usize,
    /// Range of the quadratic coefficient relative to a unit linear slope.
    pub trend_curvature: (f64, f64),
    /// Season period in samples; defaults to `length / 16`.
    pub season_period: Option<f64>,
    /// Period range in samples for each cycle. Disjoint bands, both away
    /// from the season period, keep the cycles asynchronous.
    pub cycle_periods: [(f64, f64); 2],
    /// Mean samples between frequency changes; defaults to `length / 6`.
    pub cycle_mean_segment: Option<f64>,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for StructuralSpec {
    fn default() -> Self {
        Self {
            length: 4096,
            trend_curvature: (0.06, 0.3),
            season_period: None,
            cycle_periods: [(60.0, 110.0), (130.0, 220.0)],
            cycle_mean_segment: None,
            noise_std: 0.2,
            seed: 0,
        }
    }
}

impl StructuralSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn season(&self) -> f64 {
        self.season_period.unwrap_or(self.length as f64 / 16.0)
    }

    fn mean_segment(&self) -> f64 {
        self.cycle_mean_segment.unwrap_or(self.length as f64 / 6.0)
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.length < 64 {
            return Err(Error::contract(format!("structural series needs length >= 64, got {}", self.length)));
        }
        if !positive(self.mean_segment()) {
            return Err(Error::contract("cycle segments must have positive length"));
        }
        for &(lo, hi) in &self.cycle_periods {
            if !(positive(lo) && positive(hi) && lo <= hi) {
                return Err(Error::contract(format!("bad cycle period range {:?}", (lo, hi))));
            }
        }
        if !positive(self.season()) {
            return Err(Error::contract("season period must be positive"));
        }
        let (a, b) = self.trend_curvature;
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
            return Err(Error::contract(format!("bad trend curvature range {:?}", self.trend_curvature)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::contract("noise_std must be finite and non-negative"));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Sinusoid whose frequency is redrawn at Poisson-spaced change points.
/// Phase stays continuous across changes.
fn cycle(spec: &StructuralSpec, (lo, hi): (f64, f64), rng: &mut impl Rng) -> Vec<f64> {
    let freq = Uniform::new_inclusive(1.0 / hi, 1.0 / lo);
    let gap = Exp::new(1.0 / spec.mean_segment()).expect("validated rate");
    let mut phase = rng.gen_range(0.0..TAU);
    let mut f = freq.sample(rng);
    let mut next = gap.sample(rng);
    (0..spec.length)
        .map(|t| {
            while t as f64 >= next {
                f = freq.sample(rng);
                next += gap.sample(rng);
            }
            phase += TAU * f;
            phase.sin()
        })
        .collect()
}

/// Standardized noise-free components, `length x 4`.
pub fn gen_structural_clean<T: Real>(spec: &StructuralSpec) -> Result<Series<T>> {
    spec.validate()?;
    let n = spec.length;
    let mut rng = stream(spec.seed, 0);

    let (a, b) = spec.trend_curvature;
    let c2 = if a < b { rng.gen_range(a..b) } else { a };
    let season_phase = rng.gen_range(0.0..TAU);
    let period = spec.season();

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(4);
    cols.push(
        (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                t + c2 * t * t
            })
            .collect(),
    );
    cols.push((0..n).map(|i| (TAU * i as f64 / period + season_phase).sin()).collect());
    cols.push(cycle(spec, spec.cycle_periods[0], &mut stream(spec.seed, 1)));
    cols.push(cycle(spec, spec.cycle_periods[1], &mut stream(spec.seed, 2)));

    let raw = Series::from_fn(n, 4, |i, j| cols[j][i]);
    Ok(standardize(&raw)?.0.cast())
}

/// Standardized components plus i.i.d. `N(0, noise_std^2)` noise.
pub fn gen_structural<T: Real>(spec: &StructuralSpec) -> Result<Series<T>> {
    let clean = gen_structural_clean::<f64>(spec)?;
    let noise = Normal::new(0.0, spec.noise_std).expect("validated std");
    let mut rng = stream(spec.seed, 3);
    let mut noisy = clean;
    for v in noisy.as_mut_slice() {
        *v += noise.sample(&mut rng);
    }
    Ok(noisy.cast())
}
