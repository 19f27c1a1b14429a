//! Ground-truth sources, nonlinear mixing and labeled datasets.

mod audio;
mod dataset;
mod mixing;
mod structural;

pub use audio::{load_audio, read_wav, synth_instruments, write_wav_i16, AudioSources, Instrument, WavData};
pub use dataset::{build_dataset, read_csv, Dataset, DatasetManifest};
pub use mixing::{affine_residual_fraction, make_mixing, make_mixing_with, ConditioningReport, MixingConfig, MixingModel};
pub use structural::{gen_structural, gen_structural_clean, StructuralSpec};

use crate::ad::Series;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-column mean and (population) standard deviation.
pub fn column_stats<T: Real>(x: &Series<T>) -> (Vec<T>, Vec<T>) {
    let n = T::lit(x.rows() as f64);
    let mean = x.col_means();
    let std = (0..x.cols())
        .map(|j| ((0..x.rows()).map(|i| (x.get(i, j) - mean[j]).powi(2)).sum::<T>() / n).sqrt())
        .collect();
    (mean, std)
}

/// Zero mean, unit variance per column. Fails on a constant column.
pub fn standardize<T: Real>(x: &Series<T>) -> Result<(Series<T>, Vec<T>, Vec<T>)> {
    if x.rows() < 2 {
        return Err(Error::contract("standardize needs at least two rows"));
    }
    let (mean, std) = column_stats(x);
    if let Some(j) = std.iter().position(|&s| !(s > T::zero())) {
        return Err(Error::Degenerate(format!(
            "channel {j} has zero variance and cannot be standardized"
        )));
    }
    let z = Series::from_fn(x.rows(), x.cols(), |i, j| (x.get(i, j) - mean[j]) / std[j]);
    Ok((z, mean, std))
}
