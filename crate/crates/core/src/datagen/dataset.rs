//! Sources, their mixture and the train/evaluation split.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ad::Series;
use crate::datagen::mixing::MixingModel;
use crate::datagen::standardize;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    /// Standardized ground truth.
    pub sources: Series<T>,
    /// `mix(sources)`.
    pub observed: Series<T>,
    /// First index of the held-out region; equals the length when unsplit.
    pub boundary: usize,
    pub window: usize,
    /// Statistics the raw sources were standardized with.
    pub source_mean: Vec<T>,
    pub source_std: Vec<T>,
}

/// Sidecar description of an exported dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub experiment: String,
    pub seed: u64,
    pub length: usize,
    pub dim: usize,
    pub boundary: usize,
    pub window: usize,
    pub mixing_seed: u64,
    pub mixing_checkpoint: Option<String>,
    pub csv: String,
    pub source_mean: Vec<f64>,
    pub source_std: Vec<f64>,
}

impl<T: Real> Dataset<T> {
    /// Standardizes `sources`, mixes them and records the split.
    ///
    /// `boundary = round((1 - test_fraction) * T)`; `test_fraction = 0`
    /// keeps the whole series for both training and evaluation.
    pub fn build(sources: &Series<T>, mixing: &MixingModel<T>, window: usize, test_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::contract(format!("test_fraction must be in [0, 1), got {test_fraction}")));
        }
        if sources.cols() != mixing.dim() {
            return Err(Error::Shape {
                op: "build_dataset",
                lhs: (sources.rows(), mixing.dim()),
                rhs: sources.shape(),
            });
        }
        let t = sources.rows();
        let boundary = ((1.0 - test_fraction) * t as f64).round() as usize;
        if window == 0 || window > boundary {
            return Err(Error::contract(format!(
                "window {window} does not fit the {boundary}-step training region"
            )));
        }
        let (sources, source_mean, source_std) = standardize(sources)?;
        let observed = mixing.mix(&sources)?;
        Ok(Self {
            sources,
            observed,
            boundary,
            window,
            source_mean,
            source_std,
        })
    }

    pub fn len(&self) -> usize {
        self.sources.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.sources.cols()
    }

    pub fn is_split(&self) -> bool {
        self.boundary < self.len()
    }

    /// Row ranges of the non-overlapping training windows.
    pub fn window_ranges(&self) -> Vec<Range<usize>> {
        (0..self.boundary / self.window)
            .map(|k| k * self.window..(k + 1) * self.window)
            .collect()
    }

    pub fn train_windows(&self) -> Vec<Series<T>> {
        self.window_ranges()
            .into_iter()
            .map(|r| self.observed.slice_rows(r.start, r.end))
            .collect()
    }

    pub fn train_range(&self) -> Range<usize> {
        0..self.boundary
    }

    /// Held-out rows, or the whole series when unsplit.
    pub fn eval_range(&self) -> Range<usize> {
        if self.is_split() {
            self.boundary..self.len()
        } else {
            0..self.len()
        }
    }

    pub fn observed_in(&self, r: Range<usize>) -> Series<T> {
        self.observed.slice_rows(r.start, r.end)
    }

    pub fn sources_in(&self, r: Range<usize>) -> Series<T> {
        self.sources.slice_rows(r.start, r.end)
    }

    /// `t,src_1..src_d,obs_1..obs_d`, values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("t");
        for prefix in ["src", "obs"] {
            for j in 1..=d {
                let _ = write!(out, ",{prefix}_{j}");
            }
        }
        out.push('\n');
        for t in 0..self.len() {
            let _ = write!(out, "{t}");
            for m in [&self.sources, &self.observed] {
                for &v in m.row(t) {
                    let _ = write!(out, ",{}", v.as_f64());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv().as_bytes())
    }
}

pub fn build_dataset<T: Real>(
    sources: &Series<T>,
    mixing: &MixingModel<T>,
    window: usize,
    test_fraction: f64,
) -> Result<Dataset<T>> {
    Dataset::build(sources, mixing, window, test_fraction)
}

/// Reads a `t,src_*,obs_*` file back into `(sources, observed)`.
pub fn read_csv<T: Real>(path: &Path) -> Result<(Series<T>, Series<T>)> {
    let bad = |reason: String| Error::Ingestion {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
    let d = header.iter().filter(|h| h.starts_with("src_")).count();
    if d == 0 || header.len() != 1 + 2 * d || header[0] != "t" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let (mut src, mut obs) = (Vec::new(), Vec::new());
    let mut rows = 0;
    for (no, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", no + 2)))?;
        if vals.len() != 2 * d {
            return Err(bad(format!("line {}: expected {} values", no + 2, 2 * d)));
        }
        src.extend(vals[..d].iter().map(|&v| T::lit(v)));
        obs.extend(vals[d..].iter().map(|&v| T::lit(v)));
        rows += 1;
    }
    Ok((Series::new(rows, d, src)?, Series::new(rows, d, obs)?))
}
