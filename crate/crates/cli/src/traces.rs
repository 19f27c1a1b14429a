//! Long-format source traces for plotting truth against both flow variants.

use std::fmt::Write as _;

use slowflow::datagen::standardize;
use slowflow::ica::mean_squared_increments;
use slowflow::Series;

use crate::error::CliError;

pub const PANELS: [&str; 3] = ["truth", "fbm", "slowfbm"];

/// Channel indices sorted by mean squared increment after standardizing.
pub fn slowness_order(x: &Series) -> Result<Vec<usize>, CliError> {
    let (z, _, _) = standardize(x)?;
    let msi = mean_squared_increments(&z);
    let mut idx: Vec<usize> = (0..msi.len()).collect();
    idx.sort_by(|&a, &b| msi[a].total_cmp(&msi[b]).then(a.cmp(&b)));
    Ok(idx)
}

/// `t,channel,which,value` rows: truth as given, estimates standardized.
/// Channels are numbered from 1 in order of increasing roughness within
/// each panel; `t0` is the absolute index of the first row.
pub fn traces_csv(truth: &Series, fbm: &Series, slow: &Series, t0: usize) -> Result<String, CliError> {
    if truth.shape() != fbm.shape() || truth.shape() != slow.shape() {
        return Err(CliError::Failed(format!(
            "trace panels disagree in shape: {:?} {:?} {:?}",
            truth.shape(),
            fbm.shape(),
            slow.shape()
        )));
    }
    let mut out = String::from("t,channel,which,value\n");
    for (which, x, rescale) in [(PANELS[0], truth, false), (PANELS[1], fbm, true), (PANELS[2], slow, true)] {
        let order = slowness_order(x)?;
        let values = if rescale { standardize(x)?.0 } else { x.clone() };
        for (rank, &j) in order.iter().enumerate() {
            for t in 0..x.rows() {
                let _ = writeln!(out, "{},{},{which},{}", t0 + t, rank + 1, values.get(t, j));
            }
        }
    }
    Ok(out)
}
