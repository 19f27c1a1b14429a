//! Score and summary tables.

use std::fmt::Write as _;

use slowflow::eval::{aggregate, AggregateScore, Method};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreRow {
    pub method: Method,
    pub seed: u64,
    pub matched_mean: f64,
}

/// `method,seed,matched_mean`, rows in the given order.
pub fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from("method,seed,matched_mean\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.4}", r.method, r.seed, r.matched_mean);
    }
    out
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRow>, CliError> {
    let bad = |line: &str| CliError::Failed(format!("bad score row `{line}`"));
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad(line));
            }
            Ok(ScoreRow {
                method: f[0].parse().map_err(|_| bad(line))?,
                seed: f[1].parse().map_err(|_| bad(line))?,
                matched_mean: f[2].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

/// Mean and sample std per method, in canonical method order.
pub fn summarize(rows: &[ScoreRow]) -> Result<Vec<AggregateScore>, CliError> {
    Method::ALL
        .iter()
        .filter_map(|&m| {
            let runs: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.matched_mean).collect();
            (!runs.is_empty()).then(|| aggregate(&runs, m.label()).map_err(CliError::from))
        })
        .collect()
}

/// `method,mean,std,n`; `std` is empty for a single seed.
pub fn summary_csv(aggs: &[AggregateScore]) -> String {
    let mut out = String::from("method,mean,std,n\n");
    for a in aggs {
        let std = a.std.map(|s| format!("{s:.4}")).unwrap_or_default();
        let _ = writeln!(out, "{},{:.4},{std},{}", a.method, a.mean, a.n_seeds);
    }
    out
}

/// Looks up a method's seed-mean score in summary rows.
pub fn mean_of(aggs: &[AggregateScore], m: Method) -> Option<f64> {
    aggs.iter().find(|a| a.method == m.label()).map(|a| a.mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables() {
        let rows = vec![
            ScoreRow { method: Method::SlowFbmIca, seed: 0, matched_mean: 90.0 },
            ScoreRow { method: Method::Ica, seed: 0, matched_mean: 50.0 },
            ScoreRow { method: Method::SlowFbmIca, seed: 1, matched_mean: 100.0 },
        ];
        let text = scores_csv(&rows);
        assert_eq!(parse_scores_csv(&text).unwrap(), rows);
        let s = summary_csv(&summarize(&rows).unwrap());
        assert_eq!(s, "method,mean,std,n\nICA,50.0000,,1\nS-FBM+ICA,95.0000,7.0711,2\n");
    }
}
