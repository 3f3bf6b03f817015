//! Plot-ready long-format tables and a plain-text regime summary.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::aggregate::{aggregate, Aggregate};
use super::io::{read_aggregates_json, read_rows, AGGREGATES_JSON, RESULTS_FILE};
use crate::error::{invalid, Result};
use crate::stats::log_log_slope;

/// One point of a long-format series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRow {
    pub experiment: String,
    pub x_name: &'static str,
    pub x: f64,
    pub metric: &'static str,
    pub y: f64,
    pub series: String,
}

/// Loads aggregates from a results directory, preferring `aggregates.json`
/// and falling back to recomputing them from `results.csv`.
pub fn load_aggregates(dir: &Path) -> Result<Vec<Aggregate>> {
    let json = dir.join(AGGREGATES_JSON);
    let csv = dir.join(RESULTS_FILE);
    let aggs = if json.is_file() {
        read_aggregates_json(&json)?
    } else if csv.is_file() {
        aggregate(&read_rows(&csv)?)
    } else {
        return Err(invalid(format!(
            "no results in {}: expected {AGGREGATES_JSON} or {RESULTS_FILE}",
            dir.display()
        )));
    };
    if aggs.is_empty() {
        return Err(invalid(format!("results in {} are empty", dir.display())));
    }
    Ok(aggs)
}

/// Series key: the scheme label.
fn series_of(a: &Aggregate) -> String {
    a.scheme.clone()
}

fn varies<T: PartialEq>(aggs: &[Aggregate], f: impl Fn(&Aggregate) -> T) -> bool {
    aggs.windows(2).any(|w| f(&w[0]) != f(&w[1]))
}

/// Long-format rows: `x` is `n` if it varies, else `sigma`; metrics are
/// conditional mean generations, mean evaluations and censor fraction.
pub fn long_rows(aggs: &[Aggregate]) -> Vec<LongRow> {
    let by_n = varies(aggs, |a| a.n) || !varies(aggs, |a| a.sigma.to_bits());
    let mut out = Vec::new();
    for a in aggs {
        let (x_name, x) = if by_n { ("n", a.n as f64) } else { ("sigma", a.sigma) };
        let mut push = |metric: &'static str, y: Option<f64>| {
            if let Some(y) = y {
                out.push(LongRow {
                    experiment: a.experiment.clone(),
                    x_name,
                    x,
                    metric,
                    y,
                    series: series_of(a),
                });
            }
        };
        push("mean_generations", a.mean_generations);
        push("mean_evaluations", a.mean_evaluations);
        push("censor_fraction", Some(a.censor_fraction));
        push("eps_censor_fraction", Some(a.eps_censor_fraction));
    }
    out
}

pub fn long_rows_csv(rows: &[LongRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Text table per series with a log-log slope of mean generations against
/// `n` wherever at least two sizes have uncensored means.
pub fn summary_table(aggs: &[Aggregate]) -> String {
    let mut series: Vec<String> = Vec::new();
    for a in aggs {
        let s = series_of(a);
        if !series.contains(&s) {
            series.push(s);
        }
    }
    let mut out = String::new();
    for s in &series {
        let rows: Vec<&Aggregate> = aggs.iter().filter(|a| &series_of(a) == s).collect();
        let _ = writeln!(out, "experiment {}  scheme {}", rows[0].experiment, s);
        let _ = writeln!(
            out,
            "{:>6} {:>12} {:>8} {:>10} {:>6} {:>9} {:>14} {:>14} {:>9}",
            "n", "sigma", "lambda", "epsilon", "runs", "censored", "mean_gens", "mean_evals", "eps_cens"
        );
        for a in &rows {
            let _ = writeln!(
                out,
                "{:>6} {:>12.6e} {:>8} {:>10.4} {:>6} {:>9.4} {:>14} {:>14} {:>9.4}",
                a.n,
                a.sigma,
                a.lambda,
                a.epsilon,
                a.runs,
                a.censor_fraction,
                opt(a.mean_generations),
                opt(a.mean_evaluations),
                a.eps_censor_fraction
            );
        }
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|a| a.mean_generations.filter(|m| *m > 0.0).map(|m| (a.n as f64, m)))
            .collect();
        let distinct_n = pts.windows(2).any(|w| w[0].0 != w[1].0);
        if pts.len() >= 2 && distinct_n {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            if let Some(slope) = log_log_slope(&xs, &ys) {
                let _ = writeln!(out, "log-log slope of mean generations vs n: {slope:.4}");
            }
        }
        out.push('\n');
    }
    out
}
