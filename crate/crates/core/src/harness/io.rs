//! Flat-file persistence: per-run results CSV, aggregates CSV and JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::Aggregate;
use super::spec::Cell;
use crate::engine::RunRecord;
use crate::error::Result;

pub const RESULTS_FILE: &str = "results.csv";
pub const AGGREGATES_CSV: &str = "aggregates.csv";
pub const AGGREGATES_JSON: &str = "aggregates.json";

/// One row of `results.csv`. Censored runs report the cap as a lower bound
/// in `hit_generation` (and likewise for `eps_hit_generation`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub n: usize,
    pub sigma: f64,
    pub lambda: usize,
    pub scheme: String,
    pub epsilon: f64,
    pub replication: u64,
    pub seed: u64,
    pub hit_generation: u64,
    pub censored: u8,
    pub eps_hit_generation: u64,
    pub eps_censored: u8,
    pub evaluations: u64,
    pub final_matching: usize,
}

impl ResultRow {
    pub fn new(cell: &Cell, replication: u64, record: &RunRecord) -> Self {
        Self {
            experiment: cell.experiment.clone(),
            n: cell.n,
            sigma: cell.sigma,
            lambda: cell.lambda,
            scheme: cell.scheme.clone(),
            epsilon: cell.epsilon,
            replication,
            seed: cell.config.seed,
            hit_generation: record.hit_or_bound(),
            censored: u8::from(record.censored()),
            eps_hit_generation: record.eps_hit_or_bound(),
            eps_censored: u8::from(record.eps_hit_generation.is_none()),
            evaluations: record.evaluations,
            final_matching: record.final_matching,
        }
    }

    pub fn is_censored(&self) -> bool {
        self.censored != 0
    }

    pub fn is_eps_censored(&self) -> bool {
        self.eps_censored != 0
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// Writes `contents` to `path` through a temporary file and a rename, so a
/// crash never leaves a half-written file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    if rows.is_empty() {
        // header only
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "experiment",
            "n",
            "sigma",
            "lambda",
            "scheme",
            "epsilon",
            "replication",
            "seed",
            "hit_generation",
            "censored",
            "eps_hit_generation",
            "eps_censored",
            "evaluations",
            "final_matching",
        ])?;
        w.flush()?;
        drop(w);
        return Ok(buf);
    }
    write_rows(&mut buf, rows)?;
    Ok(buf)
}

pub fn aggregates_to_csv(aggs: &[Aggregate]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for a in aggs {
            w.serialize(a)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn aggregates_to_json(aggs: &[Aggregate]) -> Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(aggs)?;
    text.push(b'\n');
    Ok(text)
}

pub fn read_aggregates_json(path: &Path) -> Result<Vec<Aggregate>> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Writes `results.csv`, `aggregates.csv` and `aggregates.json` into `dir`.
pub fn write_outputs(dir: &Path, rows: &[ResultRow], aggs: &[Aggregate]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(RESULTS_FILE), &rows_to_csv(rows)?)?;
    write_atomic(&dir.join(AGGREGATES_CSV), &aggregates_to_csv(aggs)?)?;
    write_atomic(&dir.join(AGGREGATES_JSON), &aggregates_to_json(aggs)?)?;
    Ok(())
}
