//! Parallel execution of resolved cells.

use std::path::Path;

use rayon::prelude::*;

use super::io::{rows_to_csv, write_atomic, ResultRow};
use super::spec::Cell;
use crate::engine::{RunRecord, Simulator};
use crate::error::{invalid, Error, Result};

/// Records of one cell, indexed by replication.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub records: Vec<RunRecord>,
}

impl CellResult {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.records
            .iter()
            .enumerate()
            .map(|(rep, rec)| ResultRow::new(&self.cell, rep as u64, rec))
            .collect()
    }
}

pub fn rows_of(results: &[CellResult]) -> Vec<ResultRow> {
    results.iter().flat_map(CellResult::rows).collect()
}

/// Runs every replication of every cell on `parallelism` worker threads.
/// Output does not depend on `parallelism`. If `checkpoint` is given, the
/// results of all completed cells are rewritten there after each cell.
/// `on_cell` is called once per finished cell, in grid order.
pub fn execute(
    cells: &[Cell],
    parallelism: usize,
    checkpoint: Option<&Path>,
    mut on_cell: impl FnMut(&CellResult),
) -> Result<Vec<CellResult>> {
    if cells.is_empty() {
        return Err(invalid("nothing to execute: no cells"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    let mut out: Vec<CellResult> = Vec::with_capacity(cells.len());
    for cell in cells {
        let sim = Simulator::new(cell.config.clone())?;
        let records: Vec<RunRecord> = pool.install(|| {
            (0..cell.replications)
                .into_par_iter()
                .map(|rep| sim.run_replication(rep))
                .collect()
        });
        out.push(CellResult {
            cell: cell.clone(),
            records,
        });
        on_cell(out.last().expect("just pushed"));
        if let Some(path) = checkpoint {
            write_atomic(path, &rows_to_csv(&rows_of(&out))?)?;
        }
    }
    Ok(out)
}
