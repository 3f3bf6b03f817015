//! Config-driven experiments: grid resolution, parallel execution,
//! aggregation, persistence and reports.

pub mod aggregate;
pub mod execute;
pub mod io;
pub mod presets;
pub mod report;
pub mod spec;

pub use aggregate::{aggregate, Aggregate};
pub use execute::{execute, rows_of, CellResult};
pub use io::ResultRow;
pub use presets::{preset, PRESETS};
pub use spec::{resolve, Cell, ExperimentSpec};
