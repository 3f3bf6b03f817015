//! Evolutionary algorithms on dynamic bit-string problems whose optimum
//! drifts by a bitwise random walk.
//!
//! * [`model`]: genomes, Hamming geometry, the shifting optimum and BitMatching.
//! * [`schemes`]: mutation-rate schemes (fixed, banded, capped, oracle-greedy).
//! * [`engine`]: the (1+1) and (1+lambda) EA in genome or count space.
//! * [`analysis`]: exact kernels, hitting-time solve, intervals, drift.
//! * [`harness`]: config-driven sweeps, aggregation and reports.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod formula;
pub mod harness;
pub mod model;
pub mod rng;
pub mod schemes;
pub mod stats;

pub use engine::{run, Mode, RunConfig, RunRecord, Simulator};
pub use error::{Error, Result};
pub use model::{hamming, BitMatching, CountState, Genome, Objective, ProblemState, ShiftSchedule};
pub use schemes::{BandPolicy, MutationScheme, SchemeSpec};
