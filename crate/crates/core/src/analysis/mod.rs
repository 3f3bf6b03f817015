//! Exact kernels, the absorbing-chain hitting-time solve, interval
//! decomposition and drift estimation.

pub mod chain;
pub mod drift;
pub mod intervals;
pub mod kernel;

pub use chain::{exact_mean_fht, FhtSolution, MAX_EXACT_N};
pub use drift::{estimate_drift, exact_drift, DriftEstimate};
pub use intervals::{decompose, FirstLevel, IntervalDecomposition, IntervalLabel, SecondLevel};
pub use kernel::{composed_step_kernel, composite_rate, mutate_kernel, shift_kernel, KernelKind, TransitionKernel};
