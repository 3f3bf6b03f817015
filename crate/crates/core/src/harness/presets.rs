//! Pre-wired regime scans.

use std::collections::BTreeMap;

use super::spec::ExperimentSpec;
use crate::engine::Mode;
use crate::error::{invalid, Result};
use crate::formula::Quantity;
use crate::schemes::{BandPolicy, SchemeSpec};

pub const PRESETS: [&str; 4] = ["droste-easy", "one-one-hard", "one-lambda-easy", "one-lambda-hard"];

fn q(s: &str) -> Quantity {
    Quantity::from(s)
}

fn fixed(p: &str) -> SchemeSpec {
    SchemeSpec::Fixed { p: q(p) }
}

fn banded(lo: &str, hi: &str) -> SchemeSpec {
    SchemeSpec::Banded {
        lo: q(lo),
        hi: q(hi),
        policy: BandPolicy::Cycle,
        levels: None,
    }
}

fn oracle(menu: &[&str]) -> SchemeSpec {
    SchemeSpec::OracleGreedy {
        menu: menu.iter().map(|m| q(m)).collect(),
    }
}

fn base(name: &str, n: &[usize], sigma: &str, lambda: &str) -> ExperimentSpec {
    ExperimentSpec {
        name: name.to_string(),
        n: n.to_vec(),
        sigma: vec![q(sigma)],
        lambda: vec![q(lambda)],
        schemes: Vec::new(),
        epsilon: vec![Quantity::Value(0.0)],
        replications: 1,
        max_generations: q("n^3"),
        base_seed: 0,
        constants: BTreeMap::new(),
        mode: Mode::Count,
        record_traces: false,
    }
}

/// The named preset.
///
/// * `droste-easy`: (1+1) EA, rate `1/n`, `sigma = log n / (5 n^2)`.
/// * `one-one-hard`: (1+1) EA, `sigma = log^2 n / n^2`, three schemes,
///   approximation target `1 - G/n`.
/// * `one-lambda-easy`: `lambda = n^2 log n`, banded `[1/n, log n / n]`,
///   `sigma = 1/(5n)`.
/// * `one-lambda-hard`: `lambda = n`, `sigma = min(1/2, log^2 n / n)`.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let spec = match name {
        "droste-easy" => ExperimentSpec {
            schemes: vec![fixed("1/n")],
            replications: 200,
            max_generations: Quantity::Value(1e6),
            base_seed: 0xd505,
            ..base(name, &[16, 32, 64, 128], "log(n)/(5n^2)", "1")
        },
        "one-one-hard" => ExperimentSpec {
            schemes: vec![
                fixed("1/n"),
                banded("1/n", "log(n)/n"),
                oracle(&["1/n", "2/n", "log(n)/n", "1/2", "1-1/log(n)"]),
            ],
            epsilon: vec![q("G/n")],
            replications: 100,
            base_seed: 0x0110,
            ..base(name, &[64, 128, 256], "log(n)^2/n^2", "1")
        },
        "one-lambda-easy" => ExperimentSpec {
            schemes: vec![banded("1/n", "log(n)/n")],
            replications: 1000,
            base_seed: 0x1a4e,
            ..base(name, &[16], "1/(5n)", "n^2*log(n)")
        },
        "one-lambda-hard" => ExperimentSpec {
            schemes: vec![
                banded("1/n", "log(n)/n"),
                oracle(&["1/n", "log(n)/n", "1/2", "1-1/log(n)", "1"]),
            ],
            replications: 50,
            base_seed: 0x1a4d,
            ..base(name, &[64, 128], "min(1/2, log(n)^2/n)", "n")
        },
        other => {
            return Err(invalid(format!(
                "unknown preset {other:?} (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(spec)
}
