//! Experiment specifications and their expansion into run configurations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::intervals::{g_width, gamma};
use crate::engine::{Mode, RunConfig};
use crate::error::{invalid, Error, Result};
use crate::formula::{Quantity, Vars};
use crate::model::ShiftSchedule;
use crate::rng::derive_seed;
use crate::schemes::SchemeSpec;

fn one() -> Vec<Quantity> {
    vec![Quantity::Value(1.0)]
}

fn zero() -> Vec<Quantity> {
    vec![Quantity::Value(0.0)]
}

/// A parameter grid with replication count and censoring cap.
///
/// Formulas may use `n`, the config constants (`c` defaults to 1), and, once
/// resolved, `sigma`, `gamma`, `G` and `lambda`. Logarithms are base 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub n: Vec<usize>,
    pub sigma: Vec<Quantity>,
    #[serde(default = "one")]
    pub lambda: Vec<Quantity>,
    pub schemes: Vec<SchemeSpec>,
    #[serde(default = "zero")]
    pub epsilon: Vec<Quantity>,
    pub replications: u64,
    pub max_generations: Quantity,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub record_traces: bool,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn base_vars(&self, n: usize) -> Vars {
        let mut vars = Vars::new().with("c", 1.0);
        for (k, v) in &self.constants {
            vars.set(k, *v);
        }
        vars.set("n", n as f64);
        vars
    }
}

/// One resolved grid point.
#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    pub experiment: String,
    pub n: usize,
    pub sigma: f64,
    pub lambda: usize,
    pub scheme: String,
    pub epsilon: f64,
    pub replications: u64,
    pub config: RunConfig,
}

impl Cell {
    pub fn describe(&self) -> String {
        format!(
            "n={} sigma={} lambda={} scheme={} epsilon={}",
            self.n, self.sigma, self.lambda, self.scheme, self.epsilon
        )
    }
}

fn in_cell(ctx: &str, e: Error) -> Error {
    invalid(format!("cell {ctx}: {e}"))
}

/// Expands the grid `n x sigma x lambda x scheme x epsilon` in that nesting
/// order. Cell `k` gets seed `derive_seed(base_seed, k)`; its replications
/// are distinguished by replication index.
pub fn resolve(spec: &ExperimentSpec) -> Result<Vec<Cell>> {
    for (field, empty) in [
        ("n", spec.n.is_empty()),
        ("sigma", spec.sigma.is_empty()),
        ("lambda", spec.lambda.is_empty()),
        ("schemes", spec.schemes.is_empty()),
        ("epsilon", spec.epsilon.is_empty()),
    ] {
        if empty {
            return Err(invalid(format!("experiment {:?}: grid is empty: no values for {field}", spec.name)));
        }
    }
    if spec.replications == 0 {
        return Err(invalid(format!("experiment {:?}: replications must be at least 1", spec.name)));
    }
    let mut cells = Vec::new();
    for &n in &spec.n {
        if n == 0 {
            return Err(invalid("cell n=0: problem size must be positive"));
        }
        for sigma_q in &spec.sigma {
            let mut vars = spec.base_vars(n);
            let ctx = format!("n={n} sigma={sigma_q}");
            let sigma = sigma_q.eval(&vars).map_err(|e| in_cell(&ctx, e))?;
            let schedule = ShiftSchedule::fixed(sigma).map_err(|e| in_cell(&ctx, e))?;
            vars.set("sigma", sigma);
            if n >= 2 {
                vars.set("gamma", gamma(n as f64, sigma));
                vars.set("G", g_width(n as f64, sigma));
            }
            for lambda_q in &spec.lambda {
                let ctx = format!("{ctx} lambda={lambda_q}");
                let lambda = lambda_q.eval_count(&vars).map_err(|e| in_cell(&ctx, e))? as usize;
                let mut vars = vars.clone();
                vars.set("lambda", lambda as f64);
                let cap = spec.max_generations.eval_count(&vars).map_err(|e| in_cell(&ctx, e))?;
                for scheme_spec in &spec.schemes {
                    let label = scheme_spec.to_string();
                    let ctx = format!("{ctx} scheme={label}");
                    let scheme = scheme_spec.resolve(&vars).map_err(|e| in_cell(&ctx, e))?;
                    for eps_q in &spec.epsilon {
                        let ctx = format!("{ctx} epsilon={eps_q}");
                        let epsilon = eps_q.eval(&vars).map_err(|e| in_cell(&ctx, e))?;
                        let index = cells.len();
                        let config = RunConfig::new(
                            n,
                            lambda,
                            scheme.clone(),
                            schedule.clone(),
                            cap,
                            derive_seed(spec.base_seed, index as u64),
                        )
                        .with_epsilon(epsilon)
                        .with_mode(spec.mode)
                        .with_traces(spec.record_traces);
                        config.validate().map_err(|e| in_cell(&ctx, e))?;
                        cells.push(Cell {
                            index,
                            experiment: spec.name.clone(),
                            n,
                            sigma,
                            lambda,
                            scheme: label.clone(),
                            epsilon,
                            replications: spec.replications,
                            config,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}
