//! Censoring-aware per-cell statistics.

use serde::{Deserialize, Serialize};

use super::io::ResultRow;
use crate::stats::{clopper_pearson, median, normal_quantile};

/// Statistics of one cell. Generation and evaluation means are taken over
/// uncensored runs only; `conditional` flags cells where that excludes runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub experiment: String,
    pub n: usize,
    pub sigma: f64,
    pub lambda: usize,
    pub scheme: String,
    pub epsilon: f64,
    pub runs: u64,
    pub hits: u64,
    pub censored: u64,
    pub censor_fraction: f64,
    pub censor_ci_low: f64,
    pub censor_ci_high: f64,
    pub conditional: bool,
    pub mean_generations: Option<f64>,
    pub se_generations: Option<f64>,
    pub ci95_generations: Option<f64>,
    pub median_generations: Option<f64>,
    pub mean_evaluations: Option<f64>,
    pub eps_hits: u64,
    pub eps_censor_fraction: f64,
    pub mean_eps_generations: Option<f64>,
}

/// Exact mean and standard error from integer sums, independent of order.
fn moments(values: &[u64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let k = values.len() as u128;
    let sum: u128 = values.iter().map(|&v| v as u128).sum();
    let sum_sq: u128 = values.iter().map(|&v| (v as u128) * (v as u128)).sum();
    let mean = sum as f64 / k as f64;
    let se = if k > 1 {
        // k * sum_sq - sum^2 is exact in integers
        let ss = (k * sum_sq - sum * sum) as f64 / k as f64;
        Some((ss / (k - 1) as f64 / k as f64).sqrt())
    } else {
        Some(0.0)
    };
    (Some(mean), se)
}

fn same_cell(a: &ResultRow, b: &ResultRow) -> bool {
    a.experiment == b.experiment
        && a.n == b.n
        && a.sigma.to_bits() == b.sigma.to_bits()
        && a.lambda == b.lambda
        && a.scheme == b.scheme
        && a.epsilon.to_bits() == b.epsilon.to_bits()
}

/// Groups rows by cell (first-appearance order) and summarises each group.
pub fn aggregate(rows: &[ResultRow]) -> Vec<Aggregate> {
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| same_cell(g[0], r)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups.into_iter().map(|g| summarise(&g)).collect()
}

fn summarise(rows: &[&ResultRow]) -> Aggregate {
    let first = rows[0];
    let runs = rows.len() as u64;
    let hit_rows: Vec<&&ResultRow> = rows.iter().filter(|r| !r.is_censored()).collect();
    let hits = hit_rows.len() as u64;
    let censored = runs - hits;
    let gens: Vec<u64> = hit_rows.iter().map(|r| r.hit_generation).collect();
    let evals: Vec<u64> = hit_rows.iter().map(|r| r.evaluations).collect();
    let eps: Vec<u64> = rows
        .iter()
        .filter(|r| !r.is_eps_censored())
        .map(|r| r.eps_hit_generation)
        .collect();
    let (mean_generations, se_generations) = moments(&gens);
    let (ci_lo, ci_hi) = clopper_pearson(censored, runs, 0.95);
    let z = normal_quantile(0.975);
    Aggregate {
        experiment: first.experiment.clone(),
        n: first.n,
        sigma: first.sigma,
        lambda: first.lambda,
        scheme: first.scheme.clone(),
        epsilon: first.epsilon,
        runs,
        hits,
        censored,
        censor_fraction: censored as f64 / runs as f64,
        censor_ci_low: ci_lo,
        censor_ci_high: ci_hi,
        conditional: censored > 0,
        mean_generations,
        se_generations,
        ci95_generations: se_generations.map(|se| z * se),
        median_generations: median(&gens.iter().map(|&g| g as f64).collect::<Vec<_>>()),
        mean_evaluations: moments(&evals).0,
        eps_hits: eps.len() as u64,
        eps_censor_fraction: (runs - eps.len() as u64) as f64 / runs as f64,
        mean_eps_generations: moments(&eps).0,
    }
}
