//! One-step drift of the population's distance to the moving optimum.
//!
//! With `D` the smallest Hamming distance between the population and the
//! optimum, the drift at state `i` is `E[D_before - D_after | N = i]`, which
//! for BitMatching equals `E[N_next] - i`: a parent with exactly `i` matching
//! bits goes through one shift and one round of offspring.

use serde::Serialize;

use super::kernel::{check_composed_inputs, composed_step_kernel, group_rates};
use crate::engine::count::CountSampler;
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, Role, RunStreams};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub state: usize,
    pub samples: usize,
    pub mean: f64,
    pub std_error: f64,
}

impl DriftEstimate {
    /// One-sided lower confidence limit at the given level, e.g. 0.99.
    pub fn lower_confidence(&self, level: f64) -> f64 {
        self.mean - stats::normal_quantile(level) * self.std_error
    }
}

fn check_states(n: usize, states: &[usize]) -> Result<()> {
    match states.iter().find(|&&i| i >= n) {
        Some(i) => Err(invalid(format!("drift state {i} outside [0, n - 1] for n = {n}"))),
        None => Ok(()),
    }
}

/// Monte Carlo drift at each state, `samples` one-step draws apiece, with one
/// offspring per entry of `rates`. Sample `s` of state `i` uses replication
/// `s` of the streams keyed by `derive_seed(seed, i)`.
pub fn estimate_drift(
    n: usize,
    sigma: f64,
    rates: &[f64],
    states: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<DriftEstimate>> {
    check_composed_inputs(n, sigma, rates)?;
    check_states(n, states)?;
    if samples == 0 {
        return Err(invalid("drift estimation needs at least one sample"));
    }
    let groups = group_rates(rates);
    // first offspring index of every group, as the engine keys its streams
    let firsts: Vec<u32> = groups
        .iter()
        .map(|&(p, _)| rates.iter().position(|&q| q.to_bits() == p.to_bits()).unwrap() as u32 + 1)
        .collect();
    let distinct: Vec<f64> = groups.iter().map(|&(p, _)| p).collect();
    let sampler = CountSampler::new(n, Some(sigma), &distinct);
    Ok(states
        .iter()
        .map(|&i| {
            let key = derive_seed(seed, i as u64);
            let draws: Vec<f64> = (0..samples as u64)
                .map(|s| {
                    let streams = RunStreams::new(key, s);
                    let j = sampler.shift(i, sigma, &mut streams.stream(1, Role::Shift));
                    let best = groups
                        .iter()
                        .zip(&firsts)
                        .map(|(&(p, k), &chi)| sampler.best_of(j, p, k, &mut streams.stream(1, Role::Mutation(chi))))
                        .max()
                        .unwrap_or(j);
                    j.max(best) as f64 - i as f64
                })
                .collect();
            let (mean, std_error) = stats::mean_se(&draws);
            DriftEstimate {
                state: i,
                samples,
                mean,
                std_error,
            }
        })
        .collect())
}

/// Exact drift `sum_m P(i -> m) (m - i)` from the composed kernel.
pub fn exact_drift(n: usize, sigma: f64, rates: &[f64], states: &[usize]) -> Result<Vec<f64>> {
    check_states(n, states)?;
    let k = composed_step_kernel(n, sigma, rates)?;
    Ok(states
        .iter()
        .map(|&i| (0..=n).map(|m| k.get(i, m) * (m as f64 - i as f64)).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_moves_without_flips() {
        let est = estimate_drift(10, 1e-12, &[0.0], &[0, 3, 9], 500, 1).unwrap();
        for e in est {
            assert_eq!(e.mean, 0.0);
        }
        for d in exact_drift(10, 1e-12, &[0.0], &[0, 3, 9]).unwrap() {
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let rates = [0.1, 0.3, 0.1];
        let states = [0, 2, 5, 8, 9];
        let exact = exact_drift(10, 0.05, &rates, &states).unwrap();
        let est = estimate_drift(10, 0.05, &rates, &states, 20_000, 5).unwrap();
        for (e, x) in est.iter().zip(&exact) {
            assert!((e.mean - x).abs() <= 3.5 * e.std_error + 1e-12, "{e:?} vs {x}");
        }
    }

    #[test]
    fn validation() {
        assert!(estimate_drift(8, 0.1, &[0.1], &[8], 10, 0).is_err());
        assert!(estimate_drift(8, 0.1, &[0.1], &[1], 0, 0).is_err());
        assert!(exact_drift(8, 0.7, &[0.1], &[1]).is_err());
    }
}
