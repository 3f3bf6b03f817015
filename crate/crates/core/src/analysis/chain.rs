//! Expected first hitting time from the absorbing generation chain.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::kernel::{check_composed_inputs, raw_flip_matrix, selection_matrix};
use crate::error::{invalid, Error, Result};

/// Largest problem size accepted by the dense solve.
pub const MAX_EXACT_N: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FhtSolution {
    pub n: usize,
    /// Expected number of further generations until the hit, indexed by the
    /// matching count at the end of a non-hitting generation. With parent
    /// hits counted, state `n` is absorbing and its entry is 0.
    pub per_state: Vec<f64>,
    /// Expected hitting generation from a uniformly random start.
    pub overall: f64,
    /// Probability that generation 0 already hits.
    pub hit_at_zero: f64,
    /// Distribution of the matching count after a non-hitting generation 0.
    pub initial: Vec<f64>,
}

impl FhtSolution {
    /// CSV with header `state,expected_generations,initial_probability`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "expected_generations", "initial_probability"])?;
        for (i, e) in self.per_state.iter().enumerate() {
            w.write_record([i.to_string(), format!("{e:e}"), format!("{:e}", self.initial[i])])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn binomial_half(n: usize) -> DVector<f64> {
    // Pascal's triangle scaled by 1/2 at every level keeps values exact-ish
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.0; row.len() + 1];
        for (k, v) in row.iter().enumerate() {
            next[k] += 0.5 * v;
            next[k + 1] += 0.5 * v;
        }
        row = next;
    }
    DVector::from_vec(row)
}

/// Mean first hitting time of the (1+lambda) EA on BitMatching with a fixed
/// shifting rate, one offspring per entry of `rates`.
///
/// A generation hits when the shifted parent or any offspring equals the
/// optimum. With `include_parent_hit = false` only offspring hits count, so a
/// parent that the shift happens to land on does not stop the chain.
/// Generation 0 has no shift and starts from a uniformly random parent.
pub fn exact_mean_fht(n: usize, sigma: f64, rates: &[f64], include_parent_hit: bool) -> Result<FhtSolution> {
    check_composed_inputs(n, sigma, rates)?;
    if n > MAX_EXACT_N {
        return Err(invalid(format!(
            "exact solve is limited to n <= {MAX_EXACT_N} (dense system), got n = {n}"
        )));
    }
    let shift = raw_flip_matrix(n, sigma);
    let select = selection_matrix(n, rates, include_parent_hit);
    let start = binomial_half(n);
    // row vector of the state after generation 0
    let after_zero = select.transpose() * &start;
    let step = shift * &select;

    let transient = if include_parent_hit { n } else { n + 1 };
    let q = step.view((0, 0), (transient, transient)).into_owned();
    let system = DMatrix::identity(transient, transient) - q;
    let ones = DVector::from_element(transient, 1.0);
    let expected = system
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::Numeric("singular absorbing system: the optimum is unreachable".into()))?;
    if expected.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::Numeric("absorbing system solved to a non-finite or negative time".into()));
    }

    let mut per_state: Vec<f64> = expected.iter().copied().collect();
    let mut initial: Vec<f64> = after_zero.iter().copied().collect();
    let hit_at_zero;
    if include_parent_hit {
        per_state.push(0.0);
        hit_at_zero = initial[n];
        initial[n] = 0.0;
    } else {
        hit_at_zero = 1.0 - initial.iter().sum::<f64>();
    }
    let overall = initial.iter().zip(&per_state).map(|(p, e)| p * e).sum();
    Ok(FhtSolution {
        n,
        per_state,
        overall,
        hit_at_zero: hit_at_zero.clamp(0.0, 1.0),
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_hand_solve() {
        // n = 1, sigma = 1/4, rate 1/2. From state 0: the shift fixes the bit
        // w.p. 1/4, otherwise the offspring fixes it w.p. 1/2, so each step
        // hits w.p. 5/8 and E_0 = 8/5. Generation 0 hits w.p. 3/4 and leaves
        // state 0 w.p. 1/4, so the overall mean is 0.4.
        let sol = exact_mean_fht(1, 0.25, &[0.5], true).unwrap();
        assert!((sol.per_state[0] - 1.6).abs() < 1e-12);
        assert_eq!(sol.per_state[1], 0.0);
        assert!((sol.hit_at_zero - 0.75).abs() < 1e-12);
        assert!((sol.overall - 0.4).abs() < 1e-12);
    }

    #[test]
    fn offspring_only_hits() {
        // n = 1, sigma = 1/4, rate 1/2, only offspring hits count. An
        // offspring matches w.p. 1/2 whatever the parent, so tau is
        // geometric: E = 2 from every state, P(hit at 0) = 1/2, overall 1.
        let sol = exact_mean_fht(1, 0.25, &[0.5], false).unwrap();
        for e in &sol.per_state {
            assert!((e - 2.0).abs() < 1e-12);
        }
        assert!((sol.hit_at_zero - 0.5).abs() < 1e-12);
        assert!((sol.overall - 1.0).abs() < 1e-12);
    }

    #[test]
    fn guard_and_validation() {
        assert!(matches!(exact_mean_fht(65, 0.1, &[0.01], true), Err(Error::Validation(_))));
        assert!(exact_mean_fht(8, 0.0, &[0.1], true).is_err());
        assert!(exact_mean_fht(8, 0.1, &[], true).is_err());
        assert!(exact_mean_fht(8, 0.1, &[1.5], true).is_err());
    }

    #[test]
    fn csv_export() {
        let sol = exact_mean_fht(3, 0.1, &[0.3], true).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("state,expected_generations"));
    }
}
