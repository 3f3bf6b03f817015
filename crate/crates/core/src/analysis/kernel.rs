//! Exact transition kernels over matching-bit counts.
//!
//! A state is the number of bits in which a tracked individual agrees with
//! the current optimum. Flipping every bit independently with probability
//! `q` (either the optimum's shift or the individual's mutation) moves state
//! `i` to `j` by gaining `j - i + k` of the `n - i` mismatches and losing `k`
//! of the `i` matches.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::check_shift;

/// Compensated (Neumaier) summation.
pub(crate) fn neumaier<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `a * ln(q)` with the convention `0 * ln(0) = 0`.
fn xlog(a: usize, ln_q: f64) -> f64 {
    if a == 0 {
        0.0
    } else {
        a as f64 * ln_q
    }
}

/// Distribution of the matching count after flipping every bit of a string
/// with `i` matching bits independently with probability `q`.
pub(crate) fn flip_row(n: usize, i: usize, q: f64) -> Vec<f64> {
    assert!(i <= n);
    let lf = ln_factorials(n);
    flip_row_with(n, i, q, &lf)
}

fn flip_row_with(n: usize, i: usize, q: f64, lf: &[f64]) -> Vec<f64> {
    let ln_choose = |a: usize, b: usize| lf[a] - lf[b] - lf[a - b];
    let ln_q = q.ln();
    let ln_1q = (-q).ln_1p();
    let mut row = vec![0.0; n + 1];
    for (j, slot) in row.iter_mut().enumerate() {
        // lose k of the i matches, gain g = j - i + k of the n - i mismatches
        let k_min = i.saturating_sub(j);
        let k_max = i.min(n - j);
        if k_min > k_max {
            continue;
        }
        *slot = neumaier((k_min..=k_max).map(|k| {
            let g = j + k - i;
            let flips = g + k;
            (ln_choose(n - i, g) + ln_choose(i, k) + xlog(flips, ln_q) + xlog(n - flips, ln_1q)).exp()
        }));
    }
    let total = neumaier(row.iter().copied());
    if (total - 1.0).abs() > 1e-12 {
        for v in &mut row {
            *v /= total;
        }
    }
    row
}

/// Effective per-bit flip probability of a shift with rate `sigma` followed
/// by a mutation with rate `p`: `p(1 - sigma) + sigma(1 - p)`.
pub fn composite_rate(p: f64, sigma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("mutation rate outside [0, 1]: {p}")));
    }
    check_shift(sigma)?;
    Ok(p * (1.0 - sigma) + sigma * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Shift { sigma: f64 },
    Mutate { p: f64 },
    /// Shift, then the best of the parent and one offspring per listed rate.
    Composed { sigma: f64, rates: Vec<f64> },
}

/// Row-stochastic `(n+1) x (n+1)` matrix over matching counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n: usize,
    kind: KernelKind,
    matrix: DMatrix<f64>,
}

impl TransitionKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.matrix[(from, to)]
    }

    pub fn row(&self, from: usize) -> Vec<f64> {
        self.matrix.row(from).iter().copied().collect()
    }

    /// Largest `|row sum - 1|`.
    pub fn max_row_error(&self) -> f64 {
        (0..=self.n)
            .map(|i| (neumaier(self.matrix.row(i).iter().copied()) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Same kernel with state `n` made absorbing.
    pub fn absorbing(&self) -> TransitionKernel {
        let mut matrix = self.matrix.clone();
        matrix.row_mut(self.n).fill(0.0);
        matrix[(self.n, self.n)] = 1.0;
        TransitionKernel {
            n: self.n,
            kind: self.kind.clone(),
            matrix,
        }
    }

    /// CSV with header `from,0,1,...,n`; one row per from-state.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["from".to_string()];
        header.extend((0..=self.n).map(|j| j.to_string()));
        w.write_record(&header)?;
        for i in 0..=self.n {
            let mut rec = vec![i.to_string()];
            rec.extend(self.matrix.row(i).iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn flip_matrix(n: usize, q: f64) -> DMatrix<f64> {
    let lf = ln_factorials(n);
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for (j, v) in flip_row_with(n, i, q, &lf).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        Err(invalid("problem size must be positive"))
    } else {
        Ok(())
    }
}

/// Kernel of one optimum shift with rate `sigma`.
pub fn shift_kernel(n: usize, sigma: f64) -> Result<TransitionKernel> {
    check_size(n)?;
    check_shift(sigma)?;
    Ok(TransitionKernel {
        n,
        kind: KernelKind::Shift { sigma },
        matrix: flip_matrix(n, sigma),
    })
}

/// Kernel of one bitwise mutation with rate `p`.
pub fn mutate_kernel(n: usize, p: f64) -> Result<TransitionKernel> {
    check_size(n)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("mutation rate outside [0, 1]: {p}")));
    }
    Ok(TransitionKernel {
        n,
        kind: KernelKind::Mutate { p },
        matrix: flip_matrix(n, p),
    })
}

/// Distinct rates with multiplicities, in order of first appearance.
pub(crate) fn group_rates(rates: &[f64]) -> Vec<(f64, usize)> {
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &p in rates {
        match groups.iter_mut().find(|(q, _)| q.to_bits() == p.to_bits()) {
            Some(g) => g.1 += 1,
            None => groups.push((p, 1)),
        }
    }
    groups
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(invalid("at least one offspring rate is required"));
    }
    for &p in rates {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("mutation rate outside [0, 1]: {p}")));
        }
    }
    Ok(())
}

/// Selection matrix `R[j][m] = P(max(j, K_1..K_lambda) = m)` where `K_chi` is
/// the matching count of an offspring mutated from a parent with `j` matches.
///
/// With `offspring_may_hit = false` the mass of every outcome in which some
/// offspring reaches `n` is removed, leaving a sub-stochastic matrix.
pub(crate) fn selection_matrix(n: usize, rates: &[f64], offspring_may_hit: bool) -> DMatrix<f64> {
    let groups = group_rates(rates);
    let lf = ln_factorials(n);
    // cdf[g][j][m] = P(K <= m | parent j) for group g
    let cdfs: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|&(p, _)| {
            (0..=n)
                .map(|j| {
                    let row = flip_row_with(n, j, p, &lf);
                    cdf_from_tail(&row)
                })
                .collect()
        })
        .collect();
    let mut r = DMatrix::zeros(n + 1, n + 1);
    for j in 0..=n {
        // G(m) = P(max(j, K...) <= m [, no K = n])
        let big_g = |m: usize| -> f64 {
            if m < j {
                return 0.0;
            }
            let m_eff = if offspring_may_hit { m } else { m.min(n - 1) };
            groups
                .iter()
                .zip(&cdfs)
                .map(|(&(_, k), cdf)| cdf[j][m_eff].powi(k as i32))
                .product()
        };
        let mut prev = 0.0;
        for m in j..=n {
            let g = big_g(m);
            r[(j, m)] = (g - prev).max(0.0);
            prev = g;
        }
    }
    r
}

/// CDF built from upper-tail sums so that values near 1 keep their tails.
fn cdf_from_tail(row: &[f64]) -> Vec<f64> {
    let n = row.len() - 1;
    let mut cdf = vec![1.0; n + 1];
    let mut tail = 0.0;
    for m in (0..n).rev() {
        tail += row[m + 1];
        cdf[m] = (1.0 - tail).max(0.0);
    }
    cdf
}

/// Kernel of one full generation: shift with `sigma`, then keep the best of
/// the shifted parent and one offspring per entry of `rates`.
pub fn composed_step_kernel(n: usize, sigma: f64, rates: &[f64]) -> Result<TransitionKernel> {
    check_size(n)?;
    check_shift(sigma)?;
    check_rates(rates)?;
    let s = flip_matrix(n, sigma);
    let r = selection_matrix(n, rates, true);
    Ok(TransitionKernel {
        n,
        kind: KernelKind::Composed {
            sigma,
            rates: rates.to_vec(),
        },
        matrix: s * r,
    })
}

pub(crate) fn check_composed_inputs(n: usize, sigma: f64, rates: &[f64]) -> Result<()> {
    check_size(n)?;
    check_shift(sigma)?;
    check_rates(rates)
}

pub(crate) fn raw_flip_matrix(n: usize, q: f64) -> DMatrix<f64> {
    flip_matrix(n, q)
}
