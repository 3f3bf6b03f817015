//! Count-space sampling: matching counts only, drawn by inverting exact
//! per-rate CDF tables where they are available.

use rand::Rng;

use crate::analysis::kernel::raw_flip_matrix;
use crate::model::binomial;

/// Tables above this size are not worth their `O(n^3)` construction.
pub(crate) const MAX_TABLE_N: usize = 512;

/// `ln P(K <= m | parent j)` for one flip rate, row-major over `(j, m)`.
#[derive(Debug, Clone)]
pub(crate) struct CdfTable {
    n: usize,
    ln_cdf: Vec<f64>,
    cdf: Vec<f64>,
}

impl CdfTable {
    pub(crate) fn new(n: usize, q: f64) -> Self {
        let m = raw_flip_matrix(n, q);
        let mut ln_cdf = vec![0.0; (n + 1) * (n + 1)];
        for j in 0..=n {
            let row = &mut ln_cdf[j * (n + 1)..(j + 1) * (n + 1)];
            let mut tail = 0.0;
            for k in (0..n).rev() {
                tail += m[(j, k + 1)];
                row[k] = (-tail.min(1.0)).ln_1p();
            }
            row[n] = 0.0;
        }
        let cdf = ln_cdf.iter().map(|x| x.exp()).collect();
        Self { n, ln_cdf, cdf }
    }

    /// Maximum of `k` independent draws from row `j`, by inversion:
    /// the smallest `m` with `F(m)^k >= v`, `v` uniform on `(0, 1]`.
    pub(crate) fn sample_max<R: Rng + ?Sized>(&self, j: usize, k: usize, rng: &mut R) -> usize {
        let v = 1.0 - rng.random::<f64>();
        let span = j * (self.n + 1)..(j + 1) * (self.n + 1);
        if k == 1 {
            return self.cdf[span].partition_point(|&x| x < v);
        }
        let target = v.ln() / k as f64;
        self.ln_cdf[span].partition_point(|&x| x < target)
    }
}

/// Flip outcome for a string with `j` matching bits, drawn as gains and
/// losses.
pub(crate) fn flip_counts<R: Rng + ?Sized>(n: usize, j: usize, q: f64, rng: &mut R) -> usize {
    let lost = binomial(j, q, rng);
    let gained = binomial(n - j, q, rng);
    j - lost + gained
}

/// Inverse-CDF tables for a fixed shift rate and a finite set of mutation
/// rates, with binomial fallbacks for anything else.
#[derive(Debug, Clone)]
pub(crate) struct CountSampler {
    n: usize,
    shift: Option<(u64, CdfTable)>,
    mutation: Vec<(u64, CdfTable)>,
}

impl CountSampler {
    pub(crate) fn new(n: usize, shift: Option<f64>, rates: &[f64]) -> Self {
        let tabulate = n <= MAX_TABLE_N;
        let mut mutation: Vec<(u64, CdfTable)> = Vec::new();
        if tabulate {
            for &p in rates {
                if !mutation.iter().any(|(bits, _)| *bits == p.to_bits()) {
                    mutation.push((p.to_bits(), CdfTable::new(n, p)));
                }
            }
        }
        Self {
            n,
            shift: shift
                .filter(|_| tabulate)
                .map(|s| (s.to_bits(), CdfTable::new(n, s))),
            mutation,
        }
    }

    /// Matching count after a shift with rate `sigma`.
    pub(crate) fn shift<R: Rng + ?Sized>(&self, i: usize, sigma: f64, rng: &mut R) -> usize {
        match &self.shift {
            Some((bits, table)) if *bits == sigma.to_bits() => table.sample_max(i, 1, rng),
            _ => flip_counts(self.n, i, sigma, rng),
        }
    }

    /// Best of `k` offspring mutated with rate `p` from a parent with `j`
    /// matching bits.
    pub(crate) fn best_of<R: Rng + ?Sized>(&self, j: usize, p: f64, k: usize, rng: &mut R) -> usize {
        match self.mutation.iter().find(|(bits, _)| *bits == p.to_bits()) {
            Some((_, table)) => table.sample_max(j, k, rng),
            None => (0..k).map(|_| flip_counts(self.n, j, p, rng)).max().unwrap_or(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::kernel::{mutate_kernel, selection_matrix};
    use crate::rng::{Role, RunStreams};

    #[test]
    fn inversion_matches_exact_max_distribution() {
        let n = 6;
        let p = 0.2;
        let k = 3;
        let table = CdfTable::new(n, p);
        let exact = selection_matrix(n, &[p; 3], true);
        let mut rng = RunStreams::new(3, 0).stream(0, Role::Init);
        let draws = 200_000;
        let j = 2;
        let mut hist = vec![0usize; n + 1];
        for _ in 0..draws {
            // max(j, ...) so that the histogram is comparable with the selection row
            hist[table.sample_max(j, k, &mut rng).max(j)] += 1;
        }
        for m in 0..=n {
            let p_m = exact[(j, m)];
            let se = (p_m * (1.0 - p_m) / draws as f64).sqrt();
            let freq = hist[m] as f64 / draws as f64;
            assert!((freq - p_m).abs() <= 4.0 * se + 1e-9, "m = {m}: {freq} vs {p_m}");
        }
    }

    #[test]
    fn degenerate_rates() {
        let n = 5;
        let zero = CdfTable::new(n, 0.0);
        let one = CdfTable::new(n, 1.0);
        let mut rng = RunStreams::new(1, 0).stream(0, Role::Init);
        for j in 0..=n {
            for _ in 0..50 {
                assert_eq!(zero.sample_max(j, 4, &mut rng), j);
                assert_eq!(one.sample_max(j, 1, &mut rng), n - j);
            }
        }
        let k = mutate_kernel(n, 0.0).unwrap();
        assert_eq!(k.get(2, 2), 1.0);
    }

    #[test]
    fn fallback_without_table() {
        let s = CountSampler::new(8, None, &[]);
        let mut rng = RunStreams::new(1, 0).stream(0, Role::Init);
        for _ in 0..100 {
            assert_eq!(s.best_of(3, 0.0, 5, &mut rng), 3);
            assert!(s.shift(3, 0.5, &mut rng) <= 8);
        }
    }
}
