//! Small statistics toolkit: means, exact binomial intervals, chi-square
//! tests with bin pooling, and log-log regression.

use serde::Serialize;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Normal};

/// Sample mean and its standard error. `(NaN, NaN)` for no data; the
/// standard error of a single value is 0.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Clopper-Pearson interval for `successes` out of `trials` at the given
/// two-sided confidence level.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials && trials > 0);
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("valid shape").inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("valid shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_result(statistic: f64, bins: usize) -> ChiSquare {
    let dof = bins.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive dof").sf(statistic)
    };
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

/// Groups consecutive bins until each group's weight reaches `min_weight`;
/// a light remainder joins the last group. Returns group boundaries.
fn pool(weights: &[f64], min_weight: f64) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= min_weight {
            groups.push(start..i + 1);
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < weights.len() {
        match groups.last_mut() {
            Some(last) => last.end = weights.len(),
            None => groups.push(0..weights.len()),
        }
    }
    groups
}

/// Goodness of fit of observed counts to expected probabilities, pooling
/// adjacent bins until every expected count is at least 5.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let exp_counts: Vec<f64> = expected.iter().map(|p| p * total as f64).collect();
    let groups = pool(&exp_counts, 5.0);
    let statistic = groups
        .iter()
        .map(|g| {
            let o: f64 = observed[g.clone()].iter().map(|&c| c as f64).sum();
            let e: f64 = exp_counts[g.clone()].iter().sum();
            if e > 0.0 {
                (o - e).powi(2) / e
            } else {
                0.0
            }
        })
        .sum();
    chi_square_result(statistic, groups.len())
}

/// Two-sample homogeneity test of two histograms over the same bins,
/// pooling adjacent bins until each group holds at least 10 observations.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let combined: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) as f64).collect();
    let groups = pool(&combined, 10.0);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic = groups
        .iter()
        .map(|g| {
            let x: f64 = a[g.clone()].iter().map(|&c| c as f64).sum();
            let y: f64 = b[g.clone()].iter().map(|&c| c as f64).sum();
            if x + y > 0.0 {
                (ka * x - kb * y).powi(2) / (x + y)
            } else {
                0.0
            }
        })
        .sum();
    chi_square_result(statistic, groups.len())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0 && sxy.is_finite()).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
        assert!(mean_se(&[]).0.is_nan());
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn clopper_pearson_half() {
        let (lo, hi) = clopper_pearson(50, 100, 0.95);
        assert!((lo - 0.3983).abs() < 5e-4, "{lo}");
        assert!((hi - 0.6017).abs() < 5e-4, "{hi}");
        assert_eq!(clopper_pearson(0, 10, 0.95).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.95).1, 1.0);
        // closed form at the edges: (alpha/2)^(1/n)
        let (lo, _) = clopper_pearson(10, 10, 0.95);
        assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-9);
    }

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.99) - 2.326_347_874).abs() < 1e-6);
        assert!((normal_quantile(0.975) - 1.959_963_985).abs() < 1e-6);
    }

    #[test]
    fn chi_square_sanity() {
        let fit = chi_square_gof(&[25, 25, 25, 25], &[0.25; 4]);
        assert_eq!(fit.statistic, 0.0);
        assert_eq!(fit.dof, 3);
        assert_eq!(fit.p_value, 1.0);
        let bad = chi_square_gof(&[100, 0, 0, 0], &[0.25; 4]);
        assert!(bad.p_value < 1e-10);
        let same = chi_square_two_sample(&[10, 20, 30], &[20, 40, 60]);
        assert!(same.statistic.abs() < 1e-12);
        let diff = chi_square_two_sample(&[100, 0], &[0, 100]);
        assert!(diff.p_value < 1e-10);
    }

    #[test]
    fn pooling_merges_light_bins() {
        assert_eq!(pool(&[1.0, 2.0, 3.0, 10.0, 1.0], 5.0), vec![0..3, 3..5]);
        assert_eq!(pool(&[1.0, 1.0], 5.0), vec![0..2]);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [16.0, 32.0, 64.0, 128.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&[1.0], &[1.0]), None);
    }
}
