//! Two-level interval decomposition of the matching-count range `[0, n]`.
//!
//! With `gamma = min{n / log n, sigma n^2 / log n}` and
//! `G = gamma^(4/7) log n` (base-2 logarithms):
//!
//! * first level: `F1 = [n - n/log^3 n, n]`, `L1 = [0, n/log^2 n]`, `O1` the rest;
//! * second level: `F2 = [n-G, n]`, `A1 = [n-2G, n-G)`, `A2 = [n-3G, n-2G)`,
//!   `L2 = [0, 4G]`, `B1 = (4G, 5G]`, `B2 = (5G, 6G]`.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::model::check_shift;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FirstLevel {
    F1,
    O1,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecondLevel {
    F2,
    A1,
    A2,
    L2,
    B1,
    B2,
}

impl fmt::Display for FirstLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for SecondLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Labels of one matching count, written `O1` or `O1/B2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntervalLabel {
    pub first: FirstLevel,
    pub second: Option<SecondLevel>,
}

impl fmt::Display for IntervalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.second {
            Some(s) => write!(f, "{}/{}", self.first, s),
            None => write!(f, "{}", self.first),
        }
    }
}

impl Serialize for IntervalLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `gamma(n, sigma)`, base-2 logarithm.
pub fn gamma(n: f64, sigma: f64) -> f64 {
    let log_n = n.log2();
    (n / log_n).min(sigma * n * n / log_n)
}

/// `G = gamma^(4/7) log n`, base-2 logarithm.
pub fn g_width(n: f64, sigma: f64) -> f64 {
    gamma(n, sigma).powf(4.0 / 7.0) * n.log2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalDecomposition {
    pub n: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub g: f64,
    /// `F1 = [f1_lo, n]`.
    pub f1_lo: f64,
    /// `L1 = [0, l1_hi]`.
    pub l1_hi: f64,
}

/// Builds the decomposition, failing when the intervals would overlap.
pub fn decompose(n: usize, sigma: f64) -> Result<IntervalDecomposition> {
    check_shift(sigma)?;
    if n < 2 {
        return Err(invalid(format!("interval decomposition needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let log_n = nf.log2();
    let gamma = gamma(nf, sigma);
    let g = g_width(nf, sigma);
    let f1_lo = nf - nf / log_n.powi(3);
    let l1_hi = nf / log_n.powi(2);
    if !(nf - 3.0 * g > 6.0 * g) {
        return Err(invalid(format!(
            "degenerate decomposition: n - 3G > 6G fails (n = {n}, G = {g:.4})"
        )));
    }
    if !(l1_hi < f1_lo) {
        return Err(invalid(format!(
            "degenerate decomposition: n/log^2 n < n - n/log^3 n fails (n = {n})"
        )));
    }
    Ok(IntervalDecomposition {
        n,
        sigma,
        gamma,
        g,
        f1_lo,
        l1_hi,
    })
}

impl IntervalDecomposition {
    pub fn classify(&self, matching: usize) -> IntervalLabel {
        assert!(matching <= self.n, "matching {matching} exceeds n = {}", self.n);
        let x = matching as f64;
        let n = self.n as f64;
        let g = self.g;
        let first = if x >= self.f1_lo {
            FirstLevel::F1
        } else if x <= self.l1_hi {
            FirstLevel::L1
        } else {
            FirstLevel::O1
        };
        let second = if x >= n - g {
            Some(SecondLevel::F2)
        } else if x >= n - 2.0 * g {
            Some(SecondLevel::A1)
        } else if x >= n - 3.0 * g {
            Some(SecondLevel::A2)
        } else if x <= 4.0 * g {
            Some(SecondLevel::L2)
        } else if x <= 5.0 * g {
            Some(SecondLevel::B1)
        } else if x <= 6.0 * g {
            Some(SecondLevel::B2)
        } else {
            None
        };
        IntervalLabel { first, second }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example_n1024() {
        let d = decompose(1024, 10.0 / 1_048_576.0).unwrap();
        assert!((d.gamma - 1.0).abs() < 1e-12);
        assert!((d.g - 10.0).abs() < 1e-12);
        let c = |x| d.classify(x).second;
        assert_eq!(c(1014), Some(SecondLevel::F2));
        assert_eq!(c(1024), Some(SecondLevel::F2));
        assert_eq!(c(1013), Some(SecondLevel::A1));
        assert_eq!(c(1004), Some(SecondLevel::A1));
        assert_eq!(c(1003), Some(SecondLevel::A2));
        assert_eq!(c(994), Some(SecondLevel::A2));
        assert_eq!(c(993), None);
        assert_eq!(c(40), Some(SecondLevel::L2));
        assert_eq!(c(41), Some(SecondLevel::B1));
        assert_eq!(c(50), Some(SecondLevel::B1));
        assert_eq!(c(51), Some(SecondLevel::B2));
        assert_eq!(c(60), Some(SecondLevel::B2));
        assert_eq!(c(61), None);
    }

    #[test]
    fn gamma_cap() {
        assert!((gamma(1024.0, 0.1) - 102.4).abs() < 1e-12);
        assert!((gamma(1024.0, 0.5) - 102.4).abs() < 1e-12);
        // G = 102.4^(4/7) * 10 exceeds n/9, so no valid decomposition
        assert!(decompose(1024, 0.1).is_err());
    }

    #[test]
    fn degenerate_cases_fail() {
        assert!(decompose(1, 0.1).is_err());
        assert!(decompose(2, 0.1).is_err());
        let err = decompose(64, 0.5).unwrap_err().to_string();
        assert!(err.contains("n - 3G > 6G"), "{err}");
        assert!(decompose(64, 0.6).is_err());
    }

    #[test]
    fn labels_render() {
        let d = decompose(1024, 10.0 / 1_048_576.0).unwrap();
        assert_eq!(d.classify(1024).to_string(), "F1/F2");
        assert_eq!(d.classify(500).to_string(), "O1");
        assert_eq!(serde_json::to_string(&d.classify(45)).unwrap(), "\"O1/B1\"");
        assert_eq!(d.classify(10).to_string(), "L1/L2");
    }

    proptest! {
        #[test]
        fn first_level_partitions(n in 2usize..4096, sigma in 1e-9f64..=0.5) {
            if let Ok(d) = decompose(n, sigma) {
                let nf = n as f64;
                for x in [0, 1, n / 3, n / 2, n - 1, n] {
                    let xf = x as f64;
                    let in_f1 = xf >= d.f1_lo && xf <= nf;
                    let in_l1 = xf <= d.l1_hi;
                    let count = in_f1 as u8 + in_l1 as u8 + (!in_f1 && !in_l1) as u8;
                    prop_assert_eq!(count, 1);
                    let label = d.classify(x);
                    prop_assert_eq!(label.first == FirstLevel::F1, in_f1);
                    prop_assert_eq!(label.first == FirstLevel::L1, in_l1);
                }
            }
        }

        #[test]
        fn second_level_exclusive(n in 10usize..4096, sigma in 1e-9f64..=0.5, x in 0usize..4096) {
            if let Ok(d) = decompose(n, sigma) {
                let x = x.min(n);
                let xf = x as f64;
                let (nf, g) = (n as f64, d.g);
                let hits = [
                    xf >= nf - g && xf <= nf,
                    xf >= nf - 2.0 * g && xf < nf - g,
                    xf >= nf - 3.0 * g && xf < nf - 2.0 * g,
                    xf <= 4.0 * g,
                    xf > 4.0 * g && xf <= 5.0 * g,
                    xf > 5.0 * g && xf <= 6.0 * g,
                ];
                let count = hits.iter().filter(|h| **h).count();
                prop_assert!(count <= 1);
                prop_assert_eq!(d.classify(x).second.is_some(), count == 1);
            }
        }
    }
}
