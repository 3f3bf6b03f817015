//! WebAssembly bindings for the browser demo. Each export returns a JSON
//! string; the plain functions behind them are usable and tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use evodyn::analysis::{composed_step_kernel, decompose, exact_mean_fht, MAX_EXACT_N};
use evodyn::formula::Vars;
use evodyn::{RunConfig, SchemeSpec, ShiftSchedule, Simulator};

/// Longest trajectory the page will draw.
pub const MAX_TRAJECTORY: u64 = 200_000;

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub sigma: f64,
    pub mean_generations: f64,
}

#[derive(Debug, Serialize)]
pub struct Heatmap {
    pub n: usize,
    pub sigma: f64,
    pub rates: Vec<f64>,
    /// Row-major, row = from-state.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct Bands {
    pub gamma: f64,
    pub g: f64,
    pub f1_lo: f64,
    pub l1_hi: f64,
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub n: usize,
    pub sigma: f64,
    pub lambda: usize,
    pub scheme: String,
    pub hit_generation: Option<u64>,
    pub matching: Vec<usize>,
    pub best_ratio: Vec<f64>,
    /// Interval bounds, absent when the decomposition is degenerate.
    pub bands: Option<Bands>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rates_of(rates: &[f64]) -> Result<Vec<f64>, String> {
    if rates.is_empty() {
        return Err("at least one mutation rate is needed".into());
    }
    Ok(rates.to_vec())
}

/// Exact expected hitting time at `points` log-spaced shift rates between
/// `sigma_lo` and `sigma_hi`.
pub fn fht_curve(n: usize, rates: &[f64], sigma_lo: f64, sigma_hi: f64, points: usize) -> Result<Vec<CurvePoint>, String> {
    if n == 0 || n > MAX_EXACT_N {
        return Err(format!("n must lie in 1..={MAX_EXACT_N}"));
    }
    if !(sigma_lo > 0.0 && sigma_lo <= sigma_hi && sigma_hi <= 0.5) {
        return Err("need 0 < sigma_lo <= sigma_hi <= 1/2".into());
    }
    if !(2..=200).contains(&points) {
        return Err("points must lie in 2..=200".into());
    }
    let rates = rates_of(rates)?;
    let step = (sigma_hi / sigma_lo).ln() / (points - 1) as f64;
    (0..points)
        .map(|k| {
            let sigma = (sigma_lo.ln() + step * k as f64).exp().min(0.5);
            let sol = exact_mean_fht(n, sigma, &rates, true).map_err(err)?;
            Ok(CurvePoint {
                sigma,
                mean_generations: sol.overall,
            })
        })
        .collect()
}

/// One-generation kernel over matching counts: shift, then best of parent
/// and one offspring per rate.
pub fn kernel_heatmap(n: usize, sigma: f64, rates: &[f64]) -> Result<Heatmap, String> {
    if n == 0 || n > 128 {
        return Err("n must lie in 1..=128".into());
    }
    let rates = rates_of(rates)?;
    let k = composed_step_kernel(n, sigma, &rates).map_err(err)?;
    Ok(Heatmap {
        n,
        sigma,
        matrix: (0..=n).map(|i| k.row(i)).collect(),
        rates,
    })
}

/// A single count-mode run with its matching trace and interval bounds.
pub fn trajectory(n: usize, sigma: f64, lambda: usize, scheme: &str, seed: u64, max_generations: u64) -> Result<Trajectory, String> {
    if n == 0 || n > 4096 {
        return Err("n must lie in 1..=4096".into());
    }
    if lambda == 0 || lambda > 4096 {
        return Err("lambda must lie in 1..=4096".into());
    }
    if max_generations == 0 || max_generations > MAX_TRAJECTORY {
        return Err(format!("max_generations must lie in 1..={MAX_TRAJECTORY}"));
    }
    let schedule = ShiftSchedule::fixed(sigma).map_err(err)?;
    let spec: SchemeSpec = scheme.parse().map_err(err)?;
    let vars = Vars::new()
        .with("c", 1.0)
        .with("n", n as f64)
        .with("sigma", sigma)
        .with("lambda", lambda as f64);
    let resolved = spec.resolve(&vars).map_err(err)?;
    let config = RunConfig::new(n, lambda, resolved, schedule, max_generations, seed).with_traces(true);
    let rec = Simulator::new(config).map_err(err)?.run_replication(0);
    let bands = decompose(n, sigma).ok().map(|d| Bands {
        gamma: d.gamma,
        g: d.g,
        f1_lo: d.f1_lo,
        l1_hi: d.l1_hi,
    });
    Ok(Trajectory {
        n,
        sigma,
        lambda,
        scheme: spec.to_string(),
        hit_generation: rec.hit_generation,
        matching: rec.matching_trace.unwrap_or_default(),
        best_ratio: rec.best_ratio_trace.unwrap_or_default(),
        bands,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(err))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fhtCurve)]
pub fn fht_curve_js(n: usize, rates: Vec<f64>, sigma_lo: f64, sigma_hi: f64, points: usize) -> Result<String, JsValue> {
    to_js(fht_curve(n, &rates, sigma_lo, sigma_hi, points))
}

#[wasm_bindgen(js_name = kernelHeatmap)]
pub fn kernel_heatmap_js(n: usize, sigma: f64, rates: Vec<f64>) -> Result<String, JsValue> {
    to_js(kernel_heatmap(n, sigma, &rates))
}

#[wasm_bindgen(js_name = trajectory)]
pub fn trajectory_js(n: usize, sigma: f64, lambda: usize, scheme: &str, seed: u64, max_generations: u64) -> Result<String, JsValue> {
    to_js(trajectory(n, sigma, lambda, scheme, seed, max_generations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_spans_the_grid() {
        let c = fht_curve(8, &[0.125], 1e-3, 0.25, 5).unwrap();
        assert_eq!(c.len(), 5);
        assert!((c[0].sigma - 1e-3).abs() < 1e-15 && (c[4].sigma - 0.25).abs() < 1e-12);
        assert!(c.iter().all(|p| p.mean_generations.is_finite() && p.mean_generations > 0.0));
        assert!(fht_curve(65, &[0.1], 0.01, 0.1, 3).is_err());
        assert!(fht_curve(8, &[], 0.01, 0.1, 3).is_err());
    }

    #[test]
    fn heatmap_rows_are_distributions() {
        let h = kernel_heatmap(10, 0.05, &[0.1, 0.3]).unwrap();
        assert_eq!(h.matrix.len(), 11);
        for row in &h.matrix {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(kernel_heatmap(10, 0.9, &[0.1]).is_err());
    }

    #[test]
    fn trajectory_with_bands() {
        let t = trajectory(256, 64.0 / 65536.0, 1, "fixed:1/n", 5, 500).unwrap();
        assert_eq!(t.matching.len(), 500);
        assert!(t.bands.is_some());
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"best_ratio\""));
        let small = trajectory(8, 0.01, 2, "banded:1/n,1/2", 1, 1000).unwrap();
        assert!(small.bands.is_none());
        assert!(trajectory(8, 0.01, 1, "bogus", 1, 10).is_err());
    }
}
