//! Browser bindings for three operations: the characteristic function of a
//! weight, the spectral decay of an average, and the almost-mixing probe.
//! Every input is a preset string, as in the CLI config files.

use homavg::engine::{almost_mixing_probe, geometric_grid, l2_norm_spectral, PairMethod};
use homavg::experiment::preset;
use wasm_bindgen::prelude::*;

const PROBE_SAMPLES: usize = 20_000;

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// `|ν̂(ξ)|` on `points` equally spaced frequencies in `[0, xi_max]`.
pub fn char_fn_moduli(measure: &str, xi_max: f64, points: usize) -> Result<Vec<f64>, String> {
    let nu = preset::measure("measure", measure).map_err(fail)?;
    if !(xi_max.is_finite() && xi_max > 0.0) || points < 2 {
        return Err("need xi_max > 0 and at least two points".into());
    }
    (0..points)
        .map(|k| {
            let xi = xi_max * k as f64 / (points - 1) as f64;
            nu.char_fn(xi).map(|v| v.norm()).map_err(fail)
        })
        .collect()
}

/// `‖P_t f‖₂` along a geometric grid for a spectral measure preset.
pub fn spectral_values(
    spectrum: &str,
    measure: &str,
    start: f64,
    factor: f64,
    count: usize,
) -> Result<Vec<f64>, String> {
    let sigma = preset::spectrum("spectrum", spectrum).map_err(fail)?;
    let nu = preset::measure("measure", measure).map_err(fail)?;
    let grid = geometric_grid(start, factor, count).map_err(fail)?;
    grid.iter().map(|&t| l2_norm_spectral(&sigma, &nu, t).map_err(fail)).collect()
}

/// `|(P_t f, P_t f) − c|` along a geometric grid for a correlation preset.
/// Density weights use quadrature, the rest a fixed-seed sample.
pub fn probe_values(
    correlation: &str,
    measure: &str,
    start: f64,
    factor: f64,
    count: usize,
) -> Result<Vec<f64>, String> {
    let nu = preset::measure("measure", measure).map_err(fail)?;
    let grid = geometric_grid(start, factor, count).map_err(fail)?;
    let (lo, hi) = nu.support_hull();
    let reach = grid[grid.len() - 1] * (hi - lo) + 1.0;
    let profile = preset::spike_profile("correlation", correlation, reach).map_err(fail)?;
    let method = if nu.as_density().is_some() {
        PairMethod::Quadrature
    } else {
        PairMethod::Sampling { count: PROBE_SAMPLES, seed: 1 }
    };
    let report = almost_mixing_probe(&profile, &nu, &grid, 1.0, method).map_err(fail)?;
    Ok(report.curve.values)
}

#[wasm_bindgen]
pub fn char_fn_curve(measure: &str, xi_max: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    char_fn_moduli(measure, xi_max, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn spectral_decay(
    spectrum: &str,
    measure: &str,
    start: f64,
    factor: f64,
    count: usize,
) -> Result<Vec<f64>, JsValue> {
    spectral_values(spectrum, measure, start, factor, count).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn almost_mixing_curve(
    correlation: &str,
    measure: &str,
    start: f64,
    factor: f64,
    count: usize,
) -> Result<Vec<f64>, JsValue> {
    probe_values(correlation, measure, start, factor, count).map_err(|e| JsValue::from_str(&e))
}
