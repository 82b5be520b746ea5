//! Averages seen through the spectral measure of a cyclic subspace, where
//! `P_t` acts as multiplication by `ν̂(tr)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{SpectralModel, SPECTRAL_TOL};
use crate::measure::WeightMeasure;

/// `|ν̂(tr)|²`, or NaN where the characteristic function fails to converge.
fn multiplier_sq(nu: &WeightMeasure, t: f64) -> impl Fn(f64) -> f64 + '_ {
    move |r| nu.char_fn_unchecked(t * r).map_or(f64::NAN, |z| z.norm_sqr())
}

/// Half the oscillation period of `r ↦ ν̂(tr)`.
fn resolution(nu: &WeightMeasure, t: f64) -> f64 {
    let (lo, hi) = nu.support_hull();
    std::f64::consts::PI / (t.abs() * (hi - lo))
}

fn nan_to_accuracy(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Accuracy { achieved: f64::INFINITY })
    }
}

/// `(∫ |ν̂(tr)|² dσ(r))^{1/2}`, the norm of `P_t f` for a unit cyclic vector
/// `f` with spectral measure `σ`.
pub fn l2_norm_spectral(sigma: &SpectralModel, nu: &WeightMeasure, t: f64) -> Result<f64> {
    sigma.validate()?;
    nu.require_weight()?;
    let (v, _) = sigma.integrate(multiplier_sq(nu, t), resolution(nu, t), SPECTRAL_TOL)?;
    Ok(nan_to_accuracy(v)?.max(0.0).sqrt())
}

/// Both sides of `∫|F|² dσ ≤ (∫|F|^{2n} dσ)^{1/n}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// The descent inequality for an arbitrary multiplier magnitude `|F|`
/// varying on the length scale `resolution`.
pub fn holder_descent_check_with(
    sigma: &SpectralModel,
    magnitude: impl Fn(f64) -> f64,
    resolution: f64,
    n: u32,
) -> Result<HolderReport> {
    sigma.validate()?;
    if n < 2 {
        return Err(Error::Invalid("descent exponent must be at least 2".into()));
    }
    let (lhs, _) = sigma.integrate(|r| magnitude(r).powi(2), resolution, SPECTRAL_TOL)?;
    let (high, _) = sigma.integrate(|r| magnitude(r).powi(2 * n as i32), resolution, SPECTRAL_TOL)?;
    let lhs = nan_to_accuracy(lhs)?;
    let rhs = nan_to_accuracy(high)?.max(0.0).powf(1.0 / n as f64);
    Ok(HolderReport { lhs, rhs, pass: lhs <= rhs + 1e-9 })
}

/// The descent inequality with multiplier `ν̂(tr)`.
pub fn holder_descent_check(sigma: &SpectralModel, nu: &WeightMeasure, t: f64, n: u32) -> Result<HolderReport> {
    nu.require_weight()?;
    let magnitude = |r: f64| nu.char_fn_unchecked(t * r).map_or(f64::NAN, |z| z.norm());
    holder_descent_check_with(sigma, magnitude, resolution(nu, t), n)
}
