//! Deviation curves over a grid of scales.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    correlation_pair_integral, deviation_exact_inner, l1_deviation, l2_deviation_mc, l2_norm_spectral, Observable,
    PairMethod,
};
use crate::error::{Error, Result};
use crate::flow::{CorrelationModel, SpectralModel, TorusWinding};
use crate::measure::WeightMeasure;
use crate::rng::derive_seed;

/// Identifiers needed to reproduce a curve.
pub type Metadata = BTreeMap<String, String>;

/// Sampled `t ↦ deviation` with per-point errors. Failed points hold NaN in
/// both `values` and `errors` and are listed under `failed` in the
/// metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub metadata: Metadata,
}

fn number(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        let _ = write!(out, "{v:.16e}");
    }
}

impl DecayCurve {
    /// `t,value,error` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,error\n");
        for ((t, v), e) in self.grid.iter().zip(&self.values).zip(&self.errors) {
            number(&mut out, *t);
            out.push(',');
            number(&mut out, *v);
            out.push(',');
            number(&mut out, *e);
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`DecayCurve::to_csv`]; metadata is left empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("t,value,error") {
            return Err(Error::Invalid("missing `t,value,error` header".into()));
        }
        let mut c = DecayCurve { grid: vec![], values: vec![], errors: vec![], metadata: Metadata::new() };
        for (n, line) in lines.enumerate() {
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Invalid(format!("row {}: {e}", n + 1)))?;
            if cols.len() != 3 {
                return Err(Error::Invalid(format!("row {}: expected 3 columns", n + 1)));
            }
            c.grid.push(cols[0]);
            c.values.push(cols[1]);
            c.errors.push(cols[2]);
        }
        Ok(c)
    }

    /// Metadata as a TOML table.
    pub fn metadata_document(&self) -> String {
        toml::to_string(&self.metadata).expect("string map serializes")
    }

    /// Indices of points whose evaluation failed.
    pub fn failed(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| v.is_nan()).map(|(k, _)| k).collect()
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Invalid("a scan grid needs at least two points".into()));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Invalid("grid points must be finite and positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `start·factor^k`, `k = 0..count`.
pub fn geometric_grid(start: f64, factor: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && factor > 1.0) || count < 2 {
        return Err(Error::Invalid("geometric grid needs start > 0, factor > 1 and two points".into()));
    }
    let grid: Vec<f64> = (0..count).map(|k| start * factor.powi(k as i32)).collect();
    check_grid(&grid)?;
    Ok(grid)
}

/// One deviation functional evaluated at a single scale.
pub trait DeviationEvaluator {
    /// `(value, error)` at scale `t`; `seed` is the point's derived seed.
    fn evaluate(&self, t: f64, seed: u64) -> Result<(f64, f64)>;
    fn metadata(&self) -> Metadata;
}

/// How [`L1Evaluator`] estimates the deviation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Nested Monte Carlo `‖·‖₁`; biased upward by the inner noise.
    L1Sampled,
    /// Split-sample `‖·‖₂`, unbiased in the square.
    L2Sampled,
    /// Exact inner average (Fourier observables), Monte Carlo over `x`.
    L1ExactInner,
    L2ExactInner,
}

impl Estimator {
    fn name(self) -> &'static str {
        match self {
            Estimator::L1Sampled => "l1-deviation",
            Estimator::L2Sampled => "l2-deviation-mc",
            Estimator::L1ExactInner => "l1-deviation-exact-inner",
            Estimator::L2ExactInner => "l2-deviation-exact-inner",
        }
    }
}

/// Monte Carlo `‖P_t f − ∫f‖` over points `x ~ μ`.
#[derive(Clone, Debug)]
pub struct L1Evaluator {
    pub flow: TorusWinding,
    pub f: Observable,
    pub nu: WeightMeasure,
    pub n_x: usize,
    pub n_r: usize,
    pub estimator: Estimator,
}

impl DeviationEvaluator for L1Evaluator {
    fn evaluate(&self, t: f64, seed: u64) -> Result<(f64, f64)> {
        let (flow, f, nu) = (&self.flow, &self.f, &self.nu);
        let d = match self.estimator {
            Estimator::L1Sampled => l1_deviation(flow, f, nu, t, self.n_x, self.n_r, seed)?,
            Estimator::L2Sampled => l2_deviation_mc(flow, f, nu, t, self.n_x, self.n_r, seed)?,
            Estimator::L1ExactInner => deviation_exact_inner(flow, f, nu, t, self.n_x, seed, false)?,
            Estimator::L2ExactInner => deviation_exact_inner(flow, f, nu, t, self.n_x, seed, true)?,
        };
        Ok((d.value, d.std_error))
    }

    fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("evaluator".into(), self.estimator.name().into());
        m.insert("flow".into(), json(&self.flow));
        m.insert("observable".into(), json(&self.f));
        m.insert("measure".into(), json(&self.nu));
        m.insert("n_x".into(), self.n_x.to_string());
        if matches!(self.estimator, Estimator::L1Sampled | Estimator::L2Sampled) {
            m.insert("n_r".into(), self.n_r.to_string());
        }
        if self.estimator == Estimator::L1Sampled {
            let bias = self.f.deviation_bound() / (self.n_r as f64).sqrt();
            m.insert("inner_bias_bound".into(), format!("{bias:?}"));
        }
        m
    }
}

/// Exact `‖P_t f‖₂` through the spectral measure of `f`; error 0.
#[derive(Clone, Debug)]
pub struct SpectralEvaluator {
    pub sigma: SpectralModel,
    pub nu: WeightMeasure,
}

impl DeviationEvaluator for SpectralEvaluator {
    fn evaluate(&self, t: f64, _seed: u64) -> Result<(f64, f64)> {
        Ok((l2_norm_spectral(&self.sigma, &self.nu, t)?, 0.0))
    }

    fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("evaluator".into(), "l2-norm-spectral".into());
        m.insert("spectrum".into(), json(&self.sigma));
        m.insert("measure".into(), json(&self.nu));
        m
    }
}

/// `|∬ρ(t(r−s)) dν dν − baseline|`. With sampling, the configured seed is
/// replaced by the per-point seed.
#[derive(Clone, Debug)]
pub struct PairEvaluator {
    pub rho: CorrelationModel,
    pub nu: WeightMeasure,
    pub method: PairMethod,
    pub baseline: f64,
}

impl DeviationEvaluator for PairEvaluator {
    fn evaluate(&self, t: f64, seed: u64) -> Result<(f64, f64)> {
        let method = match self.method {
            PairMethod::Sampling { count, .. } => PairMethod::Sampling { count, seed },
            PairMethod::Quadrature => PairMethod::Quadrature,
        };
        let p = correlation_pair_integral(&self.rho, &self.nu, t, method)?;
        Ok(((p.value - self.baseline).abs(), p.error))
    }

    fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("evaluator".into(), "pair-correlation".into());
        m.insert("correlation".into(), json(&self.rho));
        m.insert("measure".into(), json(&self.nu));
        m.insert("method".into(), json(&self.method));
        m.insert("baseline".into(), format!("{:?}", self.baseline));
        m
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("model types serialize")
}

/// Evaluates at each grid point with seed `derive(seed, k)`. A failing
/// point is recorded as NaN and the scan continues.
pub fn convergence_scan(evaluator: &dyn DeviationEvaluator, grid: &[f64], seed: u64) -> Result<DecayCurve> {
    check_grid(grid)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut errors = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        match evaluator.evaluate(t, derive_seed(seed, k as u64)) {
            Ok((v, e)) if v.is_finite() && e.is_finite() => {
                values.push(v);
                errors.push(e.max(0.0));
            }
            Ok(_) => {
                values.push(f64::NAN);
                errors.push(f64::NAN);
                failures.push(format!("{k}: non-finite value"));
            }
            Err(e) => {
                values.push(f64::NAN);
                errors.push(f64::NAN);
                failures.push(format!("{k}: {e}"));
            }
        }
    }
    let mut metadata = evaluator.metadata();
    metadata.insert("seed".into(), seed.to_string());
    metadata.insert("points".into(), grid.len().to_string());
    if !failures.is_empty() {
        metadata.insert("failed".into(), failures.join("; "));
    }
    Ok(DecayCurve { grid: grid.to_vec(), values, errors, metadata })
}
