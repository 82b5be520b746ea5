//! Homothetic averaging operators `P_t f(x) = ∫ f(T_{rt}x) dν(r)` and their
//! deviations from the mean.

mod pair;
mod scan;
mod spectral;

pub use pair::{almost_mixing_probe, correlation_pair_integral, difference_mass, PairMethod, ProbeReport};
pub use scan::{
    convergence_scan, geometric_grid, DecayCurve, DeviationEvaluator, Estimator, L1Evaluator, Metadata, PairEvaluator,
    SpectralEvaluator,
};
pub use spectral::{holder_descent_check, holder_descent_check_with, l2_norm_spectral, HolderReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{BoxSet, FourierSeries, TorusWinding};
use crate::measure::WeightMeasure;
use crate::rng::{derive_seed, map_shards, shard_ranges, Moments, Stream};

/// A bounded function on the torus with known mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Observable {
    Constant {
        value: f64,
    },
    Fourier(FourierSeries),
    /// Indicator of a box `Π [0, a_k)`.
    Indicator(BoxSet),
}

impl Observable {
    pub fn mean(&self) -> Complex64 {
        match self {
            Observable::Constant { value } => Complex64::new(*value, 0.0),
            Observable::Fourier(f) => f.mean(),
            Observable::Indicator(b) => Complex64::new(b.measure(), 0.0),
        }
    }

    /// Upper bound on `sup |f − ∫f dμ|`.
    pub fn deviation_bound(&self) -> f64 {
        match self {
            Observable::Constant { .. } => 0.0,
            Observable::Fourier(f) => f.sup_bound() + f.mean().norm(),
            Observable::Indicator(b) => b.measure().max(1.0 - b.measure()),
        }
    }

    fn dimension(&self) -> Option<usize> {
        match self {
            Observable::Constant { .. } => None,
            Observable::Fourier(f) => f.terms.first().map(|t| t.k.len()),
            Observable::Indicator(b) => Some(b.sides.len()),
        }
    }

    fn check(&self, flow: &TorusWinding) -> Result<()> {
        flow.validate()?;
        if let Some(d) = self.dimension() {
            if d != flow.dimension() {
                return Err(Error::Invalid("observable dimension differs from the flow dimension".into()));
            }
        }
        match self {
            Observable::Indicator(b) => b.validate(),
            Observable::Fourier(f) if f.terms.iter().any(|t| t.k.len() != flow.dimension()) => {
                Err(Error::Invalid("Fourier indices have inconsistent dimensions".into()))
            }
            _ => Ok(()),
        }
    }

    /// `s ↦ f(T_s x)` specialised to a flow.
    fn along<'a>(&'a self, flow: &'a TorusWinding) -> Orbit<'a> {
        match self {
            Observable::Constant { value } => Orbit::Constant(*value),
            Observable::Fourier(f) => {
                // Terms `k` and `−k` share one phase evaluation.
                let mut coeffs = f.merged();
                let mut pairs = Vec::new();
                while let Some((k, c)) = coeffs.pop() {
                    let neg: Vec<i64> = k.iter().map(|x| -x).collect();
                    let minus = match coeffs.iter().position(|(j, _)| *j == neg) {
                        Some(at) if neg != k => coeffs.remove(at).1,
                        _ => Complex64::new(0.0, 0.0),
                    };
                    let ka: f64 = k.iter().zip(&flow.alpha).map(|(k, a)| *k as f64 * a).sum();
                    pairs.push(FourierPair { k: k.iter().map(|x| *x as f64).collect(), ka, plus: c, minus });
                }
                Orbit::Fourier(pairs)
            }
            Observable::Indicator(b) => Orbit::Indicator(b, flow),
        }
    }
}

/// `plus·e^{2πiθ} + minus·e^{−2πiθ}` with `θ = k·x + s·k·α`.
struct FourierPair {
    k: Vec<f64>,
    ka: f64,
    plus: Complex64,
    minus: Complex64,
}

enum Orbit<'a> {
    Constant(f64),
    Fourier(Vec<FourierPair>),
    Indicator(&'a BoxSet, &'a TorusWinding),
}

fn unit(phase: f64) -> Complex64 {
    let (s, c) = (2.0 * std::f64::consts::PI * (phase - phase.floor())).sin_cos();
    Complex64::new(c, s)
}

impl<'a> Orbit<'a> {
    /// Fixes the starting point `x`.
    fn at(&self, x: &[f64]) -> PointOrbit<'a> {
        match self {
            Orbit::Constant(v) => PointOrbit::Constant(*v),
            Orbit::Fourier(pairs) => PointOrbit::Fourier(
                pairs
                    .iter()
                    .map(|p| {
                        let e = unit(p.k.iter().zip(x).map(|(k, x)| k * x).sum());
                        (p.ka, p.plus * e, p.minus * e.conj())
                    })
                    .collect(),
            ),
            Orbit::Indicator(b, flow) => PointOrbit::Indicator(b, flow, x.to_vec()),
        }
    }
}

enum PointOrbit<'a> {
    Constant(f64),
    /// `(k·α, a, b)`: `a·e^{2πi s k·α} + b·e^{−2πi s k·α}`.
    Fourier(Vec<(f64, Complex64, Complex64)>),
    Indicator(&'a BoxSet, &'a TorusWinding, Vec<f64>),
}

impl PointOrbit<'_> {
    #[inline]
    fn value(&self, s: f64) -> Complex64 {
        match self {
            PointOrbit::Constant(v) => Complex64::new(*v, 0.0),
            PointOrbit::Fourier(terms) => terms
                .iter()
                .map(|(ka, a, b)| {
                    let e = unit(s * ka);
                    a * e + b * e.conj()
                })
                .sum(),
            PointOrbit::Indicator(b, flow, x) => {
                let inside =
                    b.sides.iter().zip(x).zip(&flow.alpha).all(|((a, xk), ak)| (xk + s * ak).rem_euclid(1.0) < *a);
                Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            }
        }
    }
}

/// Monte Carlo value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub re: f64,
    pub im: f64,
    pub std_error: f64,
}

/// `P_t f(x)` by Monte Carlo over `r ~ ν`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_average_pointwise(
    flow: &TorusWinding,
    f: &Observable,
    nu: &WeightMeasure,
    t: f64,
    x: &[f64],
    n_r: usize,
    seed: u64,
) -> Result<Estimate> {
    nu.require_weight()?;
    f.check(flow)?;
    if x.len() != flow.dimension() || n_r == 0 {
        return Err(Error::Invalid("need a point of the flow's dimension and at least one sample".into()));
    }
    let orbit = f.along(flow).at(x);
    let sampler = nu.sampler();
    let shards = shard_ranges(n_r);
    let parts = map_shards(shards.len(), |k| {
        let mut stream = Stream::new(derive_seed(seed, k as u64));
        let (mut re, mut im) = (Moments::default(), Moments::default());
        for _ in 0..shards[k].1 {
            let v = orbit.value(sampler.draw(&mut stream) * t);
            re.push(v.re);
            im.push(v.im);
        }
        (re, im)
    });
    let (re, im) =
        parts.into_iter().fold((Moments::default(), Moments::default()), |(a, b), (c, d)| (a.merge(c), b.merge(d)));
    Ok(Estimate { re: re.mean, im: im.mean, std_error: re.std_error().hypot(im.std_error()) })
}

/// Result of a nested Monte Carlo deviation estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub value: f64,
    /// Standard error of the outer average.
    pub std_error: f64,
    /// Upper bound on the upward bias from estimating each `P_t f(x)` with
    /// finitely many inner samples: `sup|f − ∫f| / √n_r`.
    pub inner_bias_bound: f64,
}

fn check_counts(n_x: usize, n_r: usize) -> Result<()> {
    if n_x < 2 || n_r < 2 {
        return Err(Error::Invalid("need at least two outer and two inner samples".into()));
    }
    Ok(())
}

/// Runs `per_point` for each outer index with its own derived stream and
/// an `x` drawn uniformly from the torus, reducing in index order.
fn outer_loop(
    n_x: usize,
    dimension: usize,
    seed: u64,
    per_point: impl Fn(&[f64], &mut Stream) -> f64 + Sync + Send,
) -> Moments {
    let shards = shard_ranges(n_x);
    map_shards(shards.len(), |k| {
        let (start, len) = shards[k];
        let mut m = Moments::default();
        let mut x = vec![0.0; dimension];
        for i in start..start + len {
            let mut stream = Stream::new(derive_seed(seed, i as u64));
            x.iter_mut().for_each(|xk| *xk = stream.uniform());
            m.push(per_point(&x, &mut stream));
        }
        m
    })
    .into_iter()
    .fold(Moments::default(), Moments::merge)
}

/// `‖P_t f − ∫f dμ‖₁` by nested Monte Carlo: `n_x` points `x ~ μ`, each
/// with `n_r` weights `r ~ ν`.
#[allow(clippy::too_many_arguments)]
pub fn l1_deviation(
    flow: &TorusWinding,
    f: &Observable,
    nu: &WeightMeasure,
    t: f64,
    n_x: usize,
    n_r: usize,
    seed: u64,
) -> Result<Deviation> {
    nu.require_weight()?;
    f.check(flow)?;
    check_counts(n_x, n_r)?;
    let orbit = f.along(flow);
    let sampler = nu.sampler();
    let mean = f.mean();
    if let Observable::Constant { .. } = f {
        return Ok(Deviation { value: 0.0, std_error: 0.0, inner_bias_bound: 0.0 });
    }
    let m = outer_loop(n_x, flow.dimension(), seed, |x, stream| {
        let at = orbit.at(x);
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n_r {
            acc += at.value(sampler.draw(stream) * t);
        }
        (acc / n_r as f64 - mean).norm()
    });
    Ok(Deviation {
        value: m.mean,
        std_error: m.std_error(),
        inner_bias_bound: f.deviation_bound() / (n_r as f64).sqrt(),
    })
}

/// `‖P_t f − ∫f dμ‖₂` by Monte Carlo without inner bias: each `x` gets two
/// independent inner means `A`, `B`, and `Re(A·B̄)` is unbiased for
/// `|P_t f(x) − ∫f|²`. The reported value is the square root of the mean,
/// clamped at zero, with a delta-method error.
#[allow(clippy::too_many_arguments)]
pub fn l2_deviation_mc(
    flow: &TorusWinding,
    f: &Observable,
    nu: &WeightMeasure,
    t: f64,
    n_x: usize,
    n_r: usize,
    seed: u64,
) -> Result<Deviation> {
    nu.require_weight()?;
    f.check(flow)?;
    check_counts(n_x, n_r)?;
    let orbit = f.along(flow);
    let sampler = nu.sampler();
    let mean = f.mean();
    let half = n_r / 2;
    let m = outer_loop(n_x, flow.dimension(), seed, |x, stream| {
        let at = orbit.at(x);
        let mut inner = || {
            let mut acc = Complex64::new(0.0, 0.0);
            for _ in 0..half {
                acc += at.value(sampler.draw(stream) * t);
            }
            acc / half as f64 - mean
        };
        let a = inner();
        let b = inner();
        (a * b.conj()).re
    });
    let sq = m.mean.max(0.0);
    let value = sq.sqrt();
    let std_error = if value > 0.0 { m.std_error() / (2.0 * value) } else { m.std_error().sqrt() };
    Ok(Deviation { value, std_error, inner_bias_bound: 0.0 })
}

/// `‖P_t f − ∫f dμ‖_p` (`p` = 1 or 2) for a Fourier observable, with the
/// inner average done exactly through `P_t e_k = ν̂(2π t k·α) e_k`; only the
/// outer average over `x` is Monte Carlo, so there is no inner bias.
#[allow(clippy::too_many_arguments)]
pub fn deviation_exact_inner(
    flow: &TorusWinding,
    f: &Observable,
    nu: &WeightMeasure,
    t: f64,
    n_x: usize,
    seed: u64,
    squared: bool,
) -> Result<Deviation> {
    nu.require_weight()?;
    f.check(flow)?;
    check_counts(n_x, 2)?;
    let pairs = match f.along(flow) {
        Orbit::Constant(_) => return Ok(Deviation { value: 0.0, std_error: 0.0, inner_bias_bound: 0.0 }),
        Orbit::Fourier(pairs) => pairs,
        Orbit::Indicator(..) => {
            return Err(Error::Invalid("exact inner averages need a Fourier observable".into()));
        }
    };
    let mut weighted = Vec::with_capacity(pairs.len());
    for p in pairs {
        let m = Complex64::from(nu.char_fn(2.0 * std::f64::consts::PI * t * p.ka)?);
        weighted.push(FourierPair { plus: p.plus * m, minus: p.minus * m.conj(), ..p });
    }
    let averaged = Orbit::Fourier(weighted);
    let mean = f.mean();
    let m = outer_loop(n_x, flow.dimension(), seed, |x, _| {
        let d = (averaged.at(x).value(0.0) - mean).norm();
        if squared {
            d * d
        } else {
            d
        }
    });
    let (value, std_error) = if squared {
        let v = m.mean.max(0.0).sqrt();
        (v, if v > 0.0 { m.std_error() / (2.0 * v) } else { m.std_error().sqrt() })
    } else {
        (m.mean, m.std_error())
    };
    Ok(Deviation { value, std_error, inner_bias_bound: 0.0 })
}
