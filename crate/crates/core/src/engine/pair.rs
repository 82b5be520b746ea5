//! Pair correlations `(P_t f, P_t f) = ∬ ρ(t(r − s)) dν(r) dν(s)` and the
//! almost-mixing probe built on them.

use serde::{Deserialize, Serialize};

use super::scan::{DecayCurve, Metadata};
use crate::error::{Error, Result};
use crate::flow::{arc_kinks, CorrelationModel, SpikeProfile};
use crate::measure::{Density, WeightMeasure};
use crate::quadrature;
use crate::rng::{derive_seed, map_shards, shard_ranges, Moments, Stream};

/// How to integrate over the law of `r − s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PairMethod {
    /// Monte Carlo over independent pairs `(r, s)`.
    Sampling { count: usize, seed: u64 },
    /// Piecewise Gauss–Legendre against the difference density; needs a
    /// density weight.
    Quadrature,
}

/// Value with a standard error (sampling) or achieved bound (quadrature).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub value: f64,
    pub error: f64,
}

const PAIR_TOL: f64 = 1e-11;
const PAIR_DOUBLINGS: u32 = 20;

fn density_of(nu: &WeightMeasure) -> Result<Density> {
    nu.as_density().ok_or_else(|| Error::Invalid("the quadrature path needs a density weight".into()))
}

/// Breakpoints in `[-w, w]` of `u ↦ g(u)·ρ(tu)`.
fn pair_breakpoints(d: &Density, rho: &CorrelationModel, t: f64) -> Vec<f64> {
    let (lo, hi) = d.support();
    let w = hi - lo;
    let mut pts: Vec<f64> = d.difference_kinks().into_iter().filter(|u| u.abs() <= w).collect();
    pts.extend([-w, w]);
    match rho {
        CorrelationModel::SpikeProfile(p) => {
            for k in p.kinks() {
                let u = k / t;
                if u < w {
                    pts.extend([u, -u]);
                }
            }
        }
        CorrelationModel::ClosedForm { flow, a, b } => {
            for ((ak, bk), alpha) in a.sides.iter().zip(&b.sides).zip(&flow.alpha) {
                arc_kinks(*ak, *bk, 0.0, t * alpha, -w, w, &mut pts);
            }
        }
        CorrelationModel::Bochner { .. } => {}
    }
    pts
}

/// `∬ ρ(t(r − s)) dν(r) dν(s)`.
pub fn correlation_pair_integral(
    rho: &CorrelationModel,
    nu: &WeightMeasure,
    t: f64,
    method: PairMethod,
) -> Result<PairEstimate> {
    rho.validate()?;
    nu.require_weight()?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Invalid("scale t must be positive".into()));
    }
    match method {
        PairMethod::Quadrature => {
            let d = density_of(nu)?;
            let pts = pair_breakpoints(&d, rho, t);
            let r = quadrature::integrate_pieces(
                |u| d.difference_density(u) * rho.evaluate(t * u),
                &pts,
                16,
                PAIR_TOL,
                PAIR_DOUBLINGS,
            )?;
            Ok(PairEstimate { value: r.value, error: r.error })
        }
        PairMethod::Sampling { count, seed } => {
            let m = sample_differences(nu, count, seed, |u| rho.evaluate(t * u));
            Ok(PairEstimate { value: m.mean, error: m.std_error() })
        }
    }
}

/// `count` draws of `r − s` with `r, s` independent, in shard order.
fn draw_differences(nu: &WeightMeasure, count: usize, seed: u64) -> Vec<f64> {
    let sampler = nu.sampler();
    let shards = shard_ranges(count);
    map_shards(shards.len(), |k| {
        let mut stream = Stream::new(derive_seed(seed, k as u64));
        (0..shards[k].1)
            .map(|_| {
                let r = sampler.draw(&mut stream);
                r - sampler.draw(&mut stream)
            })
            .collect::<Vec<f64>>()
    })
    .concat()
}

/// Mean of `φ(r − s)` over `count` independent pairs.
fn sample_differences(nu: &WeightMeasure, count: usize, seed: u64, phi: impl Fn(f64) -> f64) -> Moments {
    let mut m = Moments::default();
    draw_differences(nu, count, seed).into_iter().for_each(|u| m.push(phi(u)));
    m
}

/// `ν×ν{r − s ∈ [lo, hi]}`.
pub fn difference_mass(nu: &WeightMeasure, lo: f64, hi: f64, method: PairMethod) -> Result<PairEstimate> {
    nu.require_weight()?;
    match method {
        PairMethod::Quadrature => {
            let d = density_of(nu)?;
            let w = d.support().1 - d.support().0;
            let (a, b) = (lo.max(-w), hi.min(w));
            if a >= b {
                return Ok(PairEstimate { value: 0.0, error: 0.0 });
            }
            let mut pts: Vec<f64> = d.difference_kinks().into_iter().filter(|u| *u > a && *u < b).collect();
            pts.extend([a, b]);
            let r = quadrature::integrate_pieces(|u| d.difference_density(u), &pts, 16, PAIR_TOL, PAIR_DOUBLINGS)?;
            Ok(PairEstimate { value: r.value, error: r.error })
        }
        PairMethod::Sampling { count, seed } => {
            let m = sample_differences(nu, count, seed, |u| if u >= lo && u <= hi { 1.0 } else { 0.0 });
            Ok(PairEstimate { value: m.mean, error: m.std_error() })
        }
    }
}

/// Output of [`almost_mixing_probe`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    /// `|(P_t f, P_t f) − c|` per grid point.
    pub curve: DecayCurve,
    /// `ν×ν{|t(r − s)| < band}` per grid point.
    pub band_mass: Vec<f64>,
    /// Per grid point, `(j, ν×ν{t(r − s) ∈ I_j})` for every spike with
    /// nonzero captured mass.
    pub spike_mass: Vec<Vec<(usize, f64)>>,
}

/// Deviation of the pair correlation from the baseline along `grid`.
/// With sampling, grid point `k` uses the sub-seed `derive(seed, k)`.
pub fn almost_mixing_probe(
    profile: &SpikeProfile,
    nu: &WeightMeasure,
    grid: &[f64],
    band: f64,
    method: PairMethod,
) -> Result<ProbeReport> {
    profile.validate()?;
    nu.require_weight()?;
    super::scan::check_grid(grid)?;
    if !(band > 0.0) {
        return Err(Error::Invalid("band half-width must be positive".into()));
    }
    let rho = CorrelationModel::SpikeProfile(profile.clone());
    let (hull_lo, hull_hi) = nu.support_hull();
    let reach = hull_hi - hull_lo;
    let mut values = Vec::with_capacity(grid.len());
    let mut errors = Vec::with_capacity(grid.len());
    let mut band_mass = Vec::with_capacity(grid.len());
    let mut spike_mass = Vec::with_capacity(grid.len());
    for (k, &t) in grid.iter().enumerate() {
        match method {
            PairMethod::Quadrature => {
                let pair = correlation_pair_integral(&rho, nu, t, PairMethod::Quadrature)?;
                values.push((pair.value - profile.baseline).abs());
                errors.push(pair.error);
                band_mass.push(difference_mass(nu, -band / t, band / t, PairMethod::Quadrature)?.value);
                let mut captured = Vec::new();
                for (j, s) in profile.spikes.iter().enumerate() {
                    let lo = (s.center - s.half_width) / t;
                    if lo > reach {
                        break;
                    }
                    let m = difference_mass(nu, lo, (s.center + s.half_width) / t, PairMethod::Quadrature)?.value;
                    if m > 0.0 {
                        captured.push((j, m));
                    }
                }
                spike_mass.push(captured);
            }
            PairMethod::Sampling { count, seed } => {
                // One set of differences per grid point serves all three
                // statistics.
                let diffs = draw_differences(nu, count, derive_seed(seed, k as u64));
                let mut pair = Moments::default();
                let mut in_band = 0usize;
                let mut hits = vec![0usize; profile.spikes.len()];
                for &u in &diffs {
                    let v = t * u;
                    pair.push(profile.evaluate(v));
                    if v.abs() < band {
                        in_band += 1;
                    }
                    let j = profile.spikes.partition_point(|s| s.center + s.half_width < v);
                    if let Some(s) = profile.spikes.get(j) {
                        if v >= s.center - s.half_width {
                            hits[j] += 1;
                        }
                    }
                }
                let n = diffs.len().max(1) as f64;
                values.push((pair.mean - profile.baseline).abs());
                errors.push(pair.std_error());
                band_mass.push(in_band as f64 / n);
                spike_mass
                    .push(hits.iter().enumerate().filter(|(_, h)| **h > 0).map(|(j, h)| (j, *h as f64 / n)).collect());
            }
        }
    }
    let mut metadata = Metadata::new();
    metadata.insert("evaluator".into(), "almost-mixing-probe".into());
    metadata.insert("band".into(), format!("{band:?}"));
    metadata.insert("spikes".into(), profile.spikes.len().to_string());
    metadata.insert("baseline".into(), format!("{:?}", profile.baseline));
    let curve = DecayCurve { grid: grid.to_vec(), values, errors, metadata };
    Ok(ProbeReport { curve, band_mass, spike_mass })
}
