//! Correlation functions `ρ(t) = (T_t f, g)`.

use serde::{Deserialize, Serialize};

use super::{arc_correlation, BoxSet, SpectralModel, TorusWinding};
use crate::error::{Error, Result};

/// Triangular bump of the given half-width and apex height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

impl Spike {
    fn value(&self, t: f64) -> f64 {
        let d = (t - self.center).abs();
        if d >= self.half_width {
            0.0
        } else {
            self.height * (1.0 - d / self.half_width)
        }
    }
}

/// Synthetic even correlation profile: `baseline` plus a bump at the
/// origin plus triangular spikes at `±h_j`.
///
/// This models where a flow deviates from mixing; it is not required to be
/// positive definite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeProfile {
    pub baseline: f64,
    /// Bump at `t = 0`, giving `ρ(0) = baseline + diagonal.height`.
    pub diagonal: Spike,
    /// Centers strictly increasing.
    pub spikes: Vec<Spike>,
    /// Declared lower bound on `h_{j+1}/h_j`.
    pub growth: f64,
}

impl SpikeProfile {
    /// Spikes at `h_j = first·growth^j` up to `last`, with a unit bump at the
    /// origin and zero baseline.
    pub fn geometric(first: f64, growth: f64, half_width: f64, height: f64, last: f64) -> Result<Self> {
        if !(first > 0.0 && growth > 1.0 && last >= first) {
            return Err(Error::Invalid("geometric spikes need first > 0, growth > 1 and last >= first".into()));
        }
        let mut spikes = Vec::new();
        let mut h = first;
        while h <= last * (1.0 + 1e-12) {
            spikes.push(Spike { center: h, half_width, height });
            h *= growth;
        }
        let p = SpikeProfile { baseline: 0.0, diagonal: unit_diagonal(), spikes, growth };
        p.validate()?;
        Ok(p)
    }

    /// Spikes at `h_j = j·step`, `j = 1..=count`. The declared growth is the
    /// smallest consecutive ratio, `count/(count−1)`.
    pub fn progression(step: f64, half_width: f64, height: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || count < 2 {
            return Err(Error::Invalid("progression spikes need step > 0 and at least two spikes".into()));
        }
        let spikes = (1..=count).map(|j| Spike { center: j as f64 * step, half_width, height }).collect();
        let growth = count as f64 / (count - 1) as f64;
        let p = SpikeProfile { baseline: 0.0, diagonal: unit_diagonal(), spikes, growth };
        p.validate()?;
        Ok(p)
    }

    pub fn without_spikes(&self) -> Self {
        let mut p = self.clone();
        p.spikes.iter_mut().for_each(|s| s.height = 0.0);
        p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if !self.baseline.is_finite() || !(self.growth > 1.0) {
            return bad("spike profile needs a finite baseline and growth > 1");
        }
        if self.diagonal.center != 0.0 || !(self.diagonal.half_width > 0.0) || !self.diagonal.height.is_finite() {
            return bad("diagonal bump must be centered at 0 with positive width");
        }
        let rho0 = self.at_zero();
        if !(rho0 > 0.0) {
            return bad("spike profile needs rho(0) > 0");
        }
        let mut prev_end = self.diagonal.half_width;
        let mut prev_center: Option<f64> = None;
        for s in &self.spikes {
            if !(s.half_width > 0.0 && s.height.is_finite() && s.center.is_finite()) {
                return bad("spikes need positive width and finite height");
            }
            if let Some(c) = prev_center {
                if s.center <= c || s.center < c * self.growth * (1.0 - 1e-12) {
                    return bad("spike centers must increase by at least the declared growth factor");
                }
            }
            if s.center - s.half_width < prev_end {
                return bad("spikes must not overlap each other or the diagonal bump");
            }
            if (self.baseline + s.height).abs() > rho0 {
                return bad("spike apex exceeds rho(0)");
            }
            prev_end = s.center + s.half_width;
            prev_center = Some(s.center);
        }
        if self.baseline.abs() > rho0 {
            return bad("baseline exceeds rho(0)");
        }
        Ok(())
    }

    pub fn at_zero(&self) -> f64 {
        self.baseline + self.diagonal.height
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let t = t.abs();
        let mut v = self.baseline + self.diagonal.value(t);
        let k = self.spikes.partition_point(|s| s.center + s.half_width <= t);
        if let Some(s) = self.spikes.get(k) {
            v += s.value(t);
        }
        v
    }

    /// Points of `[0, ∞)` where the profile is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out = vec![0.0, self.diagonal.half_width];
        for s in &self.spikes {
            out.extend([s.center - s.half_width, s.center, s.center + s.half_width]);
        }
        out
    }
}

fn unit_diagonal() -> Spike {
    Spike { center: 0.0, half_width: 1.0, height: 1.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum CorrelationModel {
    /// `μ(A ∩ T_t B)` on a winding.
    ClosedForm {
        flow: TorusWinding,
        a: BoxSet,
        b: BoxSet,
    },
    /// `∫ e^{irt} dσ(r)`.
    Bochner {
        spectrum: SpectralModel,
    },
    SpikeProfile(SpikeProfile),
}

impl CorrelationModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelationModel::ClosedForm { flow, a, b } => {
                flow.validate()?;
                arc_correlation(flow, a, b, 0.0).map(|_| ())
            }
            CorrelationModel::Bochner { spectrum } => spectrum.validate(),
            CorrelationModel::SpikeProfile(p) => p.validate(),
        }
    }

    /// Real correlation at `t`. Bochner models return the real part.
    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            CorrelationModel::ClosedForm { flow, a, b } => super::box_overlap(a, b, &flow.displacement(t)),
            CorrelationModel::Bochner { spectrum } => spectrum.correlation(t).re,
            CorrelationModel::SpikeProfile(p) => p.evaluate(t),
        }
    }
}

/// Validated evaluation of a correlation model.
pub fn evaluate_correlation(model: &CorrelationModel, t: f64) -> Result<f64> {
    model.validate()?;
    Ok(model.evaluate(t))
}
