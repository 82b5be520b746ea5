//! Spectral measures of cyclic subspaces and observables with finite
//! Fourier expansions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::TorusWinding;
use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub frequency: f64,
    pub mass: f64,
}

/// Piecewise-constant density on equal cells of `[lo, hi]`; `weights` are
/// the cell masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcPart {
    pub lo: f64,
    pub hi: f64,
    pub weights: Vec<f64>,
}

impl AcPart {
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn cell(&self) -> f64 {
        (self.hi - self.lo) / self.weights.len() as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.weights.len();
        (0..=n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / n as f64).collect()
    }

    /// Cell edges refined to pieces of width at most `resolution`, plus 0.
    fn pieces(&self, resolution: f64) -> Vec<f64> {
        let edges = self.edges();
        let span = self.hi - self.lo;
        let per_unit = if resolution > 0.0 { (MAX_PIECES as f64 / span).min(1.0 / resolution) } else { 0.0 };
        let mut pts = Vec::new();
        for w in edges.windows(2) {
            let k = ((w[1] - w[0]) * per_unit).ceil().max(1.0) as usize;
            pts.extend((0..k).map(|j| w[0] + (w[1] - w[0]) * j as f64 / k as f64));
        }
        pts.push(self.hi);
        if self.lo < 0.0 && self.hi > 0.0 {
            pts.push(0.0);
        }
        pts
    }

    pub fn density(&self, r: f64) -> f64 {
        if r < self.lo || r > self.hi {
            return 0.0;
        }
        let n = self.weights.len();
        let k = (((r - self.lo) / self.cell()) as usize).min(n - 1);
        self.weights[k] / self.cell()
    }
}

/// A probability measure σ on the frequency line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ac: Option<AcPart>,
}

/// Tolerance of the a.c. quadrature in spectral integrals.
pub const SPECTRAL_TOL: f64 = 1e-10;

/// Cap on the resolution pieces of an a.c. part.
const MAX_PIECES: usize = 1 << 18;

impl SpectralModel {
    pub fn new(atoms: Vec<Atom>, ac: Option<AcPart>) -> Result<Self> {
        let s = SpectralModel { atoms, ac };
        s.validate()?;
        Ok(s)
    }

    pub fn atom(frequency: f64) -> Self {
        SpectralModel { atoms: vec![Atom { frequency, mass: 1.0 }], ac: None }
    }

    /// `½(δ_w + δ_{−w})`.
    pub fn symmetric_pair(w: f64) -> Self {
        SpectralModel { atoms: vec![Atom { frequency: -w, mass: 0.5 }, Atom { frequency: w, mass: 0.5 }], ac: None }
    }

    /// Uniform density on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Self {
        SpectralModel { atoms: vec![], ac: Some(AcPart { lo, hi, weights: vec![1.0] }) }
    }

    /// Uniform on `[−1, 1]`, the `spectral-lebesgue` preset.
    pub fn lebesgue() -> Self {
        Self::uniform(-1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.atoms {
            if !(a.frequency.is_finite() && a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::Invalid("spectral atoms need finite frequency and positive mass".into()));
            }
        }
        if let Some(ac) = &self.ac {
            if !(ac.lo.is_finite() && ac.hi.is_finite() && ac.lo < ac.hi) || ac.weights.is_empty() {
                return Err(Error::Invalid("spectral density needs a bounded window and cells".into()));
            }
            if ac.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::Invalid("spectral density must be nonnegative".into()));
            }
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("spectral measure has mass {total}, expected 1")));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.ac.as_ref().map_or(0.0, |a| a.mass())
    }

    /// `ρ(t) = ∫ e^{irt} dσ(r)`, in closed form for both parts.
    pub fn correlation(&self, t: f64) -> Complex64 {
        let mut acc: Complex64 = self.atoms.iter().map(|a| Complex64::from_polar(a.mass, a.frequency * t)).sum();
        if let Some(ac) = &self.ac {
            let h = ac.cell();
            let damp = crate::measure::sinc(0.5 * t * h);
            for (k, w) in ac.weights.iter().enumerate().filter(|(_, w)| **w > 0.0) {
                acc += Complex64::from_polar(w * damp, t * (ac.lo + (k as f64 + 0.5) * h));
            }
        }
        acc
    }

    /// `∫ φ dσ`: atoms summed exactly, the density part by composite
    /// Gauss–Legendre doubling until successive estimates differ by at most
    /// `tol`. Cells are first cut into pieces no wider than `resolution`
    /// (the length scale on which `φ` varies; `f64::INFINITY` for none), and
    /// `r = 0` is always a breakpoint. Returns the value and the achieved
    /// bound.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64, resolution: f64, tol: f64) -> Result<(f64, f64)> {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass * phi(a.frequency)).sum();
        match &self.ac {
            None => Ok((atoms, 0.0)),
            Some(ac) => {
                let pts = ac.pieces(resolution);
                let r = quadrature::integrate_pieces(|r| ac.density(r) * phi(r), &pts, 16, tol, 24)?;
                Ok((atoms + r.value, r.error))
            }
        }
    }
}

/// Correlation of a spectral measure, `(re, im)` of `∫ e^{irt} dσ(r)`.
pub fn correlation_from_spectrum(sigma: &SpectralModel, t: f64) -> Result<Complex64> {
    sigma.validate()?;
    Ok(sigma.correlation(t))
}

/// `f(x) = Σ c_k e^{2πi k·x}` with finitely many terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub terms: Vec<FourierTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

impl FourierSeries {
    /// `√2 cos(2π x_j)` on the `d`-torus (`j` counted from 0).
    pub fn sqrt2_cos(d: usize, j: usize) -> Self {
        let mut plus = vec![0; d];
        plus[j] = 1;
        let minus = plus.iter().map(|x| -x).collect();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        FourierSeries { terms: vec![FourierTerm { k: plus, re: c, im: 0.0 }, FourierTerm { k: minus, re: c, im: 0.0 }] }
    }

    /// A single character `e^{2πi k·x}`.
    pub fn character(k: Vec<i64>) -> Self {
        FourierSeries { terms: vec![FourierTerm { k, re: 1.0, im: 0.0 }] }
    }

    pub fn mean(&self) -> Complex64 {
        self.terms.iter().filter(|t| t.k.iter().all(|x| *x == 0)).map(|t| Complex64::new(t.re, t.im)).sum()
    }

    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.re.hypot(t.im)).sum()
    }

    /// Coefficients with repeated indices summed, in first-seen order.
    pub fn merged(&self) -> Vec<(Vec<i64>, Complex64)> {
        let mut merged: Vec<(Vec<i64>, Complex64)> = Vec::new();
        for t in &self.terms {
            let c = Complex64::new(t.re, t.im);
            match merged.iter_mut().find(|(k, _)| *k == t.k) {
                Some((_, v)) => *v += c,
                None => merged.push((t.k.clone(), c)),
            }
        }
        merged
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.merged().iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let phase: f64 = t.k.iter().zip(x).map(|(k, xi)| *k as f64 * xi).sum();
                Complex64::new(t.re, t.im) * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .sum()
    }
}

/// Spectral measure of `f` under the winding: atoms at `2π k·α` with mass
/// `|c_k|²`, equal frequencies merged.
pub fn spectrum_of_observable(flow: &TorusWinding, f: &FourierSeries) -> Result<SpectralModel> {
    flow.validate()?;
    if f.terms.iter().any(|t| t.k.len() != flow.dimension()) {
        return Err(Error::Invalid("Fourier index dimension differs from the flow dimension".into()));
    }
    if f.mean().norm() > 0.0 {
        return Err(Error::Invalid("observable must have zero mean".into()));
    }
    let norm = f.l2_norm_sq();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("observable must have unit L2 norm, got {}", norm.sqrt())));
    }
    let coeffs = f.merged();
    let mut atoms: Vec<Atom> = coeffs
        .iter()
        .filter(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(k, c)| Atom {
            frequency: 2.0 * PI * k.iter().zip(&flow.alpha).map(|(k, a)| *k as f64 * a).sum::<f64>(),
            mass: c.norm_sqr(),
        })
        .collect();
    atoms.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match merged.last_mut() {
            Some(last) if (last.frequency - a.frequency).abs() <= 1e-12 * a.frequency.abs().max(1.0) => {
                last.mass += a.mass
            }
            _ => merged.push(a),
        }
    }
    Ok(SpectralModel { atoms: merged, ac: None })
}
