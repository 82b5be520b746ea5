//! Absolutely continuous weights.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::quadrature;

/// Grid resolution used for inverse-CDF sampling when no closed-form
/// quantile exists.
pub const GRID_CELLS: usize = 1 << 14;

/// A normalized probability density with bounded support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Density {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Triangular {
        lo: f64,
        mode: f64,
        hi: f64,
    },
    /// Normal law conditioned on `[lo, hi]`.
    TruncatedGaussian {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
    /// Piecewise constant on equal cells of `[lo, hi]`; `weights` are the
    /// cell probabilities.
    Piecewise {
        lo: f64,
        hi: f64,
        weights: Vec<f64>,
    },
}

/// `sin(x)/x`.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(sin x - x cos x) / x^2`, the odd moment kernel of a centered segment.
fn odd_kernel(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x / 3.0 - x * x2 / 30.0 + x * x2 * x2 / 840.0
    } else {
        (x.sin() - x * x.cos()) / (x * x)
    }
}

/// Fourier integral of a linear function on `[u, v]` taking values
/// `fu`, `fv` at the ends.
fn linear_segment(xi: f64, u: f64, v: f64, fu: f64, fv: f64) -> Complex64 {
    let h = v - u;
    if h <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let x = 0.5 * xi * h;
    let even = 0.5 * (fu + fv) * h * sinc(x);
    let odd = (fv - fu) * 0.5 * h * odd_kernel(x);
    Complex64::from_polar(1.0, xi * 0.5 * (u + v)) * Complex64::new(even, odd)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl Density {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Density::Uniform { lo, hi }
    }

    /// Pushforward under `x ↦ factor·x` for `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Density {
        match self {
            Density::Uniform { lo, hi } => Density::Uniform { lo: lo * factor, hi: hi * factor },
            Density::Triangular { lo, mode, hi } => {
                Density::Triangular { lo: lo * factor, mode: mode * factor, hi: hi * factor }
            }
            Density::TruncatedGaussian { mean, sd, lo, hi } => {
                Density::TruncatedGaussian { mean: mean * factor, sd: sd * factor, lo: lo * factor, hi: hi * factor }
            }
            Density::Piecewise { lo, hi, weights } => {
                Density::Piecewise { lo: lo * factor, hi: hi * factor, weights: weights.clone() }
            }
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        let bad = |m: &str| Err(MeasureError::Invalid(m.to_string()));
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("density support must be a finite interval with lo < hi");
        }
        match self {
            Density::Uniform { .. } => Ok(()),
            Density::Triangular { lo, mode, hi } => {
                if mode.is_finite() && lo <= mode && mode <= hi {
                    Ok(())
                } else {
                    bad("triangular mode must lie in [lo, hi]")
                }
            }
            Density::TruncatedGaussian { mean, sd, .. } => {
                if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) {
                    return bad("truncated gaussian needs finite mean and sd > 0");
                }
                if self.gaussian_mass() <= 1e-300 {
                    return bad("truncation window carries no gaussian mass");
                }
                Ok(())
            }
            Density::Piecewise { weights, .. } => {
                if weights.is_empty() {
                    return bad("piecewise density needs at least one cell");
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return bad("piecewise weights must be finite and nonnegative");
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(MeasureError::Invalid(format!("piecewise weights sum to {total}, expected 1")));
                }
                Ok(())
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Density::Uniform { lo, hi }
            | Density::Triangular { lo, hi, .. }
            | Density::TruncatedGaussian { lo, hi, .. }
            | Density::Piecewise { lo, hi, .. } => (lo, hi),
        }
    }

    fn gaussian_mass(&self) -> f64 {
        match *self {
            Density::TruncatedGaussian { mean, sd, lo, hi } => {
                std_normal_cdf((hi - mean) / sd) - std_normal_cdf((lo - mean) / sd)
            }
            _ => 1.0,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match self {
            Density::Uniform { .. } => 1.0 / (hi - lo),
            Density::Triangular { mode, .. } => {
                let peak = 2.0 / (hi - lo);
                if x < *mode {
                    peak * (x - lo) / (mode - lo)
                } else if x > *mode {
                    peak * (hi - x) / (hi - mode)
                } else {
                    peak
                }
            }
            Density::TruncatedGaussian { mean, sd, .. } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt() * self.gaussian_mass())
            }
            Density::Piecewise { weights, .. } => {
                let n = weights.len();
                let h = (hi - lo) / n as f64;
                let k = (((x - lo) / h) as usize).min(n - 1);
                weights[k] / h
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match self {
            Density::Uniform { .. } => (x - lo) / (hi - lo),
            Density::Triangular { mode, .. } => {
                if x <= *mode {
                    (x - lo) * (x - lo) / ((hi - lo) * (mode - lo))
                } else {
                    1.0 - (hi - x) * (hi - x) / ((hi - lo) * (hi - mode))
                }
            }
            Density::TruncatedGaussian { mean, sd, .. } => {
                ((std_normal_cdf((x - mean) / sd) - std_normal_cdf((lo - mean) / sd)) / self.gaussian_mass())
                    .clamp(0.0, 1.0)
            }
            Density::Piecewise { weights, .. } => {
                let n = weights.len();
                let h = (hi - lo) / n as f64;
                let pos = (x - lo) / h;
                let k = (pos as usize).min(n - 1);
                let below: f64 = weights[..k].iter().sum();
                (below + weights[k] * (pos - k as f64)).clamp(0.0, 1.0)
            }
        }
    }

    /// `∫ e^{iξx} h(x) dx`.
    pub fn char_fn(&self, xi: f64) -> Result<Complex64, MeasureError> {
        if xi == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let (lo, hi) = self.support();
        Ok(match self {
            Density::Uniform { .. } => Complex64::from_polar(sinc(0.5 * xi * (hi - lo)), 0.5 * xi * (lo + hi)),
            Density::Triangular { mode, .. } => {
                let peak = 2.0 / (hi - lo);
                linear_segment(xi, lo, *mode, 0.0, peak) + linear_segment(xi, *mode, hi, peak, 0.0)
            }
            Density::Piecewise { weights, .. } => {
                let h = (hi - lo) / weights.len() as f64;
                let damp = sinc(0.5 * xi * h);
                weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(k, w)| Complex64::from_polar(w * damp, xi * (lo + (k as f64 + 0.5) * h)))
                    .sum()
            }
            Density::TruncatedGaussian { .. } => {
                let r = quadrature::integrate(|x| Complex64::from_polar(self.pdf(x), xi * x), lo, hi, 64, 1e-10, 22)
                    .map_err(|e| MeasureError::Accuracy { achieved: e.achieved })?;
                r.value
            }
        })
    }

    /// Points where the density or one of its derivatives jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        match self {
            Density::Uniform { .. } | Density::TruncatedGaussian { .. } => vec![lo, hi],
            Density::Triangular { mode, .. } => vec![lo, *mode, hi],
            Density::Piecewise { weights, .. } => {
                let n = weights.len();
                (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
            }
        }
    }

    /// Density of `r - s` for independent `r, s` drawn from `self`:
    /// `g(u) = ∫ h(s) h(s + u) ds`.
    pub fn difference_density(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        let w = hi - lo;
        if u.abs() >= w {
            return 0.0;
        }
        let a = lo.max(lo - u);
        let b = hi.min(hi - u);
        match self {
            Density::Uniform { .. } => (w - u.abs()) / (w * w),
            Density::TruncatedGaussian { mean, sd, .. } => {
                // pdf(s)·pdf(s + u) is a Gaussian in s centred at mean − u/2.
                let z = self.gaussian_mass();
                let (za, zb) = ((a - mean + 0.5 * u) / sd, (b - mean + 0.5 * u) / sd);
                let span = if za > 0.0 { libm::erfc(za) - libm::erfc(zb) } else { libm::erf(zb) - libm::erf(za) };
                (-0.25 * (u / sd).powi(2)).exp() * span / (4.0 * std::f64::consts::PI.sqrt() * sd * z * z)
            }
            _ => {
                // Piecewise polynomial of degree ≤ 2 between breakpoints.
                let mut pts: Vec<f64> = self.breakpoints();
                pts.extend(self.breakpoints().iter().map(|p| p - u));
                pts.retain(|p| *p >= a && *p <= b);
                pts.extend([a, b]);
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                let f = |s: f64| self.pdf(s) * self.pdf(s + u);
                let g = quadrature::rule(4);
                pts.windows(2).map(|p| g.apply(&f, p[0], p[1])).sum()
            }
        }
    }

    /// Points where the difference density is not smooth.
    pub fn difference_kinks(&self) -> Vec<f64> {
        let b = self.breakpoints();
        let mut out = Vec::with_capacity(b.len() * b.len());
        for x in &b {
            for y in &b {
                out.push(x - y);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn sampler(&self) -> DensitySampler<'_> {
        match self {
            Density::TruncatedGaussian { .. } => {
                let (lo, hi) = self.support();
                let h = (hi - lo) / GRID_CELLS as f64;
                let mut cdf: Vec<f64> = (0..=GRID_CELLS).map(|k| self.cdf(lo + h * k as f64)).collect();
                cdf[0] = 0.0;
                cdf[GRID_CELLS] = 1.0;
                DensitySampler::Grid { lo, h, cdf }
            }
            _ => DensitySampler::Exact(self),
        }
    }
}

/// Inverse-CDF sampler, with a tabulated CDF where no closed form exists.
pub enum DensitySampler<'a> {
    Exact(&'a Density),
    Grid { lo: f64, h: f64, cdf: Vec<f64> },
}

impl DensitySampler<'_> {
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            DensitySampler::Exact(d) => match **d {
                Density::Uniform { lo, hi } => lo + u * (hi - lo),
                Density::Triangular { lo, mode, hi } => {
                    let split = (mode - lo) / (hi - lo);
                    if u < split {
                        lo + (u * (hi - lo) * (mode - lo)).sqrt()
                    } else {
                        hi - ((1.0 - u) * (hi - lo) * (hi - mode)).sqrt()
                    }
                }
                Density::Piecewise { lo, hi, ref weights } => {
                    let n = weights.len();
                    let h = (hi - lo) / n as f64;
                    let mut acc = 0.0;
                    for (k, w) in weights.iter().enumerate() {
                        if u < acc + w || k + 1 == n {
                            let frac = if *w > 0.0 { ((u - acc) / w).clamp(0.0, 1.0) } else { 0.5 };
                            return lo + h * (k as f64 + frac);
                        }
                        acc += w;
                    }
                    hi
                }
                Density::TruncatedGaussian { .. } => unreachable!("gaussian uses the grid sampler"),
            },
            DensitySampler::Grid { lo, h, cdf } => {
                let k = cdf.partition_point(|c| *c <= u).clamp(1, cdf.len() - 1) - 1;
                let span = cdf[k + 1] - cdf[k];
                let frac = if span > 0.0 { ((u - cdf[k]) / span).clamp(0.0, 1.0) } else { 0.5 };
                lo + h * (k as f64 + frac)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_shapes() -> Vec<Density> {
        vec![
            Density::uniform(-0.5, 2.0),
            Density::Triangular { lo: 0.0, mode: 1.0, hi: 2.0 },
            Density::Triangular { lo: 0.0, mode: 0.0, hi: 1.0 },
            Density::Triangular { lo: -1.0, mode: 0.7, hi: 1.0 },
            Density::TruncatedGaussian { mean: 0.3, sd: 0.2, lo: 0.0, hi: 1.0 },
            Density::Piecewise { lo: 0.0, hi: 2.0, weights: vec![0.1, 0.4, 0.0, 0.5] },
        ]
    }

    #[test]
    fn closed_form_char_fns_match_quadrature() {
        for d in all_shapes() {
            d.validate().unwrap();
            let (lo, hi) = d.support();
            let mut pts = d.breakpoints();
            pts.extend([lo, hi]);
            for &xi in &[0.0, 1e-5, 0.3, 2.0, -7.5, 40.0, 313.0] {
                let got = d.char_fn(xi).unwrap();
                let want =
                    quadrature::integrate_pieces(|x| Complex64::from_polar(d.pdf(x), xi * x), &pts, 64, 1e-13, 16)
                        .unwrap()
                        .value;
                assert!((got - want).norm() < 1e-11, "{d:?} at {xi}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn cdf_is_integral_of_pdf() {
        for d in all_shapes() {
            let (lo, hi) = d.support();
            for k in 1..10 {
                let x = lo + (hi - lo) * k as f64 / 10.0;
                let mut pts = d.breakpoints();
                pts.retain(|p| *p < x);
                pts.push(x);
                let want = quadrature::integrate_pieces(|s| d.pdf(s), &pts, 64, 1e-13, 12).unwrap().value;
                assert!((d.cdf(x) - want).abs() < 1e-10, "{d:?} at {x}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for d in all_shapes() {
            let s = d.sampler();
            for k in 1..50 {
                let u = k as f64 / 50.0;
                let x = s.quantile(u);
                assert!((d.cdf(x) - u).abs() < 1e-6, "{d:?} at {u}");
            }
        }
    }

    #[test]
    fn difference_density_integrates_to_one() {
        for d in all_shapes() {
            let w = d.support().1 - d.support().0;
            let mut kinks = d.difference_kinks();
            kinks.retain(|k| k.abs() <= w);
            let total = quadrature::integrate_pieces(|u| d.difference_density(u), &kinks, 16, 1e-11, 10).unwrap().value;
            assert!((total - 1.0).abs() < 1e-9, "{d:?}: {total}");
        }
    }

    #[test]
    fn gaussian_difference_density_matches_quadrature() {
        let d = Density::TruncatedGaussian { mean: 0.3, sd: 0.25, lo: -0.2, hi: 1.1 };
        for &u in &[-1.2, -0.5, 0.0, 0.1, 0.77, 1.25] {
            let (lo, hi) = d.support();
            let direct =
                quadrature::integrate(|s| d.pdf(s) * d.pdf(s + u), lo.max(lo - u), hi.min(hi - u), 16, 1e-14, 14)
                    .unwrap()
                    .value;
            assert!((d.difference_density(u) - direct).abs() < 1e-12, "{u}");
        }
    }

    #[test]
    fn difference_density_of_uniform_is_triangle() {
        let d = Density::Piecewise { lo: 0.0, hi: 1.0, weights: vec![0.5, 0.5] };
        for &u in &[-0.9, -0.2, 0.0, 0.4, 0.99] {
            assert!((d.difference_density(u) - (1.0 - f64::abs(u))).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Density::uniform(1.0, 1.0).validate().is_err());
        assert!(Density::Triangular { lo: 0.0, mode: 2.0, hi: 1.0 }.validate().is_err());
        assert!(Density::Piecewise { lo: 0.0, hi: 1.0, weights: vec![0.5, 0.6] }.validate().is_err());
        assert!(Density::TruncatedGaussian { mean: 0.0, sd: 0.0, lo: 0.0, hi: 1.0 }.validate().is_err());
    }
}
