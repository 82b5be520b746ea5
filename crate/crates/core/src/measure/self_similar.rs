//! Invariant measures of affine contractions `x ↦ c_k + r_k x` chosen with
//! probabilities `p_k`.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::rng::Stream;

/// Truncation budget for the infinite product / recursion.
const CHAR_FN_TOL: f64 = 1e-11;
/// Sampled points sit within this distance of the attractor.
const SAMPLE_DIAMETER: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilar {
    pub ratios: Vec<f64>,
    pub translations: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SelfSimilar {
    pub fn new(ratios: Vec<f64>, translations: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        let s = SelfSimilar { ratios, translations, weights };
        s.validate()?;
        Ok(s)
    }

    /// Middle-thirds Cantor measure.
    pub fn middle_thirds() -> Self {
        SelfSimilar { ratios: vec![1.0 / 3.0; 2], translations: vec![0.0, 2.0 / 3.0], weights: vec![0.5; 2] }
    }

    /// Uniform law on reals in `[0,1]` whose binary digits vanish at every
    /// even position (only digits 1, 3, 5, ... are free).
    pub fn dyadic_odd() -> Self {
        SelfSimilar { ratios: vec![0.25; 2], translations: vec![0.0, 0.5], weights: vec![0.5; 2] }
    }

    /// Companion of [`SelfSimilar::dyadic_odd`]: only even-position digits are free.
    pub fn dyadic_even() -> Self {
        SelfSimilar { ratios: vec![0.25; 2], translations: vec![0.0, 0.25], weights: vec![0.5; 2] }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        let n = self.ratios.len();
        if n == 0 || self.translations.len() != n || self.weights.len() != n {
            return Err(MeasureError::Invalid(
                "self-similar measure needs equally many ratios, translations and weights".into(),
            ));
        }
        if self.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0 && *r < 1.0)) {
            return Err(MeasureError::Invalid("contraction ratios must lie in (0, 1)".into()));
        }
        if self.translations.iter().any(|c| !c.is_finite()) {
            return Err(MeasureError::Invalid("translations must be finite".into()));
        }
        if self.weights.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(MeasureError::Invalid("weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::Invalid(format!("self-similar weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Convex hull of the attractor: the extreme fixed points.
    pub fn hull(&self) -> (f64, f64) {
        let fixed = self.ratios.iter().zip(&self.translations).map(|(r, c)| c / (1.0 - r));
        fixed.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }

    fn common_ratio(&self) -> Option<f64> {
        let r0 = self.ratios[0];
        self.ratios.iter().all(|r| *r == r0).then_some(r0)
    }

    fn generator(&self, eta: f64) -> Complex64 {
        self.weights.iter().zip(&self.translations).map(|(p, c)| Complex64::from_polar(*p, eta * c)).sum()
    }

    pub fn char_fn(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let (lo, hi) = self.hull();
        let radius = 0.5 * (hi - lo);
        let center = 0.5 * (lo + hi);
        // |ν̂(η) - e^{iη·center}| ≤ |η|·radius once the remaining scale is small.
        if let Some(r) = self.common_ratio() {
            let mut acc = Complex64::new(1.0, 0.0);
            let mut scale = 1.0;
            while (xi * scale).abs() * radius >= CHAR_FN_TOL {
                acc *= self.generator(xi * scale);
                scale *= r;
            }
            return acc * Complex64::from_polar(1.0, xi * scale * center);
        }
        let mut memo = HashMap::new();
        let mut exps = vec![0u16; self.ratios.len()];
        self.char_fn_rec(xi, &mut exps, radius, center, &mut memo)
    }

    /// Unequal ratios: `ν̂(η) = Σ p_k e^{iηc_k} ν̂(r_k η)`. The argument depends
    /// only on how often each ratio was applied, so results are memoized on
    /// the exponent vector.
    fn char_fn_rec(
        &self,
        xi: f64,
        exps: &mut Vec<u16>,
        radius: f64,
        center: f64,
        memo: &mut HashMap<Vec<u16>, Complex64>,
    ) -> Complex64 {
        if let Some(v) = memo.get(exps) {
            return *v;
        }
        let scale: f64 = self.ratios.iter().zip(exps.iter()).map(|(r, e)| r.powi(*e as i32)).product();
        let eta = xi * scale;
        let value = if eta.abs() * radius < CHAR_FN_TOL {
            Complex64::from_polar(1.0, eta * center)
        } else {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..self.ratios.len() {
                if self.weights[k] == 0.0 {
                    continue;
                }
                exps[k] += 1;
                let inner = self.char_fn_rec(xi, exps, radius, center, memo);
                exps[k] -= 1;
                acc += Complex64::from_polar(self.weights[k], eta * self.translations[k]) * inner;
            }
            acc
        };
        memo.insert(exps.clone(), value);
        value
    }

    pub(crate) fn cumulative(&self) -> Vec<f64> {
        self.weights
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    /// One draw by a random digit expansion, continued until the remaining
    /// cylinder is narrower than [`SAMPLE_DIAMETER`]. `cumulative` comes
    /// from [`SelfSimilar::cumulative`].
    pub(crate) fn draw(&self, stream: &mut Stream, cumulative: &[f64]) -> f64 {
        let (lo, hi) = self.hull();
        let last = cumulative.len() - 1;
        let mut x = 0.0;
        let mut scale = 1.0;
        while scale * (hi - lo) >= SAMPLE_DIAMETER {
            let u = stream.uniform() * cumulative[last];
            let k = cumulative.partition_point(|c| *c <= u).min(last);
            x += scale * self.translations[k];
            scale *= self.ratios[k];
        }
        x + scale * lo
    }

    #[cfg(test)]
    fn sample_into(&self, stream: &mut Stream, out: &mut [f64]) {
        let cumulative = self.cumulative();
        for slot in out.iter_mut() {
            *slot = self.draw(stream, &cumulative);
        }
    }

    /// `ν(ℝ \ [-n, n])` by descending into cylinder sets that straddle the
    /// boundary; cylinders lighter than `1e-10` that still straddle it count half.
    pub fn tail_mass(&self, n: f64) -> f64 {
        let (lo, hi) = self.hull();
        let mut outside = 0.0;
        let mut undecided = 0.0;
        let mut stack = vec![(lo, hi, 1.0f64)];
        let mut visited = 0usize;
        while let Some((a, b, mass)) = stack.pop() {
            visited += 1;
            if a >= -n && b <= n {
                continue;
            }
            if b < -n || a > n {
                outside += mass;
                continue;
            }
            if mass < 1e-10 || visited > 4_000_000 {
                undecided += mass;
                continue;
            }
            for k in 0..self.ratios.len() {
                let (c, r, p) = (self.translations[k], self.ratios[k], self.weights[k]);
                if p > 0.0 {
                    stack.push((c + r * a, c + r * b, mass * p));
                }
            }
        }
        outside + 0.5 * undecided
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_presets() {
        let (lo, hi) = SelfSimilar::middle_thirds().hull();
        assert!(lo == 0.0 && (hi - 1.0).abs() < 1e-15);
        let (lo, hi) = SelfSimilar::dyadic_odd().hull();
        assert!(lo == 0.0 && (hi - 2.0 / 3.0).abs() < 1e-15);
        let (lo, hi) = SelfSimilar::dyadic_even().hull();
        assert!(lo == 0.0 && (hi - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unequal_ratio_recursion_matches_fixed_point_identity() {
        let m = SelfSimilar::new(vec![0.5, 0.3], vec![0.0, 0.7], vec![0.4, 0.6]).unwrap();
        for &xi in &[0.5, 3.0, -11.0, 60.0] {
            let lhs = m.char_fn(xi);
            let rhs: Complex64 = (0..2)
                .map(|k| Complex64::from_polar(m.weights[k], xi * m.translations[k]) * m.char_fn(m.ratios[k] * xi))
                .sum();
            assert!((lhs - rhs).norm() < 1e-9, "{xi}");
            assert!(lhs.norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn unequal_ratio_path_agrees_with_product_when_ratios_coincide() {
        // Perturb one ratio by nothing but force the recursive path.
        let m = SelfSimilar::middle_thirds();
        let (lo, hi) = m.hull();
        let mut memo = HashMap::new();
        let mut exps = vec![0u16; 2];
        for &xi in &[1.0, std::f64::consts::PI, 40.0] {
            memo.clear();
            let rec = m.char_fn_rec(xi, &mut exps, 0.5 * (hi - lo), 0.5 * (lo + hi), &mut memo);
            assert!((rec - m.char_fn(xi)).norm() < 1e-10);
        }
    }

    #[test]
    fn cantor_samples_are_ternary_points() {
        let m = SelfSimilar::middle_thirds();
        let mut s = Stream::new(9);
        let mut out = vec![0.0; 2000];
        m.sample_into(&mut s, &mut out);
        let level = 3f64.powi(8);
        let allowed = |j: i64| {
            let mut j = j;
            (0..8).all(|_| {
                let d = j % 3;
                j /= 3;
                d != 1
            })
        };
        for x in out {
            let hit = [x - 1e-12, x + 1e-12]
                .iter()
                .any(|y| (0.0..=1.0).contains(y) && allowed(((y * level).floor() as i64).min(6560)));
            assert!(hit, "{x} outside the level-8 Cantor intervals");
        }
    }

    #[test]
    fn tail_mass_of_cantor_halves() {
        let m = SelfSimilar::middle_thirds();
        assert!((m.tail_mass(0.5) - 0.5).abs() < 1e-12);
        assert_eq!(m.tail_mass(1.0), 0.0);
        // [0, 1/9] ∪ [2/9, 1/3] lie inside [-0.3, 0.3] only for the first one
        assert!((m.tail_mass(0.2) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        assert!(SelfSimilar::new(vec![1.2], vec![0.0], vec![1.0]).is_err());
        assert!(SelfSimilar::new(vec![0.5, 0.5], vec![0.0, 0.5], vec![0.5, 0.4]).is_err());
        assert!(SelfSimilar::new(vec![0.5], vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
