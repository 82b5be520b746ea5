//! Linear flows on the torus and their rigidity times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominators at or above this bound are refused: beyond it `f64` no
/// longer resolves `q·α` and a 64-bit product `m·q` may overflow.
pub const MAX_DENOMINATOR: u64 = 1 << 52;

/// Exact arithmetic description of the slope `α₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Arithmetic {
    /// `α₂ = [0; a₁, a₂, …]` with the partial quotients repeating `period`.
    PeriodicFraction { period: Vec<u64> },
    /// `α₂ = num/den`; the flow is periodic with period `den`.
    Rational { num: u64, den: u64 },
}

/// `T_t x = x + tα mod 1` on the `d`-torus, with `α₁ = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusWinding {
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arithmetic: Option<Arithmetic>,
}

/// A rigidity time with its exact signed displacement `q·α₂ − p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidityTime {
    pub time: u64,
    pub numerator: u64,
    pub signed_distance: f64,
}

impl TorusWinding {
    /// Winding with direction `(1, α₂, …)`. No arithmetic data is attached,
    /// so rigidity times are unavailable.
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let w = TorusWinding { alpha, arithmetic: None };
        w.validate()?;
        Ok(w)
    }

    /// Two-dimensional winding whose slope has a purely periodic continued
    /// fraction `[0; period, period, …]`.
    pub fn periodic_fraction(period: Vec<u64>) -> Result<Self> {
        if period.is_empty() || period.contains(&0) {
            return Err(Error::Invalid("partial quotients must be positive".into()));
        }
        let arithmetic = Arithmetic::PeriodicFraction { period };
        let a2 = slope_value(&arithmetic);
        Ok(TorusWinding { alpha: vec![1.0, a2], arithmetic: Some(arithmetic) })
    }

    /// `α₂ = (√5 − 1)/2`.
    pub fn golden() -> Self {
        Self::periodic_fraction(vec![1]).expect("static preset")
    }

    /// `α₂ = √2 − 1`.
    pub fn pell() -> Self {
        Self::periodic_fraction(vec![2]).expect("static preset")
    }

    /// Periodic flow with rational slope, where every multiple of the
    /// period is an exact return time.
    pub fn rational(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num >= den {
            return Err(Error::Invalid("rational slope needs 0 <= num < den".into()));
        }
        let arithmetic = Arithmetic::Rational { num, den };
        Ok(TorusWinding { alpha: vec![1.0, num as f64 / den as f64], arithmetic: Some(arithmetic) })
    }

    /// Unit-speed flow on the circle.
    pub fn circle() -> Self {
        TorusWinding { alpha: vec![1.0], arithmetic: Some(Arithmetic::Rational { num: 0, den: 1 }) }
    }

    pub fn dimension(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() {
            return Err(Error::Invalid("winding needs dimension at least 1".into()));
        }
        if self.alpha[0] != 1.0 {
            return Err(Error::Invalid("winding direction must have first component 1".into()));
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Invalid("winding direction must be finite".into()));
        }
        Ok(())
    }

    /// `|α|₁`.
    pub fn alpha_l1(&self) -> f64 {
        self.alpha.iter().map(|a| a.abs()).sum()
    }

    /// `x + tα mod 1`.
    pub fn evaluate(&self, x: &[f64], t: f64) -> Vec<f64> {
        x.iter().zip(&self.alpha).map(|(xk, ak)| (xk + t * ak).rem_euclid(1.0)).collect()
    }

    /// The displacement `tα mod 1`, per coordinate in `[0, 1)`.
    pub fn displacement(&self, t: f64) -> Vec<f64> {
        self.alpha.iter().map(|a| (t * a).rem_euclid(1.0)).collect()
    }

    /// The first `count` continued-fraction denominators `q₁, q₂, …` of `α₂`.
    pub fn rigidity_times(&self, count: usize) -> Result<Vec<u64>> {
        match &self.arithmetic {
            Some(Arithmetic::PeriodicFraction { .. }) if self.dimension() == 2 => {
                (1..=count).map(|i| self.rigidity_time(i).map(|r| r.time)).collect()
            }
            Some(Arithmetic::Rational { .. }) => {
                Err(Error::Invalid("rational slope: rigidity times come from the period, not convergents".into()))
            }
            _ => Err(Error::Invalid(
                "rigidity times need a two-dimensional winding with a known continued fraction".into(),
            )),
        }
    }

    /// The `i`-th rigidity time (`i ≥ 1`). For a periodic fraction this is
    /// the convergent denominator `q_i` with
    /// `q_iα₂ − p_i = (−1)^i / (q_iθ_{i+1} + q_{i−1})`, where `θ_{i+1}` is the
    /// complete quotient. For a rational slope it is `i` periods.
    pub fn rigidity_time(&self, i: usize) -> Result<RigidityTime> {
        if i == 0 {
            return Err(Error::Invalid("rigidity times are indexed from 1".into()));
        }
        match &self.arithmetic {
            Some(Arithmetic::PeriodicFraction { period }) => {
                let quotient = |k: usize| period[(k - 1) % period.len()];
                let (mut q_prev, mut q) = (0u64, 1u64);
                let (mut p_prev, mut p) = (1u64, 0u64);
                for k in 1..=i {
                    let a = quotient(k);
                    let q_next = a
                        .checked_mul(q)
                        .and_then(|x| x.checked_add(q_prev))
                        .filter(|x| *x < MAX_DENOMINATOR)
                        .ok_or_else(|| Error::Precision(format!("convergent denominator q_{k} reaches 2^52")))?;
                    let p_next = a * p + p_prev;
                    (q_prev, q) = (q, q_next);
                    (p_prev, p) = (p, p_next);
                }
                let theta = complete_quotient(period, i + 1);
                let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
                let signed_distance = sign / (q as f64 * theta + q_prev as f64);
                Ok(RigidityTime { time: q, numerator: p, signed_distance })
            }
            Some(Arithmetic::Rational { num, den }) => {
                let time = (i as u64)
                    .checked_mul(*den)
                    .filter(|t| *t < MAX_DENOMINATOR)
                    .ok_or_else(|| Error::Precision("rational period multiple reaches 2^52".into()))?;
                Ok(RigidityTime { time, numerator: i as u64 * num, signed_distance: 0.0 })
            }
            None => Err(Error::Invalid("winding has no arithmetic description of its slope".into())),
        }
    }
}

/// `θ_k = [a_k; a_{k+1}, …]` for a purely periodic expansion, evaluated by
/// iterating the period from a rough guess. Contraction is geometric, so a
/// fixed number of sweeps reaches full precision.
fn complete_quotient(period: &[u64], k: usize) -> f64 {
    let n = period.len();
    let mut theta = period[(k - 1) % n] as f64 + 0.5;
    for _ in 0..80 {
        for j in (0..n).rev() {
            theta = period[(k - 1 + j) % n] as f64 + 1.0 / theta;
        }
    }
    theta
}

fn slope_value(arithmetic: &Arithmetic) -> f64 {
    match arithmetic {
        Arithmetic::PeriodicFraction { period } => 1.0 / complete_quotient(period, 1),
        Arithmetic::Rational { num, den } => *num as f64 / *den as f64,
    }
}

/// Product of arcs `[0, a_k)` on the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub sides: Vec<f64>,
}

impl BoxSet {
    pub fn new(sides: Vec<f64>) -> Result<Self> {
        let b = BoxSet { sides };
        b.validate()?;
        Ok(b)
    }

    /// `[0, a)^d`.
    pub fn cube(a: f64, d: usize) -> Result<Self> {
        Self::new(vec![a; d])
    }

    pub fn validate(&self) -> Result<()> {
        if self.sides.is_empty() || self.sides.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Invalid("box sides must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn measure(&self) -> f64 {
        self.sides.iter().product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.sides).all(|(xk, a)| *xk < *a)
    }
}

/// Length of `[0, a) ∩ ([v, v + b) mod 1)` on the circle.
pub fn arc_overlap(a: f64, b: f64, v: f64) -> f64 {
    let v = v.rem_euclid(1.0);
    let seg = |lo: f64, hi: f64| (hi.min(a) - lo.max(0.0)).max(0.0);
    seg(v, v + b) + seg(v - 1.0, v - 1.0 + b)
}

/// Kinks of `u ↦ arc_overlap(a, b, c + βu)` in `(lo, hi)`.
pub(crate) fn arc_kinks(a: f64, b: f64, c: f64, beta: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    if beta == 0.0 {
        return;
    }
    let (v0, v1) = {
        let (x, y) = (c + beta * lo, c + beta * hi);
        (x.min(y), x.max(y))
    };
    for kappa in [0.0, a, 1.0 - b, (a - b).rem_euclid(1.0)] {
        let mut j = (v0 - kappa).floor();
        while j + kappa <= v1 {
            let u = (j + kappa - c) / beta;
            if u > lo && u < hi {
                out.push(u);
            }
            j += 1.0;
        }
    }
}

/// `μ(A ∩ (B + v))` for a displacement `v` given per coordinate.
pub fn box_overlap(a: &BoxSet, b: &BoxSet, v: &[f64]) -> f64 {
    a.sides.iter().zip(&b.sides).zip(v).map(|((ak, bk), vk)| arc_overlap(*ak, *bk, *vk)).product()
}

/// `μ(A ∩ T_t B)`.
pub fn arc_correlation(flow: &TorusWinding, a: &BoxSet, b: &BoxSet, t: f64) -> Result<f64> {
    if a.sides.len() != flow.dimension() || b.sides.len() != flow.dimension() {
        return Err(Error::Invalid("box dimension differs from the flow dimension".into()));
    }
    a.validate()?;
    b.validate()?;
    Ok(box_overlap(a, b, &flow.displacement(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_and_pell_denominators() {
        assert_eq!(TorusWinding::golden().rigidity_times(10).unwrap(), vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
        assert_eq!(TorusWinding::pell().rigidity_times(5).unwrap(), vec![2, 5, 12, 29, 70]);
        let g = TorusWinding::golden();
        assert!((g.alpha[1] - (5f64.sqrt() - 1.0) / 2.0).abs() < 2e-16);
        assert!((TorusWinding::pell().alpha[1] - (2f64.sqrt() - 1.0)).abs() < 2e-16);
    }

    #[test]
    fn signed_distances_match_direct_products_for_small_q() {
        for w in [TorusWinding::golden(), TorusWinding::pell(), TorusWinding::periodic_fraction(vec![1, 3]).unwrap()] {
            for i in 1..15 {
                let r = w.rigidity_time(i).unwrap();
                let direct = r.time as f64 * w.alpha[1] - r.numerator as f64;
                // The direct product loses about one ulp of α per unit of q.
                assert!((r.signed_distance - direct).abs() < 4e-16 * r.time as f64, "{i}");
                let next = w.rigidity_time(i + 1).unwrap();
                assert!(r.signed_distance.abs() < 1.0 / next.time as f64);
                assert!(next.signed_distance.abs() < r.signed_distance.abs());
            }
        }
    }

    #[test]
    fn deep_signed_distances_match_extended_precision() {
        // 60-digit reference values of q_iα₂ − p_i.
        let cases = [
            (TorusWinding::golden(), 20, 10946, 4.085_634_900_844_74e-5),
            (TorusWinding::golden(), 40, 165_580_141, 2.700_889_084_881_006e-9),
            (TorusWinding::golden(), 60, 2_504_730_781_961, 1.785_475_703_499_863_4e-13),
            (TorusWinding::pell(), 20, 38_613_965, 9.156_101_700_337_528e-9),
            (TorusWinding::pell(), 40, 1_746_860_020_068_409, 2.023_936_586_398_194_7e-16),
        ];
        for (w, i, q, sigma) in cases {
            let r = w.rigidity_time(i).unwrap();
            assert_eq!(r.time, q);
            assert!((r.signed_distance / sigma - 1.0).abs() < 1e-13, "{i}: {}", r.signed_distance);
        }
    }

    #[test]
    fn deep_convergents_are_refused() {
        let g = TorusWinding::golden();
        assert!(g.rigidity_time(74).is_ok());
        assert!(matches!(g.rigidity_time(80), Err(Error::Precision(_))));
        assert!(TorusWinding::rational(1, 3).unwrap().rigidity_times(3).is_err());
        assert!(TorusWinding::new(vec![1.0, 0.3]).unwrap().rigidity_times(3).is_err());
    }

    #[test]
    fn flow_basics() {
        let g = TorusWinding::golden();
        let y = g.evaluate(&[0.0, 0.0], 1.0);
        assert_eq!(y[0], 0.0);
        assert!((y[1] - 0.618_033_988_749_894_9).abs() < 1e-15);
        let x = [0.3, 0.9];
        assert_eq!(g.evaluate(&x, 0.0), x.to_vec());
        let a = g.evaluate(&g.evaluate(&x, 2.5), -7.25);
        let b = g.evaluate(&x, 2.5 - 7.25);
        for k in 0..2 {
            let d = (a[k] - b[k]).rem_euclid(1.0);
            assert!(d.min(1.0 - d) < 1e-12);
        }
    }

    #[test]
    fn arc_examples() {
        let circle = TorusWinding::circle();
        let half = BoxSet::cube(0.5, 1).unwrap();
        assert_eq!(arc_correlation(&circle, &half, &half, 0.0).unwrap(), 0.5);
        assert_eq!(arc_correlation(&circle, &half, &half, 0.5).unwrap(), 0.0);
        assert!((arc_overlap(0.3, 0.4, 0.9) - 0.3).abs() < 1e-15);
        assert!((arc_overlap(0.3, 0.4, 0.1) - 0.2).abs() < 1e-15);
        assert!((arc_overlap(0.7, 0.6, 0.5) - 0.3).abs() < 1e-15);
    }
}
