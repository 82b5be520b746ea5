//! Composite Gauss–Legendre quadrature with panel doubling.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Builds the `n`-point rule by Newton iteration on the Legendre
    /// recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Applies the rule on `[a, b]`.
    #[inline]
    pub fn apply<T: Integrand>(&self, f: &impl Fn(f64) -> T, a: f64, b: f64) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * *w;
        }
        acc * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Cached rule with `n` nodes for the sizes the crate uses.
pub fn rule(n: usize) -> &'static GaussRule {
    static R4: OnceLock<GaussRule> = OnceLock::new();
    static R8: OnceLock<GaussRule> = OnceLock::new();
    static R16: OnceLock<GaussRule> = OnceLock::new();
    static R64: OnceLock<GaussRule> = OnceLock::new();
    match n {
        4 => R4.get_or_init(|| GaussRule::new(4)),
        8 => R8.get_or_init(|| GaussRule::new(8)),
        16 => R16.get_or_init(|| GaussRule::new(16)),
        64 => R64.get_or_init(|| GaussRule::new(64)),
        _ => panic!("no cached Gauss rule with {n} nodes"),
    }
}

/// Values that can be integrated: real or complex.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Value with the difference between the last two refinements.
#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: T,
    pub error: f64,
}

/// Refinement stopped before reaching the requested tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotConverged {
    pub achieved: f64,
}

/// Integrates `f` over the pieces delimited by `breakpoints` (sorted,
/// duplicates ignored). Every piece is split into the same number of
/// panels, doubled until two successive totals differ by at most `tol`.
pub fn integrate_pieces<T: Integrand>(
    f: impl Fn(f64) -> T,
    breakpoints: &[f64],
    nodes: usize,
    tol: f64,
    max_doublings: u32,
) -> Result<Integral<T>, NotConverged> {
    let g = rule(nodes);
    let mut pts: Vec<f64> = breakpoints.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Ok(Integral { value: T::zero(), error: 0.0 });
    }
    let total = |panels: usize| {
        let mut acc = T::zero();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = (b - a) / panels as f64;
            for k in 0..panels {
                let lo = a + h * k as f64;
                let hi = if k + 1 == panels { b } else { lo + h };
                acc = acc + g.apply(&f, lo, hi);
            }
        }
        acc
    };
    let mut panels = 1usize;
    let mut prev = total(panels);
    let mut diff = f64::INFINITY;
    for _ in 0..max_doublings {
        panels *= 2;
        let next = total(panels);
        diff = (next - prev).magnitude();
        prev = next;
        if diff <= tol {
            return Ok(Integral { value: prev, error: diff });
        }
    }
    Err(NotConverged { achieved: diff })
}

/// Integrates `f` over `[a, b]` with composite doubling.
pub fn integrate<T: Integrand>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    nodes: usize,
    tol: f64,
    max_doublings: u32,
) -> Result<Integral<T>, NotConverged> {
    integrate_pieces(f, &[a, b], nodes, tol, max_doublings)
}

/// Exact integral of a quadratic on `[a, b]` by Simpson's rule.
#[inline]
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for &n in &[4usize, 8, 16, 64] {
            let g = rule(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "weights of {n}");
            // x^(2n-2) over [-1,1] = 2/(2n-1)
            let p = 2 * n as i32 - 2;
            let v = g.apply(&|x: f64| x.powi(p), -1.0, 1.0);
            assert!((v - 2.0 / (p as f64 + 1.0)).abs() < 1e-12, "degree {p}: {v}");
        }
    }

    #[test]
    fn doubling_reaches_oscillatory_tolerance() {
        let r = integrate(|x: f64| (50.0 * x).cos(), 0.0, 3.0, 64, 1e-12, 20).unwrap();
        assert!((r.value - (150.0f64).sin() / 50.0).abs() < 1e-12);
    }

    #[test]
    fn pieces_handle_kinks() {
        let r = integrate_pieces(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], 8, 1e-14, 4).unwrap();
        assert!((r.value - 2.5).abs() < 1e-14);
    }

    #[test]
    fn reports_non_convergence() {
        let e = integrate(|x: f64| (1e6 * x).sin(), 0.0, 1.0, 8, 1e-14, 2).unwrap_err();
        assert!(e.achieved > 0.0);
    }

    #[test]
    fn simpson_is_exact_on_quadratics() {
        let v = simpson(|x| 3.0 * x * x - x + 2.0, -0.5, 1.5);
        let exact = |x: f64| x * x * x - x * x / 2.0 + 2.0 * x;
        assert!((v - (exact(1.5) - exact(-0.5))).abs() < 1e-14);
    }
}
