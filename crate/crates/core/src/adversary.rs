//! Cantor-type weights adapted to the rigidity times of a winding, along
//! which homothetic averages of `χ_A` stay near `μ(A)` instead of the mixing
//! value `μ(A)²`.
//!
//! Level `n` picks a rigidity time `t = q_i`, a multiplier `m` and the scale
//! `s = m·t`. Every level-`(n−1)` interval `[a, b]` receives two children
//! centered at `p/m` and `(p+1)/m`, so `s·r` lands within `δ_n` of the
//! near-periods `p·t`, `(p+1)·t` for every `r` in them. Interval geometry is
//! kept in exact rationals; only the final tree is rounded to `f64`
//! offsets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{arc_kinks, arc_overlap, BoxSet, RigidityTime, TorusWinding};
use crate::measure::{IntervalNode, IntervalTree, WeightMeasure};
use crate::rng::{derive_seed, map_shards, shard_ranges, Moments, Stream};

/// Multiplier used when the rigidity time is an exact period.
pub const MULTIPLIER_CAP: u64 = 1 << 30;

/// Rigidity indices tried per level before the level is declared
/// infeasible.
const MAX_INDEX_SCAN: usize = 200;

/// One level of the construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: usize,
    /// Index `i` of the rigidity time.
    pub index: usize,
    pub time: u64,
    /// `q_i α₂ − p_i`.
    pub signed_distance: f64,
    /// Displacement budget: `m·|q_i α₂ − p_i| ≤ epsilon`.
    pub epsilon: f64,
    pub multiplier: u64,
    /// `multiplier · time`, exact.
    pub scale: u128,
    /// Largest `|μ(A ∩ T_{p·t}A) − μ(A)|` over the placed centers.
    pub center_error: f64,
    /// Time tolerance around each near-period.
    pub delta: f64,
    /// Common half-width of the level's intervals, `≤ delta/scale`.
    pub half_width: f64,
    /// Per parent, the numerator `p` of the left child's center `p/m`.
    pub p: Vec<u64>,
}

/// Where and why construction stopped early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub level: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryPlan {
    pub flow: TorusWinding,
    pub set: BoxSet,
    /// Requested depth.
    pub depth: usize,
    pub levels: Vec<LevelRecord>,
    /// Nested-interval weight with one tree level per completed level.
    pub measure: IntervalTree,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

impl AdversaryPlan {
    pub fn weight(&self) -> WeightMeasure {
        WeightMeasure::NestedIntervals(self.measure.clone())
    }

    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let plan: AdversaryPlan = serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        check_plan(&plan)?;
        Ok(plan)
    }
}

fn check_setup(flow: &TorusWinding, a: &BoxSet) -> Result<()> {
    flow.validate()?;
    a.validate()?;
    if flow.dimension() != 2 || a.sides.len() != 2 {
        return Err(Error::Invalid("the adversary needs a two-dimensional winding and box".into()));
    }
    Ok(())
}

/// Largest `m` with `m·|σ| ≤ eps`; [`MULTIPLIER_CAP`] when `σ = 0`.
fn multiplier_for(sigma: f64, eps: f64) -> u64 {
    let d = sigma.abs();
    if d == 0.0 {
        return MULTIPLIER_CAP;
    }
    let mut m = (eps / d).floor();
    while m > 0.0 && m * d > eps {
        m -= 1.0;
    }
    m as u64
}

/// `m(i) = max{m : m·‖q_iα₂‖ ≤ ‖q_iα₂‖^{1/2}}`. For every `k ≤ m(i)`,
/// `μ(A Δ T_{k·q_i}A) ≤ 2(1 + |α|₁)·‖q_iα₂‖^{1/2}`.
pub fn choose_multiplier(flow: &TorusWinding, a: &BoxSet, i: usize) -> Result<u64> {
    check_setup(flow, a)?;
    let rt = flow.rigidity_time(i)?;
    let d = rt.signed_distance.abs();
    Ok(multiplier_for(d, d.sqrt()))
}

/// `|μ(A ∩ T_τ A) − μ(A)|` at time `τ = P·q_i + u`, computed from the
/// displacement `(u, P·σ_i + u·α₂)` so that large `P·q_i` never enters
/// floating point.
fn deviation_at(a: &BoxSet, alpha2: f64, rt: &RigidityTime, big_p: u64, u: f64) -> f64 {
    (overlap_at(a, alpha2, rt, big_p, u) - a.measure()).abs()
}

fn overlap_at(a: &BoxSet, alpha2: f64, rt: &RigidityTime, big_p: u64, u: f64) -> f64 {
    let v0 = u;
    let v1 = big_p as f64 * rt.signed_distance + u * alpha2;
    arc_overlap(a.sides[0], a.sides[0], v0) * arc_overlap(a.sides[1], a.sides[1], v1)
}

fn delta_for(center_error: f64, n: usize, alpha_l1: f64) -> f64 {
    (1.0 / n as f64 - center_error) / (1.0 + alpha_l1)
}

/// Half-width `δ` of a time window around `t_center` on which the
/// correlation stays within `1/n` of `μ(A)`, from the Lipschitz bound
/// `|corr(t+u) − corr(t)| ≤ (1 + |α|₁)|u|`:
/// `δ = (1/n − |corr(t_center) − μ(A)|)/(1 + |α|₁)`.
pub fn choose_delta(flow: &TorusWinding, a: &BoxSet, t_center: f64, n: usize) -> Result<f64> {
    check_setup(flow, a)?;
    if n == 0 {
        return Err(Error::Invalid("levels are numbered from 1".into()));
    }
    let e0 = (crate::flow::arc_correlation(flow, a, a, t_center)? - a.measure()).abs();
    if e0 > 0.5 / n as f64 {
        return Err(Error::Infeasible {
            level: n,
            reason: format!("correlation at the center is {e0:.3e} from mu(A), above 1/(2n)"),
        });
    }
    Ok(delta_for(e0, n, flow.alpha_l1()))
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Largest double not above `x` (for positive `x`).
fn f64_below(x: &BigRational) -> f64 {
    let mut f = to_f64(x);
    while rational(f) > *x {
        f = f64::from_bits(f.to_bits() - 1);
    }
    f
}

/// Left-child numerators `p = ⌊m·a⌋ + 1` for each parent, or `None` when some
/// parent cannot hold `p/m < (p+1)/m` strictly inside.
fn place(parents: &[(BigRational, BigRational)], m: u64) -> Option<Vec<u64>> {
    let mr = BigRational::from_integer(BigInt::from(m));
    parents
        .iter()
        .map(|(a, b)| {
            let p = (&mr * a).floor().to_integer() + BigInt::one();
            let right = BigRational::from_integer(&p + BigInt::one());
            if right < &mr * b {
                p.to_u64()
            } else {
                None
            }
        })
        .collect()
}

/// Builds the construction level by level, choosing for each level the
/// smallest rigidity index that fits two children into every parent.
///
/// The displacement budget at level `n` is
/// `ε_n = min(1/(2n·a₁), a₂, 1 − a₂)`, which keeps the centers within
/// `1/(2n)` of `μ(A)`. If a level cannot be built (denominators reach 2^52,
/// or no index fits) the plan stops there and records the failure.
pub fn build_adversarial_measure(flow: &TorusWinding, a: &BoxSet, n_max: usize) -> Result<AdversaryPlan> {
    check_setup(flow, a)?;
    if n_max == 0 {
        return Err(Error::Invalid("depth must be at least 1".into()));
    }
    flow.rigidity_time(1)?;
    let alpha2 = flow.alpha[1];
    let l1 = flow.alpha_l1();
    let (a1, a2) = (a.sides[0], a.sides[1]);
    let mut parents = vec![(BigRational::zero(), BigRational::one())];
    let mut tree: Vec<Vec<IntervalNode>> = Vec::new();
    let mut levels: Vec<LevelRecord> = Vec::new();
    let mut failure = None;
    let mut next_index = 1;

    'levels: for n in 1..=n_max {
        let tol = 0.5 / n as f64;
        let eps = (tol / a1).min(a2).min(1.0 - a2);
        let mut chosen = None;
        for i in next_index..next_index + MAX_INDEX_SCAN {
            let rt = match flow.rigidity_time(i) {
                Ok(rt) => rt,
                Err(Error::Precision(reason)) => {
                    failure = Some(Failure { level: n, reason });
                    break 'levels;
                }
                Err(e) => return Err(e),
            };
            let m = multiplier_for(rt.signed_distance, eps);
            if m < 2 {
                continue;
            }
            if let Some(p) = place(&parents, m) {
                let center_error = p
                    .iter()
                    .flat_map(|&p| [p, p + 1])
                    .map(|big_p| deviation_at(a, alpha2, &rt, big_p, 0.0))
                    .fold(0.0, f64::max);
                if center_error <= tol {
                    chosen = Some((i, rt, m, p, center_error, eps));
                    break;
                }
            }
        }
        let Some((i, rt, m, p, center_error, eps)) = chosen else {
            failure =
                Some(Failure { level: n, reason: format!("no rigidity index fits within {MAX_INDEX_SCAN} tries") });
            break;
        };
        let scale = m as u128 * rt.time as u128;
        let delta = delta_for(center_error, n, l1);
        let m_r = BigRational::from_integer(BigInt::from(m));
        let mut hw = rational(delta) / BigRational::from_integer(BigInt::from(scale));
        let centers: Vec<(BigRational, BigRational)> = p.iter().map(|&p| (ratio(p, m), ratio(p + 1, m))).collect();
        for ((lo, hi), (c, c2)) in parents.iter().zip(&centers) {
            hw = hw.min(c - lo).min(hi - c2);
        }
        debug_assert!(hw < BigRational::one() / (&m_r * BigRational::from_integer(BigInt::from(2))));
        let hw_f = f64_below(&hw);
        let hw_r = rational(hw_f);
        let mut nodes = Vec::with_capacity(2 * parents.len());
        let mut children = Vec::with_capacity(2 * parents.len());
        for ((lo, hi), (c, c2)) in parents.iter().zip(&centers) {
            let mid = (lo + hi) / BigRational::from_integer(BigInt::from(2));
            for c in [c, c2] {
                nodes.push(IntervalNode { offset: to_f64(&(c - &mid)), half_width: hw_f });
                children.push((c - &hw_r, c + &hw_r));
            }
        }
        tree.push(nodes);
        parents = children;
        levels.push(LevelRecord {
            n,
            index: i,
            time: rt.time,
            signed_distance: rt.signed_distance,
            epsilon: eps,
            multiplier: m,
            scale,
            center_error,
            delta,
            half_width: hw_f,
            p,
        });
        next_index = i + 1;
    }

    let measure = IntervalTree::new(tree)?;
    let plan = AdversaryPlan { flow: flow.clone(), set: a.clone(), depth: n_max, levels, measure, failure };
    check_plan(&plan)?;
    Ok(plan)
}

/// Machine check of a plan: exact scales, strictly increasing scales,
/// `p + 1 < m`, tree nesting and disjointness, centers at `p/m` and
/// `(p+1)/m`, time windows within `δ_n`, and midpoint correlations within
/// `1/n` of `μ(A)`.
pub fn check_plan(plan: &AdversaryPlan) -> Result<()> {
    check_setup(&plan.flow, &plan.set)?;
    let bad = |level: usize, reason: String| Err(Error::Infeasible { level, reason });
    plan.measure.validate()?;
    if plan.measure.depth() != plan.levels.len() {
        return bad(0, "tree depth differs from the number of level records".into());
    }
    let alpha2 = plan.flow.alpha[1];
    let mut prev_scale = 0u128;
    // Exact absolute centers of the previous level, reconstructed from the
    // stored offsets.
    let mut prev_centers = vec![BigRational::new(BigInt::one(), BigInt::from(2))];
    for (k, rec) in plan.levels.iter().enumerate() {
        let n = k + 1;
        if rec.n != n {
            return bad(n, format!("record {k} is labelled level {}", rec.n));
        }
        let rt = plan.flow.rigidity_time(rec.index)?;
        if rt.time != rec.time {
            return bad(n, "recorded time is not the rigidity time of the recorded index".into());
        }
        if rec.scale != rec.multiplier as u128 * rec.time as u128 {
            return bad(n, "scale differs from multiplier times time".into());
        }
        if rec.scale <= prev_scale {
            return bad(n, "scales are not strictly increasing".into());
        }
        prev_scale = rec.scale;
        if rec.p.len() != 1 << k {
            return bad(n, format!("expected {} parents, found {}", 1 << k, rec.p.len()));
        }
        if rec.p.iter().any(|&p| p + 1 >= rec.multiplier) {
            return bad(n, "p + 1 must be below the multiplier".into());
        }
        if rec.half_width * rec.scale as f64 > rec.delta * (1.0 + 1e-12) {
            return bad(n, "interval half-width exceeds delta/scale".into());
        }
        let nodes = &plan.measure.levels[k];
        let mut centers = Vec::with_capacity(nodes.len());
        for (j, node) in nodes.iter().enumerate() {
            if node.half_width != rec.half_width {
                return bad(n, format!("interval {j} does not have the level's half-width"));
            }
            let c = &prev_centers[j / 2] + rational(node.offset);
            let want = ratio(rec.p[j / 2] + (j as u64 & 1), rec.multiplier);
            // Each stored offset carries at most half an ulp of rounding.
            let slack = rational(node.offset.abs() * f64::EPSILON);
            if (&c - &want).abs() > slack {
                return bad(n, format!("interval {j} is not centered at p/m"));
            }
            let big_p = rec.p[j / 2] + (j as u64 & 1);
            let dev = deviation_at(&plan.set, alpha2, &rt, big_p, 0.0);
            if !(dev < 1.0 / n as f64) {
                return bad(n, format!("midpoint correlation of interval {j} is {dev:.3e} from mu(A)"));
            }
            centers.push(want);
        }
        prev_centers = centers;
    }
    Ok(())
}

/// Per-level output of [`verify_non_almost_mixing`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub scale: u128,
    /// Monte Carlo `(P_s χ_A, χ_A)` over `r ~ ν`, `x ~ μ`.
    pub estimate: f64,
    pub std_error: f64,
    /// The same quantity integrated exactly against the leaf intervals.
    pub exact: f64,
    /// `μ(A)`.
    pub target: f64,
    /// `μ(A)²`.
    pub mixing: f64,
    /// Fraction of sampled `r` with `μ(A Δ T_{s r}A) < 2/n`.
    pub rigid_fraction: f64,
}

/// Leaf-`leaf` time window `[τ₀, τ₁]` of `s·(r − c)` relative to the
/// level-`level` ancestor center `c`, together with that ancestor's center
/// numerator `P`.
fn leaf_window(plan: &AdversaryPlan, rec: &LevelRecord, leaf: usize) -> (u64, f64, f64) {
    let tree = &plan.measure;
    let n = rec.n;
    let ancestor = leaf >> (tree.depth() - n);
    let big_p = rec.p[ancestor / 2] + (ancestor as u64 & 1);
    let s = rec.scale as f64;
    (big_p, s * tree.offset_from_ancestor(leaf, 0.0, n), s * tree.offset_from_ancestor(leaf, 1.0, n))
}

/// Mean of `μ(A ∩ T_{P·q + u}A)` over `u` uniform in `[lo, hi]`. The
/// integrand is a product of two piecewise-linear factors, so Simpson's rule
/// between kinks is exact.
fn window_mean(a: &BoxSet, alpha2: f64, rt: &RigidityTime, big_p: u64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return overlap_at(a, alpha2, rt, big_p, lo);
    }
    let mut pts = vec![lo, hi];
    arc_kinks(a.sides[0], a.sides[0], 0.0, 1.0, lo, hi, &mut pts);
    arc_kinks(a.sides[1], a.sides[1], big_p as f64 * rt.signed_distance, alpha2, lo, hi, &mut pts);
    pts.sort_by(f64::total_cmp);
    let f = |u: f64| overlap_at(a, alpha2, rt, big_p, u);
    let total: f64 =
        pts.windows(2).map(|w| (w[1] - w[0]) / 6.0 * (f(w[0]) + 4.0 * f(0.5 * (w[0] + w[1])) + f(w[1]))).sum();
    total / (hi - lo)
}

/// Per level, `(P_{s(i_n)}χ_A, χ_A) = ∫ μ(A ∩ T_{s r}A) dν(r)` by Monte Carlo
/// over `(r, x)` and exactly over the leaf intervals. Level `n` uses the
/// sub-seed `derive(seed, n)`.
pub fn verify_non_almost_mixing(plan: &AdversaryPlan, n_samples: usize, seed: u64) -> Result<Vec<LevelReport>> {
    check_plan(plan)?;
    if n_samples < 2 && !plan.levels.is_empty() {
        return Err(Error::Invalid("need at least two samples".into()));
    }
    let a = &plan.set;
    let mu = a.measure();
    let alpha2 = plan.flow.alpha[1];
    let tree = &plan.measure;
    let leaf_mass = 0.5f64.powi(tree.depth() as i32);
    let mut out = Vec::with_capacity(plan.levels.len());
    for rec in &plan.levels {
        let rt = plan.flow.rigidity_time(rec.index)?;
        let level_seed = derive_seed(seed, rec.n as u64);
        let shards = shard_ranges(n_samples);
        let parts = map_shards(shards.len(), |k| {
            let mut stream = Stream::new(derive_seed(level_seed, k as u64));
            let mut m = Moments::default();
            let mut rigid = 0usize;
            for _ in 0..shards[k].1 {
                let (leaf, u) = tree.sample_leaf(&mut stream);
                let (big_p, lo, hi) = leaf_window(plan, rec, leaf);
                let tau = lo + u * (hi - lo);
                let v0 = tau.rem_euclid(1.0);
                let v1 = (big_p as f64 * rt.signed_distance + tau * alpha2).rem_euclid(1.0);
                let x = [stream.uniform(), stream.uniform()];
                let y = [(x[0] + v0).rem_euclid(1.0), (x[1] + v1).rem_euclid(1.0)];
                m.push(if a.contains(&x) && a.contains(&y) { 1.0 } else { 0.0 });
                let sym_diff = 2.0 * (mu - overlap_at(a, alpha2, &rt, big_p, tau));
                if sym_diff < 2.0 / rec.n as f64 {
                    rigid += 1;
                }
            }
            (m, rigid)
        });
        let (m, rigid) = parts.into_iter().fold((Moments::default(), 0), |(m, r), (m2, r2)| (m.merge(m2), r + r2));
        let exact: f64 = (0..tree.leaf_count())
            .map(|leaf| {
                let (big_p, lo, hi) = leaf_window(plan, rec, leaf);
                leaf_mass * window_mean(a, alpha2, &rt, big_p, lo, hi)
            })
            .sum();
        out.push(LevelReport {
            n: rec.n,
            scale: rec.scale,
            estimate: m.mean,
            std_error: m.std_error(),
            exact,
            target: mu,
            mixing: mu * mu,
            rigid_fraction: rigid as f64 / n_samples as f64,
        });
    }
    Ok(out)
}
