//! Cantor-type measures on nested binary interval trees.
//!
//! Level 0 is `[0, 1]`. Every node at level `n` has two disjoint children at
//! level `n + 1`, and each of the `2^n` level-`n` nodes carries mass `2^{-n}`.
//! Below the last level the mass is spread uniformly over each leaf.
//!
//! Nodes are stored as `(offset, half_width)` relative to the parent's
//! center. Deep trees built against large time scales have intervals far
//! narrower than the spacing of doubles near `1/2`; relative storage keeps
//! their geometry exact enough to evaluate `s·(r - c)` for huge `s`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::sinc;
use super::MeasureError;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalNode {
    /// Center minus the parent's center.
    pub offset: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalTree {
    /// `levels[k]` holds the `2^{k+1}` nodes of level `k + 1`; the children
    /// of node `j` are `2j` and `2j + 1`.
    pub levels: Vec<Vec<IntervalNode>>,
}

const ROOT_CENTER: f64 = 0.5;
const ROOT_HALF_WIDTH: f64 = 0.5;

impl IntervalTree {
    pub fn new(levels: Vec<Vec<IntervalNode>>) -> Result<Self, MeasureError> {
        let t = IntervalTree { levels };
        t.validate()?;
        Ok(t)
    }

    /// Builds a tree from absolute `(lo, hi)` intervals per level.
    pub fn from_absolute(levels: &[Vec<(f64, f64)>]) -> Result<Self, MeasureError> {
        let mut out: Vec<Vec<IntervalNode>> = Vec::with_capacity(levels.len());
        for (k, level) in levels.iter().enumerate() {
            let nodes = level
                .iter()
                .enumerate()
                .map(|(j, &(lo, hi))| {
                    let parent = if k == 0 {
                        ROOT_CENTER
                    } else {
                        let (plo, phi) = levels[k - 1].get(j / 2).copied().unwrap_or((f64::NAN, f64::NAN));
                        0.5 * (plo + phi)
                    };
                    IntervalNode { offset: 0.5 * (lo + hi) - parent, half_width: 0.5 * (hi - lo) }
                })
                .collect();
            out.push(nodes);
        }
        IntervalTree::new(out)
    }

    /// First `depth` levels of the middle-thirds construction.
    pub fn middle_thirds(depth: usize) -> Self {
        let mut levels = Vec::with_capacity(depth);
        let mut hw = ROOT_HALF_WIDTH;
        for k in 0..depth {
            let child = hw / 3.0;
            let node = |sign: f64| IntervalNode { offset: sign * (hw - child), half_width: child };
            levels.push((0..(2usize << k)).map(|j| node(if j % 2 == 0 { -1.0 } else { 1.0 })).collect());
            hw = child;
        }
        IntervalTree { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn leaf_count(&self) -> usize {
        1usize << self.depth()
    }

    fn node(&self, level: usize, index: usize) -> IntervalNode {
        if level == 0 {
            IntervalNode { offset: 0.0, half_width: ROOT_HALF_WIDTH }
        } else {
            self.levels[level - 1][index]
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if self.depth() > 40 {
            return Err(MeasureError::Invalid("interval trees deeper than 40 levels are not supported".into()));
        }
        for (k, level) in self.levels.iter().enumerate() {
            let n = k + 1;
            if level.len() != 1 << n {
                return Err(MeasureError::Invalid(format!(
                    "level {n} has {} intervals, expected {}",
                    level.len(),
                    1usize << n
                )));
            }
            for (j, node) in level.iter().enumerate() {
                if !(node.half_width.is_finite() && node.half_width > 0.0 && node.offset.is_finite()) {
                    return Err(MeasureError::Invalid(format!("level {n} interval {j} is degenerate")));
                }
                let parent = self.node(n - 1, j / 2);
                let slack = 1e-12 * parent.half_width;
                if node.offset.abs() + node.half_width > parent.half_width + slack {
                    return Err(MeasureError::Invalid(format!("level {n} interval {j} leaves its parent")));
                }
            }
            for pair in level.chunks(2) {
                if (pair[1].offset - pair[0].offset).abs() <= pair[0].half_width + pair[1].half_width {
                    return Err(MeasureError::Invalid(format!("level {n} siblings overlap")));
                }
            }
        }
        Ok(())
    }

    /// Absolute center of a node, summed from the root (rounded to `f64`).
    pub fn center(&self, level: usize, index: usize) -> f64 {
        let mut c = ROOT_CENTER;
        for k in 1..=level {
            c += self.levels[k - 1][index >> (level - k)].offset;
        }
        c
    }

    /// Absolute `(lo, hi)` of a node.
    pub fn interval(&self, level: usize, index: usize) -> (f64, f64) {
        let c = self.center(level, index);
        let hw = self.node(level, index).half_width;
        (c - hw, c + hw)
    }

    /// Offset of a point in leaf `leaf` (at relative position `u ∈ [0,1)`)
    /// from the center of its level-`level` ancestor. Summed from the
    /// smallest terms up, so it stays accurate relative to the ancestor's
    /// width.
    pub fn offset_from_ancestor(&self, leaf: usize, u: f64, level: usize) -> f64 {
        let depth = self.depth();
        let mut x = (2.0 * u - 1.0) * self.node(depth, leaf).half_width;
        for k in (level + 1..=depth).rev() {
            x += self.levels[k - 1][leaf >> (depth - k)].offset;
        }
        x
    }

    pub fn char_fn(&self, xi: f64) -> Complex64 {
        let depth = self.depth();
        let leaf_mass = 0.5f64.powi(depth as i32);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut stack = vec![(0usize, 0usize, Complex64::from_polar(1.0, xi * ROOT_CENTER))];
        while let Some((level, index, phase)) = stack.pop() {
            if level == depth {
                acc += phase * (leaf_mass * sinc(xi * self.node(level, index).half_width));
                continue;
            }
            for child in [2 * index, 2 * index + 1] {
                let off = self.levels[level][child].offset;
                stack.push((level + 1, child, phase * Complex64::from_polar(1.0, xi * off)));
            }
        }
        acc
    }

    /// Uniform random leaf and uniform position inside it.
    pub fn sample_leaf(&self, stream: &mut Stream) -> (usize, f64) {
        let bits = stream.next_u64();
        let leaf = if self.depth() == 0 { 0 } else { (bits >> (64 - self.depth())) as usize };
        (leaf, stream.uniform())
    }

    pub fn tail_mass(&self, n: f64) -> f64 {
        let depth = self.depth();
        let leaf_mass = 0.5f64.powi(depth as i32);
        (0..self.leaf_count())
            .map(|j| {
                let (lo, hi) = self.interval(depth, j);
                let inside = (hi.min(n) - lo.max(-n)).max(0.0);
                leaf_mass * (1.0 - inside / (hi - lo)).clamp(0.0, 1.0)
            })
            .sum()
    }

    /// Leftmost and rightmost leaf endpoints.
    pub fn hull(&self) -> (f64, f64) {
        let depth = self.depth();
        (self.interval(depth, 0).0, self.interval(depth, self.leaf_count() - 1).1)
    }
}
