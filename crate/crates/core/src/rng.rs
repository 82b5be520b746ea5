//! Deterministic, splittable random streams.
//!
//! Every stochastic routine in the crate draws from a ChaCha8 stream keyed by
//! a 64-bit seed. Sub-streams are derived by hashing `(seed, index)`, so a
//! computation that is cut into fixed-size shards produces the same numbers no
//! matter how many threads execute the shards.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Number of draws handled by one shard. Fixed so results never depend on
/// the degree of parallelism.
pub const SHARD: usize = 4096;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for component or shard `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(mix(seed ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(mix(index.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// A seeded stream of uniform variates.
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// Runs `f` once per shard index and returns the results in shard order.
pub(crate) fn map_shards<T, F>(shards: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..shards).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..shards).map(f).collect()
    }
}

/// Splits `count` items into `(start, len)` shards of [`SHARD`] items.
pub(crate) fn shard_ranges(count: usize) -> Vec<(usize, usize)> {
    (0..count.div_ceil(SHARD))
        .map(|k| {
            let start = k * SHARD;
            (start, SHARD.min(count - start))
        })
        .collect()
}

/// Running mean and variance (Welford), merged in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Moments {
    pub n: f64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments { n, mean: self.mean + d * other.n / n, m2: self.m2 + other.m2 + d * d * self.n * other.n / n }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2 / (self.n - 1.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 1.0 {
            0.0
        } else {
            (self.variance() / self.n).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    proptest::proptest! {
        #[test]
        fn merged_moments_match_a_single_pass(
            xs in proptest::collection::vec(-10.0..10.0f64, 2..200),
            cut in 0usize..200,
        ) {
            let cut = cut.min(xs.len());
            let mut whole = Moments::default();
            xs.iter().for_each(|&x| whole.push(x));
            let (mut a, mut b) = (Moments::default(), Moments::default());
            xs[..cut].iter().for_each(|&x| a.push(x));
            xs[cut..].iter().for_each(|&x| b.push(x));
            let merged = a.merge(b);
            proptest::prop_assert!((merged.mean - whole.mean).abs() < 1e-12);
            proptest::prop_assert!((merged.variance() - whole.variance()).abs() < 1e-9);
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = {
            let mut s = Stream::new(11);
            (0..8).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = Stream::new(11);
            (0..8).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(5, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(0, 1));
    }

    #[test]
    fn uniform_range() {
        let mut s = Stream::new(3);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn merged_moments_match_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (l, r) = xs.split_at(333);
        let mut a = Moments::default();
        let mut b = Moments::default();
        l.iter().for_each(|&x| a.push(x));
        r.iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-9);
    }

    #[test]
    fn shards_cover_count() {
        let r = shard_ranges(SHARD * 2 + 5);
        assert_eq!(r.len(), 3);
        assert_eq!(r[2], (2 * SHARD, 5));
        assert!(shard_ranges(0).is_empty());
    }
}
