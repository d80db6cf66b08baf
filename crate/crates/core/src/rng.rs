//! Seeding and order-independent aggregation for parallel Monte Carlo.
//!
//! Work is split into fixed-size blocks whose count depends only on the
//! requested number of draws. Block `i` gets its own ChaCha stream seeded by
//! [`child_seed`]`(master, i)`, so results are identical for any thread count.
//! Block summaries are merged in block order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Draws per parallel block.
pub const BLOCK: usize = 4096;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for block `index` under `master`: `mix64(master + (index + 1)·φ64)`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng_for(master: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(child_seed(master, index))
}

/// Splits `total` draws into `(block_index, len)` pairs.
pub fn blocks(total: usize) -> Vec<(u64, usize)> {
    (0..total.div_ceil(BLOCK))
        .map(|i| (i as u64, BLOCK.min(total - i * BLOCK)))
        .collect()
}

/// Running mean and centered second moment (Welford), mergeable (Chan et al.).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        let w = other.count as f64 / n;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.count as f64 * w;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Sample standard deviation over `sqrt(count)`.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn merged<'a, I: IntoIterator<Item = &'a Moments>>(parts: I) -> Moments {
        let mut acc = Moments::default();
        for p in parts {
            acc.merge(p);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_differ() {
        let a: Vec<u64> = (0..1000).map(|i| child_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(child_seed(7, 0), child_seed(8, 0));
    }

    #[test]
    fn blocks_cover_total() {
        let bs = blocks(3 * BLOCK + 5);
        assert_eq!(bs.len(), 4);
        assert_eq!(bs.iter().map(|b| b.1).sum::<usize>(), 3 * BLOCK + 5);
        assert!(blocks(0).is_empty());
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let parts: Vec<Moments> = xs
            .chunks(77)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|&x| m.push(x));
                m
            })
            .collect();
        let merged = Moments::merged(&parts);
        assert_eq!(merged.count, whole.count);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.variance() - whole.variance()).abs() < 1e-10);
    }
}
