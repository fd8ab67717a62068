use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Collocation points; `x` is empty for ODE problems.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn is_spatial(&self) -> bool {
        !self.x.is_empty()
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x.get(i).copied().unwrap_or(0.0)
    }

    pub fn subset(&self, idx: &[usize]) -> PointSet {
        PointSet {
            x: if self.is_spatial() { idx.iter().map(|&i| self.x[i]).collect() } else { Vec::new() },
            t: idx.iter().map(|&i| self.t[i]).collect(),
        }
    }
}

/// Mix a base seed with a stream tag and window index.
pub fn derive_seed(seed: u64, tag: u64, window: usize) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((window as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` points uniform in `window × domain`, or in `window` alone.
pub fn sample_collocation(
    window: (f64, f64),
    domain: Option<(f64, f64)>,
    n: usize,
    seed: u64,
) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::config("need at least one collocation point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = PointSet {
        x: Vec::with_capacity(if domain.is_some() { n } else { 0 }),
        t: Vec::with_capacity(n),
    };
    for _ in 0..n {
        if let Some((a, b)) = domain {
            set.x.push(rng.random_range(a..=b));
        }
        set.t.push(rng.random_range(window.0..=window.1));
    }
    Ok(set)
}

/// Cycles through shuffled permutations of `0..n` in fixed-size batches.
#[derive(Clone, Debug)]
pub struct MiniBatcher {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl MiniBatcher {
    pub fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        MiniBatcher {
            order,
            cursor: 0,
            batch: batch.min(n).max(1),
            rng,
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.batch == self.order.len() {
            return self.order.clone();
        }
        if self.cursor + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + self.batch].to_vec();
        self.cursor += self.batch;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn points_stay_in_the_box() {
        let s = sample_collocation((0.0, 0.25), Some((0.0, 2.0 * PI)), 1000, 3).unwrap();
        assert_eq!(s.len(), 1000);
        assert!(s.t.iter().all(|t| (0.0..=0.25).contains(t)));
        assert!(s.x.iter().all(|x| (0.0..=2.0 * PI).contains(x)));
        assert!(sample_collocation((0.0, 1.0), None, 0, 3).is_err());
    }

    #[test]
    fn same_seed_same_points() {
        let a = sample_collocation((0.0, 1.0), Some((-1.0, 1.0)), 50, 11).unwrap();
        let b = sample_collocation((0.0, 1.0), Some((-1.0, 1.0)), 50, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_collocation((0.0, 1.0), Some((-1.0, 1.0)), 50, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn time_mean_is_central() {
        let s = sample_collocation((0.0, 1.0), None, 100_000, 5).unwrap();
        let mean = s.t.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        assert!(s.x.is_empty());
    }

    #[test]
    fn batches_cover_every_point_per_epoch() {
        let mut b = MiniBatcher::new(12, 4, 1);
        let mut seen: Vec<usize> = (0..3).flat_map(|_| b.next_batch()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        let mut full = MiniBatcher::new(5, 5, 1);
        assert_eq!(full.next_batch(), full.next_batch());
    }
}
