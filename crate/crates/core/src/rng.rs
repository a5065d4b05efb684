//! Reproducible random streams: one ChaCha8 substream per replication.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::normal;

/// Random stream for a single replication.
///
/// Stream `k` of master seed `s` is the ChaCha8 key derived from `s` with the
/// stream id set to `k`, so replication `k` draws the same numbers no matter
/// which thread runs it or in what order.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by inversion.
    pub fn std_normal(&mut self) -> f64 {
        normal::quantile(self.uniform())
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.std_normal()
    }

    /// Uniform index in `0..n` (Lemire's method, unbiased). `n` must be > 0.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if m as u64 >= threshold {
                return (m >> 64) as usize;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..8).map({
            let mut s = Stream::new(7, 3);
            move |_| s.next_u64()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut s = Stream::new(7, 3);
            move |_| s.next_u64()
        }).collect();
        let c: Vec<u64> = (0..8).map({
            let mut s = Stream::new(7, 4);
            move |_| s.next_u64()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_stays_open() {
        let mut s = Stream::new(1, 0);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn index_covers_range() {
        let mut s = Stream::new(11, 0);
        let mut hits = [0usize; 5];
        for _ in 0..50_000 {
            hits[s.index(5)] += 1;
        }
        for h in hits {
            assert!((h as f64 - 10_000.0).abs() < 500.0, "{hits:?}");
        }
    }

    #[test]
    fn normal_moments() {
        let mut s = Stream::new(2024, 9);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.std_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }
}
