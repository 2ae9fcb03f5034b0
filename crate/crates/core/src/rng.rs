//! Portable seeded pseudo-random generator.
//!
//! xoshiro256** (Blackman & Vigna) with its state expanded from a 64-bit
//! seed by SplitMix64. Every derived variate uses a fixed transform so a
//! sequence is reproducible on any platform:
//!
//! * uniform on (0,1): `((x >> 11) + 0.5) * 2^-53`
//! * uniform integer on [0,n): Lemire's multiply-shift with rejection
//! * standard normal: Box–Muller, cosine branch, two uniforms per draw

use std::f64::consts::TAU;

use crate::error::{Error, Result};

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { seed, s }
    }

    /// Independent generator for sub-stream `stream` of this seed.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut sm = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
        Rng::new(splitmix64(&mut sm))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform on the open interval (0, 1).
    pub fn unit_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (a, b). Requires `a < b`.
    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        debug_assert!(a < b);
        let x = a + (b - a) * self.unit_open();
        // rounding can land on an endpoint for very narrow intervals
        x.clamp(a.next_up(), b.next_down())
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.unit_open();
        let u2 = self.unit_open();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Uniform integer on `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }
}

/// `batch` i.i.d. uniform indices from `{0, …, n-1}`, drawn with replacement.
pub fn sample_batch(rng: &mut Rng, n: usize, batch: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if batch == 0 {
        return Err(Error::Precondition("batch size must be at least 1".into()));
    }
    Ok((0..batch).map(|_| rng.below(n as u64) as usize).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_splitmix_sequence() {
        // published SplitMix64 outputs for seed 0
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(&mut s), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn single_index_population() {
        let mut rng = Rng::new(7);
        assert_eq!(sample_batch(&mut rng, 1, 3).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn empty_population_is_an_error() {
        let mut rng = Rng::new(7);
        assert!(matches!(sample_batch(&mut rng, 0, 3), Err(Error::EmptyDataset)));
    }

    #[test]
    fn same_seed_same_batches() {
        let a = sample_batch(&mut Rng::new(99), 1000, 10).unwrap();
        let b = sample_batch(&mut Rng::new(99), 1000, 10).unwrap();
        assert_eq!(a, b);
        let c = sample_batch(&mut Rng::new(100), 1000, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn index_frequencies_are_uniform() {
        let mut rng = Rng::new(2024);
        let draws = 1_000_000;
        let mut counts = [0usize; 10];
        for i in sample_batch(&mut rng, 10, draws).unwrap() {
            counts[i] += 1;
        }
        let mut chi2 = 0.0;
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.1).abs() <= 0.003, "freq {freq}");
            let e = draws as f64 / 10.0;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // 99.9th percentile of chi-square with 9 dof
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.03, "var {var}");
    }

    #[test]
    fn uniform_support() {
        let mut rng = Rng::new(11);
        for _ in 0..100_000 {
            let x = rng.uniform(-10.0, 10.0);
            assert!(x > -10.0 && x < 10.0);
        }
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = Rng::derive(1, 0);
        let mut b = Rng::derive(1, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
