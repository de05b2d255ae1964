//! Randomness for the encoders.
//!
//! Every random choice made by a sampler, channel or encoder goes through the
//! [`Coins`] trait. Simulation uses [`RngCoins`]; the exact leakage oracle uses
//! [`enumerate`], which replays the same code once per outcome branch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub trait Coins {
    /// Returns 1 with probability `p_one`.
    fn bit(&mut self, p_one: f64) -> u8;

    /// Index drawn from a probability vector.
    fn choice(&mut self, probs: &[f64]) -> usize;

    /// Uniform integer in `0..count`.
    fn uniform(&mut self, count: u64) -> u64;

    fn uniform_bits(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.bit(0.5)).collect()
    }

    /// Uniform nonzero bit vector of length `n >= 1`.
    fn nonzero_bits(&mut self, n: usize) -> Vec<u8>;
}

/// Coins backed by a seeded random generator.
pub struct RngCoins<R: Rng> {
    rng: R,
}

impl<R: Rng> RngCoins<R> {
    pub fn new(rng: R) -> Self {
        RngCoins { rng }
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }
}

impl RngCoins<ChaCha8Rng> {
    /// Stream `stream` of the master seed: the counter-based split used for
    /// trials, so serial and parallel runs see identical draws.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngCoins { rng }
    }
}

impl<R: Rng> Coins for RngCoins<R> {
    fn bit(&mut self, p_one: f64) -> u8 {
        if p_one <= 0.0 {
            0
        } else if p_one >= 1.0 {
            1
        } else {
            (self.rng.gen::<f64>() < p_one) as u8
        }
    }

    fn choice(&mut self, probs: &[f64]) -> usize {
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    fn uniform(&mut self, count: u64) -> u64 {
        self.rng.gen_range(0..count)
    }

    fn uniform_bits(&mut self, n: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let w: u64 = self.rng.gen();
            let take = (n - out.len()).min(64);
            out.extend((0..take).map(|i| ((w >> i) & 1) as u8));
        }
        out
    }

    fn nonzero_bits(&mut self, n: usize) -> Vec<u8> {
        loop {
            let b = self.uniform_bits(n);
            if b.contains(&1) {
                return b;
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("enumeration exceeds {limit} outcomes")]
    Overflow { limit: usize },
    #[error("uniform choice over {0} values is too wide to enumerate")]
    TooWide(u64),
}

/// Largest number of leaves [`enumerate`] will visit.
pub const MAX_OUTCOMES: usize = 1 << 24;

enum Options {
    Probs(Vec<f64>),
    Uniform(u64),
}

impl Options {
    fn prob(&self, i: usize) -> f64 {
        match self {
            Options::Probs(p) => p[i],
            Options::Uniform(c) => 1.0 / *c as f64,
        }
    }

    fn next_after(&self, i: usize) -> Option<usize> {
        match self {
            Options::Probs(p) => (i + 1..p.len()).find(|&j| p[j] > 0.0),
            Options::Uniform(c) => (((i + 1) as u64) < *c).then_some(i + 1),
        }
    }

    fn first(&self) -> usize {
        match self {
            Options::Probs(p) => p.iter().position(|&x| x > 0.0).unwrap_or(0),
            Options::Uniform(_) => 0,
        }
    }
}

/// Coins that follow a prescribed path of choices and record the branching
/// structure of one run.
pub struct ReplayCoins {
    path: Vec<usize>,
    taken: Vec<usize>,
    options: Vec<Options>,
    prob: f64,
    error: Option<EnumerationError>,
}

impl ReplayCoins {
    fn new(path: Vec<usize>) -> Self {
        ReplayCoins { path, taken: Vec::new(), options: Vec::new(), prob: 1.0, error: None }
    }

    fn step(&mut self, opts: Options) -> usize {
        let pos = self.taken.len();
        let i = if pos < self.path.len() { self.path[pos] } else { opts.first() };
        self.prob *= opts.prob(i);
        self.taken.push(i);
        self.options.push(opts);
        i
    }
}

impl Coins for ReplayCoins {
    fn bit(&mut self, p_one: f64) -> u8 {
        if p_one <= 0.0 {
            0
        } else if p_one >= 1.0 {
            1
        } else {
            self.step(Options::Probs(vec![1.0 - p_one, p_one])) as u8
        }
    }

    fn choice(&mut self, probs: &[f64]) -> usize {
        if probs.iter().filter(|&&p| p > 0.0).count() == 1 {
            return probs.iter().position(|&p| p > 0.0).unwrap();
        }
        self.step(Options::Probs(probs.to_vec()))
    }

    fn uniform(&mut self, count: u64) -> u64 {
        if count <= 1 {
            return 0;
        }
        if count > MAX_OUTCOMES as u64 {
            self.error = Some(EnumerationError::TooWide(count));
            return 0;
        }
        self.step(Options::Uniform(count)) as u64
    }

    fn nonzero_bits(&mut self, n: usize) -> Vec<u8> {
        if n >= 63 {
            self.error = Some(EnumerationError::TooWide(u64::MAX));
            return vec![1; n];
        }
        let v = self.uniform((1u64 << n) - 1) + 1;
        (0..n).map(|i| ((v >> (n - 1 - i)) & 1) as u8).collect()
    }
}

/// Runs `program` once per outcome branch of its coins and returns every
/// (result, probability) leaf. Branches of probability zero are skipped.
pub fn enumerate<T, F>(program: F, limit: usize) -> Result<Vec<(T, f64)>, EnumerationError>
where
    F: FnMut(&mut ReplayCoins) -> T,
{
    let mut leaves = Vec::new();
    enumerate_into(program, limit, |out, p| leaves.push((out, p)))?;
    Ok(leaves)
}

/// Like [`enumerate`], but hands each leaf to `sink` instead of storing it.
/// Returns the number of leaves.
pub fn enumerate_into<T, F, S>(mut program: F, limit: usize, mut sink: S) -> Result<usize, EnumerationError>
where
    F: FnMut(&mut ReplayCoins) -> T,
    S: FnMut(T, f64),
{
    let mut count = 0;
    let mut path = Vec::new();
    loop {
        let mut coins = ReplayCoins::new(path);
        let out = program(&mut coins);
        if let Some(e) = coins.error {
            return Err(e);
        }
        count += 1;
        if count > limit {
            return Err(EnumerationError::Overflow { limit });
        }
        sink(out, coins.prob);
        let mut i = coins.taken.len();
        loop {
            if i == 0 {
                return Ok(count);
            }
            i -= 1;
            if let Some(j) = coins.options[i].next_after(coins.taken[i]) {
                path = coins.taken[..i].to_vec();
                path.push(j);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_bits_and_choices() {
        let leaves = enumerate(
            |c| {
                let a = c.bit(0.25);
                let b = c.choice(&[0.5, 0.0, 0.5]);
                (a, b)
            },
            100,
        )
        .unwrap();
        assert_eq!(leaves.len(), 4);
        let total: f64 = leaves.iter().map(|l| l.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let p = leaves.iter().find(|l| l.0 == (1, 2)).unwrap().1;
        assert!((p - 0.125).abs() < 1e-15);
    }

    #[test]
    fn deterministic_coins_do_not_branch() {
        let leaves = enumerate(|c| (c.bit(0.0), c.bit(1.0), c.choice(&[0.0, 1.0])), 10).unwrap();
        assert_eq!(leaves, vec![((0, 1, 1), 1.0)]);
    }

    #[test]
    fn nonzero_bits_cover_all_nonzero_values() {
        let leaves = enumerate(|c| c.nonzero_bits(3), 100).unwrap();
        assert_eq!(leaves.len(), 7);
        assert!(leaves.iter().all(|(b, p)| b.contains(&1) && (p - 1.0 / 7.0).abs() < 1e-15));
    }

    #[test]
    fn overflow_is_reported() {
        let r = enumerate(|c| c.uniform_bits(5), 8);
        assert_eq!(r.unwrap_err(), EnumerationError::Overflow { limit: 8 });
    }

    #[test]
    fn rng_streams_are_reproducible() {
        let a = RngCoins::stream(9, 3).uniform_bits(100);
        let b = RngCoins::stream(9, 3).uniform_bits(100);
        let c = RngCoins::stream(9, 4).uniform_bits(100);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
