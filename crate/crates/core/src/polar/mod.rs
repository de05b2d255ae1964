//! Polar transform, successive-cancellation (SC) recursion, and the SC-based
//! decoder and sampler.
//!
//! Convention: `x = u * G_K` with `G_K = [1 0; 1 1]^{(x) log K}` and no
//! bit-reversal, so for K = 2 the map is `(u1, u2) -> (u1 ^ u2, u2)`. The same
//! map is used for `A = U * G_K` and `V = X * G_K`; it is its own inverse.

mod channel_code;
mod profile;

pub use channel_code::PolarChannelCode;
pub use profile::{
    build_index_sets, construct_index_sets, entropy_profile, EntropyProfile, IndexSets, ProfileCache, ProfileMode,
    ProfileSet, Role,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;
use crate::coins::Coins;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarError {
    #[error("block length {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("expected length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("polarization exponent {0} outside (0, 1/2)")]
    Beta(f64),
    #[error("invalid source law: {0}")]
    Source(String),
    #[error("observation symbol {symbol} outside alphabet of size {alphabet}")]
    Observation { symbol: u8, alphabet: usize },
    #[error("conditioning event has probability zero at index {index}")]
    ZeroProbability { index: usize },
    #[error("exact profile needs K <= 8 and side alphabet <= 4 (K = {k}, alphabet = {alphabet})")]
    ExactInfeasible { k: usize, alphabet: usize },
    #[error("Monte Carlo profile needs at least 1000 samples, got {0}")]
    TooFewSamples(usize),
    #[error("{discarded} of {samples} Monte Carlo samples hit zero-probability posteriors")]
    Discards { discarded: usize, samples: usize },
    #[error("profile for role {0:?} missing")]
    MissingRole(Role),
    #[error("profiles disagree on block length")]
    KMismatch,
    #[error("known bits do not cover required index {index}")]
    Incomplete { index: usize },
    #[error("argmax sampling needs the high-entropy set")]
    MissingHighSet,
    #[error("rate {rate} is not below the estimated capacity {capacity}")]
    RateAboveCapacity { rate: f64, capacity: f64 },
    #[error("profile cache: {0}")]
    Cache(String),
}

pub fn check_block_length(k: usize) -> Result<(), PolarError> {
    if k < 2 || !k.is_power_of_two() {
        return Err(PolarError::NotPowerOfTwo(k));
    }
    Ok(())
}

/// Returns `u * G_K`.
pub fn transform(u: &[u8]) -> Result<Vec<u8>, PolarError> {
    check_block_length(u.len())?;
    let mut x = u.to_vec();
    if x.len() <= 4096 {
        transform_in_place(&mut x);
    } else {
        let mut words = pack(&x);
        transform_packed(&mut words, x.len());
        x = unpack(&words, x.len());
    }
    Ok(x)
}

/// Byte-per-bit butterfly; `x.len()` must be a power of two.
pub fn transform_in_place(x: &mut [u8]) {
    let k = x.len();
    let mut h = 1;
    while h < k {
        for block in x.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (p, q) in a.iter_mut().zip(b.iter()) {
                *p ^= q;
            }
        }
        h *= 2;
    }
}

const STRIDE_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

/// Transform of `k` bits packed little-endian into words (bit i of the
/// vector is bit i % 64 of word i / 64).
pub fn transform_packed(words: &mut [u64], k: usize) {
    debug_assert!(k.is_power_of_two() && words.len() == k.div_ceil(64));
    for (s, &mask) in STRIDE_MASKS.iter().enumerate() {
        let h = 1usize << s;
        if h >= k {
            return;
        }
        for w in words.iter_mut() {
            *w ^= (*w >> h) & mask;
        }
    }
    let mut h = 1;
    while 64 * h < k {
        for block in words.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (p, q) in a.iter_mut().zip(b.iter()) {
                *p ^= q;
            }
        }
        h *= 2;
    }
}

pub fn pack(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        words[i / 64] |= ((b & 1) as u64) << (i % 64);
    }
    words
}

pub fn unpack(words: &[u64], k: usize) -> Vec<u8> {
    (0..k).map(|i| ((words[i / 64] >> (i % 64)) & 1) as u8).collect()
}

/// Block length and polarization exponent; threshold `2^{-K^beta}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarParams {
    pub k: usize,
    pub beta: f64,
}

impl PolarParams {
    pub fn new(k: usize, beta: f64) -> Result<Self, PolarError> {
        check_block_length(k)?;
        if !(beta > 0.0 && beta < 0.5) {
            return Err(PolarError::Beta(beta));
        }
        Ok(PolarParams { k, beta })
    }

    pub fn delta(&self) -> f64 {
        (-(self.k as f64).powf(self.beta)).exp2()
    }
}

/// Joint law of the binary pair (U, X) as `q[u][x]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceRepr", into = "SourceRepr")]
pub struct SourceSpec {
    q: [[f64; 2]; 2],
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
struct SourceRepr {
    q: [[f64; 2]; 2],
    #[serde(default)]
    degenerate: bool,
}

impl TryFrom<SourceRepr> for SourceSpec {
    type Error = PolarError;
    fn try_from(r: SourceRepr) -> Result<Self, PolarError> {
        if r.degenerate {
            SourceSpec::new_degenerate(r.q)
        } else {
            SourceSpec::new(r.q)
        }
    }
}

impl From<SourceSpec> for SourceRepr {
    fn from(s: SourceSpec) -> Self {
        SourceRepr { q: s.q, degenerate: s.degenerate }
    }
}

impl SourceSpec {
    /// Joint law with both marginals nondegenerate.
    pub fn new(q: [[f64; 2]; 2]) -> Result<Self, PolarError> {
        let s = SourceSpec::new_degenerate(q)?;
        for (name, m) in [("U", s.q_u()), ("X", s.q_x())] {
            if m[0] == 0.0 || m[1] == 0.0 {
                return Err(PolarError::Source(format!("marginal of {name} is degenerate")));
            }
        }
        Ok(SourceSpec { degenerate: false, ..s })
    }

    /// Joint law that may put all mass on one value of U or X.
    pub fn new_degenerate(q: [[f64; 2]; 2]) -> Result<Self, PolarError> {
        let flat = q.iter().flatten();
        if flat.clone().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(PolarError::Source("negative or non-finite entry".into()));
        }
        let total: f64 = flat.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PolarError::Source(format!("total mass {total}")));
        }
        Ok(SourceSpec { q, degenerate: true })
    }

    /// U = X with `P[U = 1] = p1`.
    pub fn identity(p1: f64) -> Result<Self, PolarError> {
        SourceSpec::new([[1.0 - p1, 0.0], [0.0, p1]])
    }

    pub fn uniform() -> Self {
        SourceSpec::identity(0.5).unwrap()
    }

    /// U ~ Ber(p1), X = U through a BSC(flip).
    pub fn prefixed(p1: f64, flip: f64) -> Result<Self, PolarError> {
        SourceSpec::new([[(1.0 - p1) * (1.0 - flip), (1.0 - p1) * flip], [p1 * flip, p1 * (1.0 - flip)]])
    }

    pub fn q(&self) -> [[f64; 2]; 2] {
        self.q
    }

    pub fn q_u(&self) -> [f64; 2] {
        [self.q[0][0] + self.q[0][1], self.q[1][0] + self.q[1][1]]
    }

    pub fn q_x(&self) -> [f64; 2] {
        [self.q[0][0] + self.q[1][0], self.q[0][1] + self.q[1][1]]
    }
}

/// Joint law of one binary variable and one observation symbol:
/// `weights[o][bit] = P(bit, o)`. The SC recursion runs over i.i.d. copies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    weights: Vec<[f64; 2]>,
}

impl JointModel {
    pub fn new(weights: Vec<[f64; 2]>) -> Result<Self, PolarError> {
        if weights.is_empty() || weights.len() > 256 {
            return Err(PolarError::Source(format!("observation alphabet of size {}", weights.len())));
        }
        let total: f64 = weights.iter().flatten().sum();
        if weights.iter().flatten().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(PolarError::Source(format!("joint weights have total mass {total}")));
        }
        Ok(JointModel { weights })
    }

    /// A = U G with no side information.
    pub fn u(source: &SourceSpec) -> Self {
        JointModel { weights: vec![source.q_u()] }
    }

    /// A = U G given Y, the output of `channel` fed with X.
    pub fn u_given_y(source: &SourceSpec, channel: &Dmc) -> Self {
        let q = source.q();
        let weights = (0..channel.outputs() as u8)
            .map(|y| {
                let w = |u: usize| q[u][0] * channel.prob(0, y) + q[u][1] * channel.prob(1, y);
                [w(0), w(1)]
            })
            .collect();
        JointModel { weights }
    }

    /// V = X G with no side information.
    pub fn x(source: &SourceSpec) -> Self {
        JointModel { weights: vec![source.q_x()] }
    }

    /// V = X G given U.
    pub fn x_given_u(source: &SourceSpec) -> Self {
        let q = source.q();
        JointModel { weights: vec![q[0], q[1]] }
    }

    /// Uniform channel input observed through `channel`.
    pub fn channel_input(channel: &Dmc) -> Self {
        let weights =
            (0..channel.outputs() as u8).map(|y| [0.5 * channel.prob(0, y), 0.5 * channel.prob(1, y)]).collect();
        JointModel { weights }
    }

    pub fn alphabet(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[[f64; 2]] {
        &self.weights
    }

    /// `P(bit = 0 | o)` per observation; `None` for observations of zero mass.
    fn posterior_table(&self) -> Vec<Option<f64>> {
        self.weights
            .iter()
            .map(|w| {
                let s = w[0] + w[1];
                (s > 0.0).then(|| w[0] / s)
            })
            .collect()
    }

    /// Per-position `P(bit = 0 | o_i)`; no side sequence means observation 0
    /// everywhere. Observations of zero mass map to 1/2 and are reported.
    pub fn leaf_probs(&self, side: Option<&[u8]>, k: usize) -> Result<(Vec<f64>, usize), PolarError> {
        let table = self.posterior_table();
        match side {
            None => {
                if self.alphabet() != 1 {
                    return Err(PolarError::Length { expected: k, got: 0 });
                }
                let p = table[0].unwrap_or(0.5);
                Ok((vec![p; k], table[0].is_none() as usize * k))
            }
            Some(obs) => {
                if obs.len() != k {
                    return Err(PolarError::Length { expected: k, got: obs.len() });
                }
                let mut bad = 0;
                let mut out = Vec::with_capacity(k);
                for &o in obs {
                    let entry = table.get(o as usize).ok_or(PolarError::Observation { symbol: o, alphabet: table.len() })?;
                    out.push(entry.unwrap_or_else(|| {
                        bad += 1;
                        0.5
                    }));
                }
                Ok((out, bad))
            }
        }
    }
}

/// Reusable buffers for the SC recursion over probabilities `P(bit = 0)`.
///
/// Node of size s reads its inputs from `w[s..2s]` and writes its re-encoded
/// bits to `bits[s..2s]`; children use the size s/2 slots.
pub struct ScKernel {
    k: usize,
    w: Vec<f64>,
    bits: Vec<u8>,
    zero_events: usize,
}

impl ScKernel {
    pub fn new(k: usize) -> Self {
        ScKernel { k, w: vec![0.5; 2 * k], bits: vec![0; 2 * k], zero_events: 0 }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Zero-mass combinations met in the last run (replaced by 1/2).
    pub fn zero_events(&self) -> usize {
        self.zero_events
    }

    /// `G_K` applied to the decided bits after a complete run.
    pub fn image(&self) -> &[u8] {
        &self.bits[self.k..]
    }

    /// Runs the recursion on leaf probabilities `leaf[i] = P(x_i = 0 | o_i)`.
    /// `decide(i, p0)` receives `P(A^i = 0 | a^{<i}, o)` and returns the bit
    /// to fix, or `None` to stop. Returns whether all K bits were decided.
    pub fn run<F: FnMut(usize, f64) -> Option<u8>>(&mut self, leaf: &[f64], mut decide: F) -> bool {
        assert_eq!(leaf.len(), self.k);
        self.w[self.k..].copy_from_slice(leaf);
        self.zero_events = 0;
        node(self.k, 0, &mut self.w, &mut self.bits, &mut self.zero_events, &mut decide)
    }
}

fn node<F: FnMut(usize, f64) -> Option<u8>>(
    s: usize,
    base: usize,
    w: &mut [f64],
    bits: &mut [u8],
    zeros: &mut usize,
    decide: &mut F,
) -> bool {
    if s == 1 {
        return match decide(base, w[1]) {
            Some(b) => {
                bits[1] = b;
                true
            }
            None => false,
        };
    }
    if s == 2 {
        let (a, b) = (w[2], w[3]);
        let Some(c) = decide(base, minus(a, b)) else { return false };
        let Some(d) = decide(base + 1, plus(a, b, c, zeros)) else { return false };
        bits[2] = c ^ d;
        bits[3] = d;
        return true;
    }
    let h = s / 2;
    {
        let (lo, hi) = w.split_at_mut(s);
        let (a, b) = hi[..s].split_at(h);
        for ((t, &pa), &pb) in lo[h..].iter_mut().zip(a).zip(b) {
            *t = minus(pa, pb);
        }
    }
    if !node(h, base, w, bits, zeros, decide) {
        return false;
    }
    bits.copy_within(h..s, s);
    {
        let (lo, hi) = w.split_at_mut(s);
        let (a, b) = hi[..s].split_at(h);
        let mut z = 0;
        for (((t, &pa), &pb), &c) in lo[h..].iter_mut().zip(a).zip(b).zip(&bits[s..s + h]) {
            let pa = pa + c as f64 * (1.0 - 2.0 * pa);
            let num = pa * pb;
            let den = num + (1.0 - pa) * (1.0 - pb);
            z += (den <= 0.0) as usize;
            *t = if den > 0.0 { num / den } else { 0.5 };
        }
        *zeros += z;
    }
    if !node(h, base + h, w, bits, zeros, decide) {
        return false;
    }
    let (left, right) = bits.split_at_mut(s);
    for (j, &r) in left[h..].iter().enumerate() {
        right[j] ^= r;
        right[h + j] = r;
    }
    true
}

/// Probability of 0 for the sum of two independent bits.
#[inline]
fn minus(a: f64, b: f64) -> f64 {
    a * b + (1.0 - a) * (1.0 - b)
}

/// Probability of 0 for the second bit given the first sum is `c`.
#[inline]
fn plus(a: f64, b: f64, c: u8, zeros: &mut usize) -> f64 {
    let a = if c == 0 { a } else { 1.0 - a };
    let num = a * b;
    let den = num + (1.0 - a) * (1.0 - b);
    if den > 0.0 {
        num / den
    } else {
        *zeros += 1;
        0.5
    }
}

/// `P(A^j = 0 | a^{<j}, o^{1:K})` under the product law of `model`.
pub fn sc_posterior(prefix: &[u8], side: Option<&[u8]>, j: usize, model: &JointModel, k: usize) -> Result<f64, PolarError> {
    check_block_length(k)?;
    if j >= k || prefix.len() < j {
        return Err(PolarError::Length { expected: j, got: prefix.len() });
    }
    let (leaf, bad) = model.leaf_probs(side, k)?;
    if bad > 0 {
        return Err(PolarError::ZeroProbability { index: 0 });
    }
    let mut kernel = ScKernel::new(k);
    let mut result = Err(PolarError::ZeroProbability { index: j });
    kernel.run(&leaf, |i, p0| {
        if i == j {
            if kernel_ok(p0) {
                result = Ok(p0);
            }
            return None;
        }
        let b = prefix[i];
        let p = if b == 0 { p0 } else { 1.0 - p0 };
        if p <= 0.0 {
            result = Err(PolarError::ZeroProbability { index: i });
            return None;
        }
        Some(b)
    });
    if kernel.zero_events() > 0 {
        return Err(PolarError::ZeroProbability { index: j });
    }
    result
}

fn kernel_ok(p: f64) -> bool {
    p.is_finite() && (0.0..=1.0).contains(&p)
}

/// SC decoder for source coding with side information. Known positions are
/// copied; the others take the more likely value (ties give 0).
pub fn sc_decode_si(
    side: &[u8],
    known: &[Option<u8>],
    required: &[usize],
    model: &JointModel,
) -> Result<Vec<u8>, PolarError> {
    let k = side.len();
    check_block_length(k)?;
    if known.len() != k {
        return Err(PolarError::Length { expected: k, got: known.len() });
    }
    if let Some(&index) = required.iter().find(|&&i| i >= k || known[i].is_none()) {
        return Err(PolarError::Incomplete { index });
    }
    let (leaf, _) = model.leaf_probs(Some(side), k)?;
    let mut kernel = ScKernel::new(k);
    let mut out = vec![0u8; k];
    kernel.run(&leaf, |i, p0| {
        let b = known[i].unwrap_or((p0 < 0.5) as u8);
        out[i] = b;
        Some(b)
    });
    Ok(out)
}

/// How unfrozen positions are filled by [`sc_sample`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Draw from the SC posterior.
    #[default]
    Random,
    /// Take the more likely value on positions outside the high-entropy set
    /// and draw elsewhere.
    Argmax,
}

/// SC sampler: frozen positions copy their bits, the rest follow `mode`.
/// `high` marks the high-entropy set and is needed for [`SampleMode::Argmax`].
pub fn sc_sample(
    model: &JointModel,
    side: Option<&[u8]>,
    frozen: &[Option<u8>],
    high: Option<&[bool]>,
    mode: SampleMode,
    coins: &mut dyn Coins,
) -> Result<Vec<u8>, PolarError> {
    let k = frozen.len();
    check_block_length(k)?;
    if mode == SampleMode::Argmax && high.is_none_or(|h| h.len() != k) {
        return Err(PolarError::MissingHighSet);
    }
    let (leaf, _) = model.leaf_probs(side, k)?;
    let mut kernel = ScKernel::new(k);
    let mut out = vec![0u8; k];
    kernel.run(&leaf, |i, p0| {
        let b = match frozen[i] {
            Some(b) => b,
            None => match (mode, high) {
                (SampleMode::Argmax, Some(h)) if !h[i] => (p0 < 0.5) as u8,
                _ => coins.bit(1.0 - p0),
            },
        };
        out[i] = b;
        Some(b)
    });
    Ok(out)
}

/// Positions of `set` (0-based) as a membership mask of length `k`.
pub fn mask(set: &[usize], k: usize) -> Vec<bool> {
    let mut m = vec![false; k];
    for &i in set {
        m[i] = true;
    }
    m
}
