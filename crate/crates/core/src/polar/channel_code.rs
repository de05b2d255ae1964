//! Frozen-bit polar channel code used to carry auxiliary data (the D_b
//! sequences and one-time-pad ciphertexts).

use serde::{Deserialize, Serialize};

use super::profile::{cached_profile, ProfileCache, ProfileMode};
use super::{check_block_length, sc_decode_si, transform, JointModel, PolarError};
use crate::channel::Dmc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarChannelCode {
    k: usize,
    /// Information positions, increasing.
    info: Vec<usize>,
    frozen: Vec<usize>,
    model: JointModel,
    capacity: f64,
}

impl PolarChannelCode {
    /// Keeps the `floor(rate * K)` positions of lowest estimated entropy.
    /// The rate must be strictly below the estimated capacity `1 - mean(h)`.
    pub fn construct(
        channel: &Dmc,
        k: usize,
        rate: f64,
        mode: ProfileMode,
        cache: Option<&ProfileCache>,
    ) -> Result<Self, PolarError> {
        check_block_length(k)?;
        let model = JointModel::channel_input(channel);
        let profile = cached_profile(&model, k, mode, cache)?;
        let capacity = 1.0 - profile.mean();
        if !(rate < capacity) || !(rate > 0.0) {
            return Err(PolarError::RateAboveCapacity { rate, capacity });
        }
        let size = ((rate * k as f64).floor() as usize).max(1);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| profile.values[a].total_cmp(&profile.values[b]).then(a.cmp(&b)));
        let mut info = order[..size].to_vec();
        info.sort_unstable();
        let frozen = order[size..].iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        Ok(PolarChannelCode { k, info, frozen, model, capacity })
    }

    /// Every position carries information (for noiseless channels).
    pub fn uncoded(k: usize) -> Result<Self, PolarError> {
        check_block_length(k)?;
        Ok(PolarChannelCode {
            k,
            info: (0..k).collect(),
            frozen: Vec::new(),
            model: JointModel::channel_input(&Dmc::noiseless()),
            capacity: 1.0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn message_len(&self) -> usize {
        self.info.len()
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info
    }

    pub fn capacity_estimate(&self) -> f64 {
        self.capacity
    }

    pub fn rate(&self) -> f64 {
        self.info.len() as f64 / self.k as f64
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, PolarError> {
        if message.len() != self.info.len() {
            return Err(PolarError::Length { expected: self.info.len(), got: message.len() });
        }
        let mut v = vec![0u8; self.k];
        for (&i, &b) in self.info.iter().zip(message) {
            v[i] = b;
        }
        transform(&v)
    }

    pub fn decode(&self, y: &[u8]) -> Result<Vec<u8>, PolarError> {
        let mut known = vec![Some(0u8); self.k];
        for &i in &self.info {
            known[i] = None;
        }
        let v = sc_decode_si(y, &known, &self.frozen, &self.model)?;
        Ok(self.info.iter().map(|&i| v[i]).collect())
    }

    /// Number of codewords needed for `len` bits.
    pub fn codewords_for(&self, len: usize) -> usize {
        len.div_ceil(self.info.len())
    }

    /// Splits `bits` into codewords, zero-padding the last message.
    pub fn encode_stream(&self, bits: &[u8]) -> Result<Vec<Vec<u8>>, PolarError> {
        bits.chunks(self.info.len())
            .map(|c| {
                let mut m = c.to_vec();
                m.resize(self.info.len(), 0);
                self.encode(&m)
            })
            .collect()
    }

    pub fn decode_stream(&self, outputs: &[Vec<u8>], len: usize) -> Result<Vec<u8>, PolarError> {
        let mut out = Vec::with_capacity(outputs.len() * self.info.len());
        for y in outputs {
            out.extend(self.decode(y)?);
        }
        if out.len() < len {
            return Err(PolarError::Length { expected: len, got: out.len() });
        }
        out.truncate(len);
        Ok(out)
    }
}
