//! The secure-communication scheme: key-generation blocks, hashed and chained
//! encoding with channel prefixing, and backward block decoding.
//!
//! A block carries `L` sub-blocks; a sub-block is `g` polar blocks of length
//! `K` (`g = 1` with a single main channel, `g = T_J` with compound mains).
//! Bits of the hash output `T_b` fill the near-uniform positions `V_U` of each
//! polar block in increasing index order, polar block after polar block.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bitstr;
use crate::channel::{choose_tap, transmit, transmit_one, ChannelError, ChannelFamily, Dmc, StateGenerator, StateSequence, TapStrategy};
use crate::coins::Coins;
use crate::compound::{CompoundError, CompoundSpec, SideSets};
use crate::galois::{gf_mul, hash_preimage, std_modulus, uh_hash, FieldSpec, GfError};
use crate::polar::{
    construct_index_sets, mask, sc_decode_si, sc_sample, transform, IndexSets, JointModel, PolarChannelCode, PolarError,
    PolarParams, ProfileCache, ProfileMode, SampleMode, SourceSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("message {block} has {got} bits, expected {expected}")]
    MessageLength { block: usize, expected: usize, got: usize },
    #[error("{got} messages for {expected} blocks")]
    MessageCount { expected: usize, got: usize },
    #[error("key has {got} bits, expected {expected}")]
    KeyLength { expected: usize, got: usize },
    #[error("the main channel state must stay fixed during a session")]
    MainStateVaries,
    #[error(transparent)]
    Galois(#[from] GfError),
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Compound(#[from] CompoundError),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CodecError> {
    Err(CodecError::Config(msg.into()))
}

/// Splits a sub-block into its side-coded part `E` and its residue `E'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SideCoder {
    /// One main channel: `E = A[V_{U|Y}]`, `E' = A[H_{U|Y} \ V_{U|Y}]`.
    Plain { sets: SideSets, model: JointModel },
    /// Compound mains through the chained source code.
    Chained { spec: CompoundSpec },
}

impl SideCoder {
    pub fn group(&self) -> usize {
        match self {
            SideCoder::Plain { .. } => 1,
            SideCoder::Chained { spec } => spec.group(),
        }
    }

    /// Number of receivers (main channels) the coder serves.
    pub fn receivers(&self) -> usize {
        match self {
            SideCoder::Plain { .. } => 1,
            SideCoder::Chained { spec } => spec.j(),
        }
    }

    /// `|E|` per sub-block.
    pub fn e_len(&self) -> usize {
        match self {
            SideCoder::Plain { sets, .. } => sets.v.len(),
            SideCoder::Chained { spec } => spec.e_len(),
        }
    }

    /// `|E'|` per sub-block.
    pub fn residue_len(&self) -> usize {
        match self {
            SideCoder::Plain { sets, .. } => sets.residue().len(),
            SideCoder::Chained { spec } => spec.residue_total(),
        }
    }

    pub fn encode(&self, a: &[Vec<u8>]) -> Result<(Vec<u8>, Vec<u8>), CodecError> {
        match self {
            SideCoder::Plain { sets, .. } => {
                let pick = |s: &[usize]| s.iter().map(|&i| a[0][i]).collect::<Vec<u8>>();
                Ok((pick(&sets.v), pick(&sets.residue())))
            }
            SideCoder::Chained { spec } => {
                let code = spec.encode_blocks(a)?;
                let res = code.residue_bits();
                Ok((code.e, res))
            }
        }
    }

    /// Estimates the sub-block's transformed polar blocks for receiver
    /// `main` (0-based) from its outputs, `E` and the full residue `E'`.
    pub fn decode(&self, main: usize, y: &[&[u8]], e: &[u8], residue: &[u8]) -> Result<Vec<Vec<u8>>, CodecError> {
        match self {
            SideCoder::Plain { sets, model } => {
                if main != 0 {
                    return config_err(format!("receiver {main} on a single-main code"));
                }
                let k = y[0].len();
                let mut known = vec![None; k];
                for (&i, &b) in sets.v.iter().zip(e).chain(sets.residue().iter().zip(residue)) {
                    known[i] = Some(b);
                }
                Ok(vec![sc_decode_si(y[0], &known, &sets.h, model)?])
            }
            SideCoder::Chained { spec } => {
                let j = main + 1;
                if j > spec.j() {
                    return config_err(format!("receiver {main} outside the {} main channels", spec.j()));
                }
                let offset: usize = (1..j).map(|i| spec.residue_len(i)).sum();
                let mine = &residue[offset..offset + spec.residue_len(j)];
                Ok(spec.decode_blocks(j, y, e, mine)?)
            }
        }
    }
}

/// User-chosen session parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// Polar block length.
    pub k: usize,
    /// Sub-blocks per block.
    pub l: usize,
    /// Blocks per session.
    pub b: usize,
    /// Fraction of each block's channel inputs tapped by the eavesdropper.
    pub alpha: Ratio<u64>,
    pub beta: f64,
    /// Security slack; enters the reported asymptotic terms only.
    pub xi: f64,
    /// Finite-length rate back-off subtracted from the hash and key rates.
    pub backoff: f64,
    /// Key-generation blocks; at least the number needed for the pad.
    #[serde(default)]
    pub b0: Option<usize>,
    /// Hash output length override.
    #[serde(default)]
    pub r: Option<usize>,
    /// Per-block key length override.
    #[serde(default)]
    pub key_len: Option<usize>,
    /// Chain multipliers for compound mains (first entry 1); `None` uses the
    /// plain coder and needs a single main channel.
    #[serde(default)]
    pub multipliers: Option<Vec<usize>>,
    #[serde(default)]
    pub mode: SampleMode,
    /// Rate of the auxiliary channel codes.
    pub aux_rate: f64,
    /// Block length of the auxiliary channel codes (default `k`).
    #[serde(default)]
    pub aux_k: Option<usize>,
}

impl Design {
    pub fn new(k: usize, l: usize, b: usize, beta: f64) -> Self {
        Design {
            k,
            l,
            b,
            alpha: Ratio::from_integer(0),
            beta,
            xi: 0.01,
            backoff: 0.0,
            b0: None,
            r: None,
            key_len: None,
            multipliers: None,
            mode: SampleMode::Random,
            aux_rate: 0.5,
            aux_k: None,
        }
    }
}

/// Lengths that follow from the configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derived {
    /// Channel uses per block, `N = L g K`.
    pub n: usize,
    /// Polar blocks per sub-block.
    pub group: usize,
    /// `|E|` per sub-block.
    pub e_len: usize,
    /// `|E'|` per sub-block.
    pub residue_len: usize,
    /// `L g |V_U|`, the hash field degree.
    pub hash_len: usize,
    /// `|M_b|` per block.
    pub message_lens: Vec<usize>,
    /// `|R'_b|`.
    pub local_len: usize,
    /// Pad length `L B |E'| + L |E|`.
    pub l_otp: usize,
    /// Smallest admissible number of key-generation blocks.
    pub b0_min: usize,
}

/// Asymptotic terms evaluated at one value of the free exponent gamma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTerms {
    pub gamma: f64,
    pub delta1: f64,
    pub delta3: Option<f64>,
    pub delta4: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTerms {
    pub delta_k: f64,
    /// `2 L K delta_K`, the divergence bound of the sampler.
    pub sampler_bound: f64,
    /// `(K L delta_K + sqrt(2 ln 2) sqrt(2 L K delta_K)) B (B + 1) / 2`.
    pub session_error_bound: f64,
    /// `B0 L (sqrt(2 ln 2) sqrt(2 K delta_K) + 2 K delta_K)`.
    pub key_error_bound: f64,
    /// `None` when `L K delta_K > 1` and the binary entropy is undefined.
    pub delta2: Option<f64>,
    pub delta5: f64,
    pub by_gamma: Vec<GammaTerms>,
}

/// Exact information quantities of the source and channels, and the rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `I(U;Y_t)` per main channel.
    pub i_uy: Vec<f64>,
    pub i_ux: f64,
    /// `I(U;Z_s)` per eavesdropper channel, then the declared best one if any.
    pub i_uz: Vec<f64>,
    pub h_u_x: f64,
    pub min_h_u_z: f64,
    /// `min_t I(U;Y_t) - alpha I(U;X) - (1 - alpha) max_s I(U;Z_s)`.
    pub theoretical: f64,
    /// `sum_b |M_b| / (B N)`.
    pub achieved: f64,
    /// Unrounded `N((1 - alpha) min_s H(U|Z_s) + alpha H(U|X) - backoff)`.
    pub r_raw: f64,
    /// Unrounded per-block key length.
    pub key_len_raw: f64,
    pub asymptotic: AsymptoticTerms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeConfig {
    pub design: Design,
    pub source: SourceSpec,
    /// Sets of the first main channel; `V_U`, `H_U`, `V_X`, `V_{X|U}` are
    /// shared by all mains.
    pub sets: IndexSets,
    pub side: SideCoder,
    /// Hash output length `r = |M_1|`.
    pub r: usize,
    /// Key bits per key-generation block.
    pub key_len: usize,
    /// Key-generation blocks.
    pub b0: usize,
    pub hash_field: FieldSpec,
    pub init_field: FieldSpec,
    /// One auxiliary channel code per receiver.
    pub aux: Vec<PolarChannelCode>,
    pub derived: Derived,
    pub rates: RateReport,
}

pub(crate) fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

fn binary_entropy(x: f64) -> Option<f64> {
    (0.0..=1.0).contains(&x).then(|| entropy(&[x, 1.0 - x]))
}

/// `H(U | output of channel fed with X)`.
pub fn h_u_given_output(source: &SourceSpec, channel: &Dmc) -> f64 {
    let q = source.q();
    let joint: Vec<f64> = (0..channel.outputs() as u8)
        .flat_map(|y| (0..2).map(move |u| q[u][0] * channel.prob(0, y) + q[u][1] * channel.prob(1, y)))
        .collect();
    let outs: Vec<f64> = joint.chunks(2).map(|c| c[0] + c[1]).collect();
    entropy(&joint) - entropy(&outs)
}

pub fn h_u(source: &SourceSpec) -> f64 {
    entropy(&source.q_u())
}

pub fn h_u_given_x(source: &SourceSpec) -> f64 {
    let q = source.q();
    entropy(&[q[0][0], q[0][1], q[1][0], q[1][1]]) - entropy(&source.q_x())
}

fn eve_channels(family: &ChannelFamily) -> Result<Vec<Dmc>, CodecError> {
    let mut eves = family.eves.clone();
    if let Some(best) = family.best_eve_channel()? {
        eves.push(best);
    }
    Ok(eves)
}

/// Rate quantities for `source` over `family` at tap fraction `alpha`.
pub fn theoretical_rates(source: &SourceSpec, family: &ChannelFamily, alpha: f64) -> Result<(Vec<f64>, f64, Vec<f64>, f64), CodecError> {
    let hu = h_u(source);
    let i_uy: Vec<f64> = family.mains.iter().map(|m| hu - h_u_given_output(source, m)).collect();
    let i_ux = hu - h_u_given_x(source);
    let i_uz: Vec<f64> = eve_channels(family)?.iter().map(|e| hu - h_u_given_output(source, e)).collect();
    let min_y = i_uy.iter().copied().fold(f64::INFINITY, f64::min);
    let max_z = i_uz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let theoretical = min_y - alpha * i_ux - (1.0 - alpha) * max_z;
    Ok((i_uy, i_ux, i_uz, theoretical))
}

fn asymptotic_terms(design: &Design, b0: usize, n: usize, max_z_alphabet: usize) -> AsymptoticTerms {
    let (k, l, b) = (design.k as f64, design.l as f64, design.b as f64);
    let delta_k = (-(k.powf(design.beta))).exp2();
    let lk = l * k;
    let c = (2.0 * std::f64::consts::LN_2).sqrt() * (2.0 * lk * delta_k).sqrt();
    let delta5 = 2.0 * c * ((4.0 * max_z_alphabet as f64).log2() - if c > 0.0 { c.log2() / lk } else { 0.0 });
    let delta2 = binary_entropy(lk * delta_k).map(|h| h / lk + lk * delta_k + delta5);
    let n = n as f64;
    let by_gamma = [0.25, 0.5, 0.9]
        .iter()
        .map(|&gamma| {
            let delta1 = (1.0 / k + 1.0) * (2.0 * l.powf(gamma - 1.0)).sqrt();
            let a = (1.0 - l.powf(gamma)).exp2() + (-n * design.xi / 2.0).exp2();
            GammaTerms { gamma, delta1, delta3: delta2.map(|d| d + delta1), delta4: a * (n - a.log2()) }
        })
        .collect();
    AsymptoticTerms {
        delta_k,
        sampler_bound: 2.0 * lk * delta_k,
        session_error_bound: (lk * delta_k + c) * b * (b + 1.0) / 2.0,
        key_error_bound: b0 as f64
            * l
            * ((2.0 * std::f64::consts::LN_2).sqrt() * (2.0 * k * delta_k).sqrt() + 2.0 * k * delta_k),
        delta2,
        delta5,
        by_gamma,
    }
}

fn alpha_f64(a: Ratio<u64>) -> f64 {
    *a.numer() as f64 / *a.denom() as f64
}

/// Builds the session configuration from per-main index sets (all built at
/// the same `K` and `beta`) and the auxiliary channel codes.
pub fn derive_params(
    main_sets: &[IndexSets],
    source: &SourceSpec,
    family: &ChannelFamily,
    design: &Design,
    aux: Vec<PolarChannelCode>,
) -> Result<CodeConfig, CodecError> {
    family.validate()?;
    if design.l == 0 || design.b == 0 {
        return config_err("L and B must be positive");
    }
    if main_sets.len() != family.mains.len() {
        return config_err(format!("{} set collections for {} main channels", main_sets.len(), family.mains.len()));
    }
    let base = main_sets[0].clone();
    if main_sets.iter().any(|s| s.k != design.k || s.v_u != base.v_u || s.v_x_u != base.v_x_u || s.h_u != base.h_u) {
        return config_err("index sets disagree on K or on the sets without side information");
    }
    if design.alpha > Ratio::from_integer(1) {
        return config_err(format!("alpha = {} exceeds 1", design.alpha));
    }
    let side = match &design.multipliers {
        None => {
            if family.mains.len() != 1 {
                return config_err("several main channels need chain multipliers");
            }
            SideCoder::Plain {
                sets: SideSets::new(base.v_u_y.clone(), base.h_u_y.clone()),
                model: JointModel::u_given_y(source, &family.mains[0]),
            }
        }
        Some(m) => {
            if m.len() != family.mains.len() {
                return config_err(format!("{} multipliers for {} main channels", m.len(), family.mains.len()));
            }
            let sets = main_sets.iter().map(|s| SideSets::new(s.v_u_y.clone(), s.h_u_y.clone())).collect();
            let models = family.mains.iter().map(|c| JointModel::u_given_y(source, c)).collect();
            SideCoder::Chained { spec: CompoundSpec::new(design.k, m.clone(), sets, models)? }
        }
    };
    if aux.len() != side.receivers() {
        return config_err(format!("{} auxiliary codes for {} receivers", aux.len(), side.receivers()));
    }
    let (l, b) = (design.l, design.b);
    let group = side.group();
    let n = l * group * design.k;
    let (e_len, residue_len) = (side.e_len(), side.residue_len());
    let hash_len = l * group * base.v_u.len();
    if hash_len == 0 {
        return config_err("the near-uniform set V_U is empty");
    }
    let e_total = l * e_len;
    let alpha = alpha_f64(design.alpha);

    let (i_uy, i_ux, i_uz, theoretical) = theoretical_rates(source, family, alpha)?;
    let eves = eve_channels(family)?;
    let min_h_u_z = eves.iter().map(|e| h_u_given_output(source, e)).fold(f64::INFINITY, f64::min);
    let h_u_x = h_u_given_x(source);
    let r_raw = n as f64 * ((1.0 - alpha) * min_h_u_z + alpha * h_u_x - design.backoff);
    let r = match design.r {
        Some(r) => {
            if r < e_total || r > hash_len {
                return config_err(format!("r = {r} outside [L|E|, L g |V_U|] = [{e_total}, {hash_len}]"));
            }
            r
        }
        None => {
            if r_raw < e_total as f64 {
                return config_err(format!(
                    "no secure payload: N((1-alpha) min H(U|Z) + alpha H(U|X) - backoff) = {r_raw:.3} is below L|E| = {e_total}"
                ));
            }
            (r_raw.floor() as usize).min(hash_len)
        }
    };
    let message_lens: Vec<usize> = (0..b).map(|i| if i == 0 { r } else { r - e_total }).collect();
    let local_len = hash_len - r;
    let l_otp = l * b * residue_len + e_total;

    let min_y = i_uy.iter().copied().fold(f64::INFINITY, f64::min);
    let max_z = i_uz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let key_len_raw = n as f64 * (min_y - alpha * i_ux - (1.0 - alpha) * max_z - design.backoff);
    let key_len = match design.key_len {
        Some(v) => v,
        None if l_otp == 0 => 0,
        None => key_len_raw.max(0.0).floor() as usize,
    };
    if key_len > n {
        return config_err(format!("key length {key_len} exceeds N = {n}"));
    }
    let b0_min = match (l_otp, key_len) {
        (0, _) => 0,
        (_, 0) => {
            return config_err(format!(
                "pad of {l_otp} bits needs keys, but the key rate N(min I(U;Y) - alpha I(U;X) - (1-alpha) max I(U;Z) - backoff) = {key_len_raw:.3} is not positive"
            ))
        }
        (p, kl) => p.div_ceil(kl),
    };
    let b0 = design.b0.unwrap_or(b0_min);
    if b0 < b0_min {
        return config_err(format!("B0 = {b0} is below the {b0_min} blocks needed for {l_otp} pad bits"));
    }
    if b0 > 0 && key_len == 0 {
        return config_err("key-generation blocks with zero key length");
    }
    let achieved = message_lens.iter().sum::<usize>() as f64 / (b * n) as f64;
    let max_z_alphabet = eves.iter().map(Dmc::outputs).max().unwrap_or(1);
    let rates = RateReport {
        i_uy,
        i_ux,
        i_uz,
        h_u_x,
        min_h_u_z,
        theoretical,
        achieved,
        r_raw,
        key_len_raw,
        asymptotic: asymptotic_terms(design, b0, n, max_z_alphabet),
    };
    let derived = Derived { n, group, e_len, residue_len, hash_len, message_lens, local_len, l_otp, b0_min };
    Ok(CodeConfig {
        design: design.clone(),
        source: source.clone(),
        sets: base,
        side,
        r,
        key_len,
        b0,
        hash_field: std_modulus(hash_len)?,
        init_field: std_modulus(n)?,
        aux,
        derived,
        rates,
    })
}

/// Builds every profile, index set and auxiliary code, then derives the
/// configuration.
pub fn construct(
    source: &SourceSpec,
    family: &ChannelFamily,
    design: &Design,
    profile: ProfileMode,
    cache: Option<&ProfileCache>,
) -> Result<CodeConfig, CodecError> {
    family.validate()?;
    let params = PolarParams::new(design.k, design.beta)?;
    let main_sets = family
        .mains
        .iter()
        .map(|m| construct_index_sets(source, m, &params, profile, cache).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    let receivers = if design.multipliers.is_some() { family.mains.len() } else { 1 };
    let aux_k = design.aux_k.unwrap_or(design.k);
    let aux = family.mains[..receivers]
        .iter()
        .map(|m| PolarChannelCode::construct(m, aux_k, design.aux_rate, profile, cache))
        .collect::<Result<Vec<_>, _>>()?;
    derive_params(&main_sets, source, family, design, aux)
}

impl CodeConfig {
    /// Recomputes every derived quantity and compares it with the stored one.
    pub fn validate(&self) -> Result<(), CodecError> {
        let sets_check = self.sets.check().map_err(CodecError::Config);
        sets_check?;
        let d = &self.design;
        let group = self.side.group();
        let n = d.l * group * d.k;
        let (e_len, residue_len) = (self.side.e_len(), self.side.residue_len());
        let hash_len = d.l * group * self.sets.v_u.len();
        let e_total = d.l * e_len;
        if self.r < e_total || self.r > hash_len {
            return config_err(format!("r = {} outside [{e_total}, {hash_len}]", self.r));
        }
        let message_lens: Vec<usize> = (0..d.b).map(|i| if i == 0 { self.r } else { self.r - e_total }).collect();
        let l_otp = d.l * d.b * residue_len + e_total;
        let b0_min = if l_otp == 0 { 0 } else if self.key_len == 0 { usize::MAX } else { l_otp.div_ceil(self.key_len) };
        let expect = Derived {
            n,
            group,
            e_len,
            residue_len,
            hash_len,
            message_lens,
            local_len: hash_len - self.r,
            l_otp,
            b0_min,
        };
        if expect != self.derived {
            return config_err(format!("derived lengths disagree: stored {:?}, recomputed {expect:?}", self.derived));
        }
        if self.b0 < b0_min || self.hash_field.n() != hash_len || self.init_field.n() != n || self.key_len > n {
            return config_err("key-generation blocks, key length or field degrees are inconsistent");
        }
        if self.aux.len() != self.side.receivers() {
            return config_err("auxiliary code count differs from the receiver count");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CodecError> {
        let cfg: CodeConfig = serde_json::from_str(text).map_err(|e| CodecError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.derived.n
    }

    pub fn l_otp(&self) -> usize {
        self.derived.l_otp
    }

    pub fn message_lens(&self) -> &[usize] {
        &self.derived.message_lens
    }

    /// Polar blocks per block, `L g`.
    pub fn polar_blocks(&self) -> usize {
        self.design.l * self.derived.group
    }

    fn aux_copy(&self, main: usize) -> usize {
        if self.aux.len() == 1 {
            0
        } else {
            main
        }
    }
}

/// Key bits shared by the two ends.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    #[serde(with = "bitstr::bits")]
    pub bits: Vec<u8>,
    /// `init:<digest>` for keys from the key-generation phase, `injected`
    /// otherwise.
    pub provenance: String,
}

impl KeyMaterial {
    pub fn injected(bits: Vec<u8>) -> Self {
        KeyMaterial { bits, provenance: "injected".into() }
    }

    pub fn random(len: usize, coins: &mut dyn Coins) -> Self {
        KeyMaterial::injected(coins.uniform_bits(len))
    }
}

/// Polar blocks of one sub-block or block as produced by the encoder.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarBlocks {
    #[serde(with = "bitstr::bits_list")]
    pub a: Vec<Vec<u8>>,
    #[serde(with = "bitstr::bits_list")]
    pub u: Vec<Vec<u8>>,
    #[serde(with = "bitstr::bits_list")]
    pub v: Vec<Vec<u8>>,
}

impl PolarBlocks {
    /// Channel input: the transformed `v` blocks in order.
    pub fn x(&self) -> Vec<u8> {
        self.v.iter().flat_map(|v| transform(v).expect("power-of-two blocks")).collect()
    }

    pub fn u_concat(&self) -> Vec<u8> {
        self.u.concat()
    }
}

/// Draws polar blocks from bits placed on `V_U`: SC sampling of `A`, the
/// transform to `U`, then prefix sampling of `V` given `U`.
#[derive(Clone, Debug)]
pub struct BlockSampler {
    k: usize,
    v_u: Vec<usize>,
    v_x_u: Vec<usize>,
    high: Vec<bool>,
    u: JointModel,
    x_given_u: JointModel,
}

impl BlockSampler {
    pub fn new(source: &SourceSpec, sets: &IndexSets) -> Self {
        BlockSampler {
            k: sets.k,
            v_u: sets.v_u.clone(),
            v_x_u: sets.v_x_u.clone(),
            high: mask(&sets.h_u, sets.k),
            u: JointModel::u(source),
            x_given_u: JointModel::x_given_u(source),
        }
    }

    /// Appends one polar block whose `V_U` positions carry `v_u_bits`.
    pub fn sample_into(&self, v_u_bits: &[u8], mode: SampleMode, out: &mut PolarBlocks, coins: &mut dyn Coins) -> Result<(), CodecError> {
        if v_u_bits.len() != self.v_u.len() {
            return Err(PolarError::Length { expected: self.v_u.len(), got: v_u_bits.len() }.into());
        }
        let mut frozen = vec![None; self.k];
        for (&i, &b) in self.v_u.iter().zip(v_u_bits) {
            frozen[i] = Some(b);
        }
        let a = sc_sample(&self.u, None, &frozen, Some(&self.high), mode, coins)?;
        let u = transform(&a)?;
        let mut frozen_v = vec![None; self.k];
        for &i in &self.v_x_u {
            frozen_v[i] = Some(coins.bit(0.5));
        }
        let v = sc_sample(&self.x_given_u, Some(&u), &frozen_v, None, SampleMode::Random, coins)?;
        out.a.push(a);
        out.u.push(u);
        out.v.push(v);
        Ok(())
    }

    /// Samples `t.len() / |V_U|` polar blocks (`blocks` when `V_U` is empty).
    pub fn sample(&self, t: &[u8], blocks: usize, mode: SampleMode, coins: &mut dyn Coins) -> Result<PolarBlocks, CodecError> {
        let vu = self.v_u.len();
        let mut out = PolarBlocks::default();
        for p in 0..blocks {
            let slice = t.get(p * vu..(p + 1) * vu).ok_or(PolarError::Length { expected: blocks * vu, got: t.len() })?;
            self.sample_into(slice, mode, &mut out, coins)?;
        }
        Ok(out)
    }
}

/// Side-codes every sub-block; returns the concatenated `E` and `E'`.
fn side_encode(cfg: &CodeConfig, blocks: &PolarBlocks) -> Result<(Vec<u8>, Vec<u8>), CodecError> {
    let g = cfg.derived.group;
    let mut e = Vec::new();
    let mut res = Vec::new();
    for sub in blocks.a.chunks(g) {
        let (se, sr) = cfg.side.encode(sub)?;
        e.extend(se);
        res.extend(sr);
    }
    Ok((e, res))
}

/// Encoder state of one block before transmission.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedBlock {
    /// Public hash seed `R_b` (nonzero), leftmost bit = highest coefficient.
    #[serde(with = "bitstr::bits")]
    pub hash_seed: Vec<u8>,
    /// Local randomness `R'_b`.
    #[serde(with = "bitstr::bits")]
    pub local: Vec<u8>,
    /// `M'_b`, the previous block's `E` bits.
    #[serde(with = "bitstr::bits")]
    pub chained_in: Vec<u8>,
    #[serde(with = "bitstr::bits")]
    pub t: Vec<u8>,
    pub polar: PolarBlocks,
    /// This block's `E` bits, sub-block by sub-block.
    #[serde(with = "bitstr::bits")]
    pub chained_out: Vec<u8>,
    /// This block's `E'` bits, sub-block by sub-block.
    #[serde(with = "bitstr::bits")]
    pub residue: Vec<u8>,
    #[serde(with = "bitstr::bits")]
    pub x: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoded {
    pub blocks: Vec<EncodedBlock>,
    /// Every block's residue followed by the last block's `E`.
    #[serde(with = "bitstr::bits")]
    pub otp_payload: Vec<u8>,
    #[serde(with = "bitstr::bits")]
    pub otp_ciphertext: Vec<u8>,
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// The encoder without the channel: hashing, chaining, sampling, prefixing
/// and the pad.
pub fn encode_blocks(
    messages: &[Vec<u8>],
    key: &KeyMaterial,
    cfg: &CodeConfig,
    coins: &mut dyn Coins,
) -> Result<Encoded, CodecError> {
    let d = &cfg.derived;
    if messages.len() != cfg.design.b {
        return Err(CodecError::MessageCount { expected: cfg.design.b, got: messages.len() });
    }
    for (i, m) in messages.iter().enumerate() {
        if m.len() != d.message_lens[i] {
            return Err(CodecError::MessageLength { block: i, expected: d.message_lens[i], got: m.len() });
        }
    }
    if key.bits.len() != d.l_otp {
        return Err(CodecError::KeyLength { expected: d.l_otp, got: key.bits.len() });
    }
    let sampler = BlockSampler::new(&cfg.source, &cfg.sets);
    let mut prev: Vec<u8> = Vec::new();
    let mut blocks = Vec::with_capacity(messages.len());
    let mut otp_payload = Vec::with_capacity(d.l_otp);
    for m in messages {
        let hash_seed = coins.nonzero_bits(d.hash_len);
        let local = coins.uniform_bits(d.local_len);
        let chained_in = std::mem::take(&mut prev);
        let payload = [m.as_slice(), &chained_in, &local].concat();
        let seed = cfg.hash_field.element(&hash_seed)?;
        let t = hash_preimage(&seed, &payload, &cfg.hash_field)?.to_bits();
        let polar = sampler.sample(&t, cfg.polar_blocks(), cfg.design.mode, coins)?;
        let (chained_out, residue) = side_encode(cfg, &polar)?;
        otp_payload.extend(&residue);
        prev = chained_out.clone();
        let x = polar.x();
        blocks.push(EncodedBlock { hash_seed, local, chained_in, t, polar, chained_out, residue, x });
    }
    otp_payload.extend(&prev);
    let otp_ciphertext = xor(&otp_payload, &key.bits);
    Ok(Encoded { blocks, otp_payload, otp_ciphertext })
}

/// Channels, tapping and states for a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub family: ChannelFamily,
    pub states: StateGenerator,
    pub tap: TapStrategy,
}

impl Link {
    pub fn new(family: ChannelFamily) -> Self {
        Link { family, states: StateGenerator::default(), tap: TapStrategy::First }
    }
}

/// One block as it crosses the channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRecord {
    #[serde(with = "bitstr::symbols")]
    pub y: Vec<u8>,
    #[serde(with = "bitstr::symbols")]
    pub z: Vec<u8>,
    pub states: StateSequence,
    pub tap: Vec<usize>,
    #[serde(with = "bitstr::bits")]
    pub tap_values: Vec<u8>,
}

fn cross_channel(x: &[u8], cfg: &CodeConfig, link: &Link, main: &mut Option<usize>, coins: &mut dyn Coins) -> Result<ChannelRecord, CodecError> {
    let states = link.states.generate(x.len(), coins)?;
    let t = states.main[0];
    if states.main.iter().any(|&m| m != t) || main.is_some_and(|m| m != t) {
        return Err(CodecError::MainStateVaries);
    }
    *main = Some(t);
    let (y, z) = transmit(x, &states, &link.family, coins)?;
    let tap = choose_tap(&link.tap, cfg.design.alpha, x.len(), coins)?;
    let tap_values = tap.iter().map(|&i| x[i]).collect();
    Ok(ChannelRecord { y, z, states, tap, tap_values })
}

/// Sends `bits` with every auxiliary code over the active main channel.
fn send_aux(cfg: &CodeConfig, link: &Link, main: usize, bits: &[u8], coins: &mut dyn Coins) -> Result<Vec<Vec<Vec<u8>>>, CodecError> {
    let channel = &link.family.mains[main];
    cfg.aux
        .iter()
        .map(|code| {
            let cws = code.encode_stream(bits)?;
            Ok(cws.iter().map(|cw| transmit_one(cw, channel, coins)).collect())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTranscript {
    /// Index of the active main channel.
    pub main: usize,
    pub encoded: Encoded,
    pub channel: Vec<ChannelRecord>,
    /// Per auxiliary code, the channel outputs of its pad codewords.
    #[serde(with = "aux_outputs")]
    pub aux_outputs: Vec<Vec<Vec<u8>>>,
}

mod aux_outputs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<Vec<u8>>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| c.iter().map(hex::encode).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Vec<u8>>>, D::Error> {
        Vec::<Vec<String>>::deserialize(d)?
            .iter()
            .map(|c| c.iter().map(|s| hex::decode(s).map_err(serde::de::Error::custom)).collect())
            .collect()
    }
}

/// What the legitimate receiver gets: its channel outputs, the public hash
/// seeds and its own auxiliary outputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverView {
    pub main: usize,
    #[serde(with = "bitstr::symbols_list")]
    pub outputs: Vec<Vec<u8>>,
    #[serde(with = "bitstr::bits_list")]
    pub hash_seeds: Vec<Vec<u8>>,
    #[serde(with = "bitstr::symbols_list")]
    pub aux_outputs: Vec<Vec<u8>>,
}

impl SessionTranscript {
    pub fn receiver_view(&self, cfg: &CodeConfig) -> ReceiverView {
        ReceiverView {
            main: self.main,
            outputs: self.channel.iter().map(|c| c.y.clone()).collect(),
            hash_seeds: self.encoded.blocks.iter().map(|b| b.hash_seed.clone()).collect(),
            aux_outputs: self.aux_outputs[cfg.aux_copy(self.main)].clone(),
        }
    }

    /// Checks every length and the relation between the stored sequences.
    pub fn check(&self, cfg: &CodeConfig) -> Result<(), String> {
        let d = &cfg.derived;
        let k = cfg.design.k;
        if self.encoded.blocks.len() != cfg.design.b || self.channel.len() != cfg.design.b {
            return Err("block count".into());
        }
        for (i, blk) in self.encoded.blocks.iter().enumerate() {
            let p = &blk.polar;
            if p.a.len() != cfg.polar_blocks() || blk.t.len() != d.hash_len || blk.x.len() != d.n {
                return Err(format!("block {i}: lengths"));
            }
            for (a, u) in p.a.iter().zip(&p.u) {
                if a.len() != k || transform(a).map_err(|e| e.to_string())? != *u {
                    return Err(format!("block {i}: U is not A G"));
                }
            }
            if p.x() != blk.x {
                return Err(format!("block {i}: X is not V G"));
            }
            let t_from_a: Vec<u8> = p.a.iter().flat_map(|a| cfg.sets.v_u.iter().map(move |&j| a[j])).collect();
            if t_from_a != blk.t {
                return Err(format!("block {i}: T does not sit on V_U"));
            }
            let expected_in = if i == 0 { 0 } else { cfg.design.l * d.e_len };
            if blk.chained_in.len() != expected_in || blk.local.len() != d.local_len {
                return Err(format!("block {i}: chaining lengths"));
            }
            let c = &self.channel[i];
            if c.y.len() != d.n || c.z.len() != d.n || c.tap.len() != c.tap_values.len() {
                return Err(format!("block {i}: channel lengths"));
            }
        }
        if self.encoded.otp_ciphertext.len() != d.l_otp {
            return Err("pad length".into());
        }
        Ok(())
    }
}

/// Encoder with the channel: [`encode_blocks`], the block transmissions and
/// the auxiliary transmission of the padded data.
pub fn encode_session(
    messages: &[Vec<u8>],
    key: &KeyMaterial,
    cfg: &CodeConfig,
    link: &Link,
    coins: &mut dyn Coins,
) -> Result<SessionTranscript, CodecError> {
    let encoded = encode_blocks(messages, key, cfg, coins)?;
    let mut main = None;
    let channel = encoded
        .blocks
        .iter()
        .map(|b| cross_channel(&b.x, cfg, link, &mut main, coins))
        .collect::<Result<Vec<_>, _>>()?;
    let main = main.unwrap_or(0);
    let aux_outputs = send_aux(cfg, link, main, &encoded.otp_ciphertext, coins)?;
    Ok(SessionTranscript { main, encoded, channel, aux_outputs })
}

fn sub_outputs<'a>(y: &'a [u8], cfg: &CodeConfig, l: usize) -> Vec<&'a [u8]> {
    let g = cfg.derived.group;
    let k = cfg.design.k;
    (0..g).map(|p| &y[(l * g + p) * k..(l * g + p + 1) * k]).collect()
}

/// Backward block decoder.
pub fn decode_session(view: &ReceiverView, key: &KeyMaterial, cfg: &CodeConfig) -> Result<Vec<Vec<u8>>, CodecError> {
    let d = &cfg.derived;
    let (l_count, b_count) = (cfg.design.l, cfg.design.b);
    if key.bits.len() != d.l_otp {
        return Err(CodecError::KeyLength { expected: d.l_otp, got: key.bits.len() });
    }
    if view.outputs.len() != b_count || view.hash_seeds.len() != b_count {
        return Err(CodecError::MessageCount { expected: b_count, got: view.outputs.len() });
    }
    let code = &cfg.aux[cfg.aux_copy(view.main)];
    let ciphertext = code.decode_stream(&view.aux_outputs, d.l_otp)?;
    let payload = xor(&ciphertext, &key.bits);
    let per_block = l_count * d.residue_len;
    let mut e_cur = payload[b_count * per_block..].to_vec();
    let mut out = vec![Vec::new(); b_count];
    for b in (0..b_count).rev() {
        let y = &view.outputs[b];
        if y.len() != d.n {
            return Err(PolarError::Length { expected: d.n, got: y.len() }.into());
        }
        let residues = &payload[b * per_block..(b + 1) * per_block];
        let mut t_hat = Vec::with_capacity(d.hash_len);
        for l in 0..l_count {
            let e = &e_cur[l * d.e_len..(l + 1) * d.e_len];
            let r = &residues[l * d.residue_len..(l + 1) * d.residue_len];
            for a in cfg.side.decode(view.main, &sub_outputs(y, cfg, l), e, r)? {
                t_hat.extend(cfg.sets.v_u.iter().map(|&j| a[j]));
            }
        }
        let seed = cfg.hash_field.element(&view.hash_seeds[b])?;
        let t = cfg.hash_field.element(&t_hat)?;
        let payload_b = gf_mul(&seed, &t, &cfg.hash_field)?.to_bits();
        let m_len = d.message_lens[b];
        let chained = if b == 0 { 0 } else { l_count * d.e_len };
        out[b] = payload_b[..m_len].to_vec();
        e_cur = payload_b[m_len..m_len + chained].to_vec();
    }
    Ok(out)
}

/// One key-generation block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitBlock {
    #[serde(with = "bitstr::bits")]
    pub seed: Vec<u8>,
    /// Pad `R^init'_b` of the residues.
    #[serde(with = "bitstr::bits")]
    pub residue_pad: Vec<u8>,
    pub polar: PolarBlocks,
    #[serde(with = "bitstr::bits")]
    pub x: Vec<u8>,
    pub channel: ChannelRecord,
    /// `D_b`: per sub-block, the padded residue followed by `E`.
    #[serde(with = "bitstr::bits")]
    pub d: Vec<u8>,
    #[serde(with = "aux_outputs")]
    pub aux_outputs: Vec<Vec<Vec<u8>>>,
    #[serde(with = "bitstr::bits")]
    pub key_tx: Vec<u8>,
    #[serde(with = "bitstr::bits")]
    pub key_rx: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitTranscript {
    pub main: usize,
    pub blocks: Vec<InitBlock>,
}

impl InitTranscript {
    pub fn agreed(&self) -> bool {
        self.blocks.iter().all(|b| b.key_tx == b.key_rx)
    }
}

/// Encoder half of one key-generation block, without the channel.
pub fn init_encode_block(cfg: &CodeConfig, coins: &mut dyn Coins) -> Result<(Vec<u8>, Vec<u8>, PolarBlocks, Vec<u8>, Vec<u8>), CodecError> {
    let d = &cfg.derived;
    let sampler = BlockSampler::new(&cfg.source, &cfg.sets);
    let seed = coins.nonzero_bits(d.n);
    let residue_pad = coins.uniform_bits(cfg.design.l * d.residue_len);
    let mut polar = PolarBlocks::default();
    for _ in 0..cfg.polar_blocks() {
        let bits = coins.uniform_bits(cfg.sets.v_u.len());
        sampler.sample_into(&bits, SampleMode::Random, &mut polar, coins)?;
    }
    let g = d.group;
    let mut dseq = Vec::new();
    for (l, sub) in polar.a.chunks(g).enumerate() {
        let (e, res) = cfg.side.encode(sub)?;
        dseq.extend(xor(&res, &residue_pad[l * d.residue_len..(l + 1) * d.residue_len]));
        dseq.extend(e);
    }
    let key = uh_hash(&cfg.init_field.element(&seed)?, &cfg.init_field.element(&polar.u_concat())?, cfg.key_len, &cfg.init_field)?;
    Ok((seed, residue_pad, polar, dseq, key))
}

/// Receiver half of one key-generation block.
pub fn init_decode_block(
    cfg: &CodeConfig,
    main: usize,
    y: &[u8],
    d_hat: &[u8],
    seed: &[u8],
    residue_pad: &[u8],
) -> Result<Vec<u8>, CodecError> {
    let d = &cfg.derived;
    let stride = d.residue_len + d.e_len;
    let mut u_hat = Vec::with_capacity(d.n);
    for l in 0..cfg.design.l {
        let part = &d_hat[l * stride..(l + 1) * stride];
        let res = xor(&part[..d.residue_len], &residue_pad[l * d.residue_len..(l + 1) * d.residue_len]);
        let e = &part[d.residue_len..];
        for a in cfg.side.decode(main, &sub_outputs(y, cfg, l), e, &res)? {
            u_hat.extend(transform(&a)?);
        }
    }
    Ok(uh_hash(&cfg.init_field.element(seed)?, &cfg.init_field.element(&u_hat)?, cfg.key_len, &cfg.init_field)?)
}

/// Key-generation phase: `B0` independent blocks; each end keeps the first
/// `l_OTP` bits of its concatenated block keys.
pub fn init_phase(
    cfg: &CodeConfig,
    link: &Link,
    coins: &mut dyn Coins,
) -> Result<(KeyMaterial, KeyMaterial, InitTranscript), CodecError> {
    let mut main = None;
    let mut blocks = Vec::with_capacity(cfg.b0);
    for _ in 0..cfg.b0 {
        let (seed, residue_pad, polar, dseq, key_tx) = init_encode_block(cfg, coins)?;
        let x = polar.x();
        let channel = cross_channel(&x, cfg, link, &mut main, coins)?;
        let t = main.unwrap_or(0);
        let aux_outputs = send_aux(cfg, link, t, &dseq, coins)?;
        let d_hat = cfg.aux[cfg.aux_copy(t)].decode_stream(&aux_outputs[cfg.aux_copy(t)], dseq.len())?;
        let key_rx = init_decode_block(cfg, t, &channel.y, &d_hat, &seed, &residue_pad)?;
        blocks.push(InitBlock { seed, residue_pad, polar, x, channel, d: dseq, aux_outputs, key_tx, key_rx });
    }
    let transcript = InitTranscript { main: main.unwrap_or(0), blocks };
    let text = serde_json::to_string(&transcript).map_err(|e| CodecError::Config(e.to_string()))?;
    let provenance = format!("init:{}", &hex::encode(Sha256::digest(text.as_bytes()))[..16]);
    let take = |f: fn(&InitBlock) -> &Vec<u8>| {
        let mut bits: Vec<u8> = transcript.blocks.iter().flat_map(|b| f(b).iter().copied()).collect();
        bits.truncate(cfg.derived.l_otp);
        KeyMaterial { bits, provenance: provenance.clone() }
    };
    let tx = take(|b| &b.key_tx);
    let rx = take(|b| &b.key_rx);
    Ok((tx, rx, transcript))
}
