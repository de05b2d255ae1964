//! Source coding with compound side information (chained polar blocks with a
//! separate near-uniformizing residue) and the compound channel code built on
//! top of it.
//!
//! Side channels are numbered 1..=J as decoder indices. The input of length
//! `T_J * k` is split into `T_J` polar blocks; block `t` is transformed on its
//! own. Shorter operands of an XOR are padded with zeros on the right.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;
use crate::coins::Coins;
use crate::polar::{
    check_block_length, construct_index_sets, sc_decode_si, sc_sample, transform, JointModel, PolarChannelCode,
    PolarError, PolarParams, ProfileCache, ProfileMode, SampleMode, SourceSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompoundError {
    #[error("multipliers must be positive and start with 1, got {0:?}")]
    Multipliers(Vec<usize>),
    #[error("{sets} set pairs and {models} models for {j} side channels")]
    Shape { j: usize, sets: usize, models: usize },
    #[error("invalid index sets: {0}")]
    Sets(String),
    #[error("decoder index {index} outside 1..={j}")]
    Decoder { index: usize, j: usize },
    #[error("expected length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("|E| = {e_len} does not fit into {blocks} blocks of {capacity} positions")]
    Split { e_len: usize, blocks: usize, capacity: usize },
    #[error(transparent)]
    Polar(#[from] PolarError),
}

/// The pair `V ⊆ H` of one side channel, 0-based and sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideSets {
    pub v: Vec<usize>,
    pub h: Vec<usize>,
}

impl SideSets {
    pub fn new(mut v: Vec<usize>, mut h: Vec<usize>) -> Self {
        v.sort_unstable();
        v.dedup();
        h.sort_unstable();
        h.dedup();
        SideSets { v, h }
    }

    /// `H \ V` in increasing order.
    pub fn residue(&self) -> Vec<usize> {
        self.h.iter().copied().filter(|i| self.v.binary_search(i).is_err()).collect()
    }

    fn check(&self, k: usize) -> Result<(), CompoundError> {
        if self.h.last().is_some_and(|&i| i >= k) {
            return Err(CompoundError::Sets(format!("index beyond block length {k}")));
        }
        if self.v.iter().any(|i| self.h.binary_search(i).is_err()) {
            return Err(CompoundError::Sets("V is not contained in H".into()));
        }
        Ok(())
    }
}

/// Output of the compound source encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainedCode {
    /// Chained main output `e^(J)`.
    pub e: Vec<u8>,
    /// Per side channel `j`, the bits of `H_j \ V_j` of every polar block in order.
    pub residues: Vec<Vec<u8>>,
    /// Lengths of the top-level segments of `e`: the first child's output,
    /// the XOR-chained middle segments, and the last child's bridge bits.
    pub segments: Vec<usize>,
}

impl ChainedCode {
    /// All residues, side channel by side channel.
    pub fn residue_bits(&self) -> Vec<u8> {
        self.residues.concat()
    }
}

fn pick(a: &[u8], set: &[usize]) -> Vec<u8> {
    set.iter().map(|&i| a[i]).collect()
}

fn xor_pad(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len().max(b.len())];
    for (o, &x) in out.iter_mut().zip(a) {
        *o = x;
    }
    for (o, &x) in out.iter_mut().zip(b) {
        *o ^= x;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompoundSpec {
    k: usize,
    multipliers: Vec<usize>,
    sets: Vec<SideSets>,
    models: Vec<JointModel>,
}

struct DecodeCtx<'a> {
    j: usize,
    y: Vec<&'a [u8]>,
    residues: &'a [u8],
    residue: Vec<usize>,
}

impl CompoundSpec {
    /// `models[j]` is the joint law of one input bit and the output of side
    /// channel `j + 1`; `sets[j]` are its polarized sets at length `k`.
    pub fn new(
        k: usize,
        multipliers: Vec<usize>,
        sets: Vec<SideSets>,
        models: Vec<JointModel>,
    ) -> Result<Self, CompoundError> {
        check_block_length(k)?;
        if multipliers.first() != Some(&1) || multipliers.contains(&0) {
            return Err(CompoundError::Multipliers(multipliers));
        }
        let j = multipliers.len();
        if sets.len() != j || models.len() != j {
            return Err(CompoundError::Shape { j, sets: sets.len(), models: models.len() });
        }
        for s in &sets {
            s.check(k)?;
        }
        Ok(CompoundSpec { k, multipliers, sets, models })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn j(&self) -> usize {
        self.multipliers.len()
    }

    pub fn multipliers(&self) -> &[usize] {
        &self.multipliers
    }

    pub fn sets(&self) -> &[SideSets] {
        &self.sets
    }

    pub fn models(&self) -> &[JointModel] {
        &self.models
    }

    /// `T_m`, the number of polar blocks at level `m` (1-based).
    pub fn blocks_at(&self, m: usize) -> usize {
        self.multipliers[..m].iter().product()
    }

    /// `T_J`, polar blocks per input sequence.
    pub fn group(&self) -> usize {
        self.blocks_at(self.j())
    }

    /// Input length `T_J * k`.
    pub fn input_len(&self) -> usize {
        self.group() * self.k
    }

    fn bridge_len(&self, m: usize) -> usize {
        self.blocks_at(m) * self.sets[m].v.len()
    }

    fn e_len_at(&self, m: usize) -> usize {
        if m == 1 {
            return self.sets[0].v.len();
        }
        let (e, f) = (self.e_len_at(m - 1), self.bridge_len(m - 1));
        e + (self.multipliers[m - 1] - 1) * e.max(f) + f
    }

    /// `|E|`.
    pub fn e_len(&self) -> usize {
        self.e_len_at(self.j())
    }

    /// `|E'_j|` for decoder index `j` (1-based).
    pub fn residue_len(&self, j: usize) -> usize {
        self.group() * self.sets[j - 1].residue().len()
    }

    /// `|E'|` over all side channels.
    pub fn residue_total(&self) -> usize {
        (1..=self.j()).map(|j| self.residue_len(j)).sum()
    }

    fn segments_at(&self, m: usize) -> Vec<usize> {
        if m == 1 {
            return vec![self.sets[0].v.len()];
        }
        let (e, f) = (self.e_len_at(m - 1), self.bridge_len(m - 1));
        let mut s = vec![e];
        s.extend(std::iter::repeat_n(e.max(f), self.multipliers[m - 1] - 1));
        s.push(f);
        s
    }

    fn e_at(&self, m: usize, a: &[Vec<u8>]) -> Vec<u8> {
        if m == 1 {
            return pick(&a[0], &self.sets[0].v);
        }
        let kids: Vec<&[Vec<u8>]> = a.chunks(self.blocks_at(m - 1)).collect();
        let mut out = self.e_at(m - 1, kids[0]);
        for i in 1..kids.len() {
            out.extend(xor_pad(&self.e_at(m - 1, kids[i]), &self.bridge_at(m - 1, kids[i - 1])));
        }
        out.extend(self.bridge_at(m - 1, kids[kids.len() - 1]));
        out
    }

    /// `f^(m)`: the `V_{m+1}` bits of every block at level `m`.
    fn bridge_at(&self, m: usize, a: &[Vec<u8>]) -> Vec<u8> {
        a.iter().flat_map(|blk| pick(blk, &self.sets[m].v)).collect()
    }

    /// Encoder on the transformed blocks `A_t = U_t G`.
    pub fn encode_blocks(&self, a: &[Vec<u8>]) -> Result<ChainedCode, CompoundError> {
        if a.len() != self.group() {
            return Err(CompoundError::Length { expected: self.group(), got: a.len() });
        }
        if let Some(b) = a.iter().find(|b| b.len() != self.k) {
            return Err(CompoundError::Length { expected: self.k, got: b.len() });
        }
        let residues = self
            .sets
            .iter()
            .map(|s| {
                let res = s.residue();
                a.iter().flat_map(|blk| pick(blk, &res)).collect()
            })
            .collect();
        Ok(ChainedCode { e: self.e_at(self.j(), a), residues, segments: self.segments_at(self.j()) })
    }

    /// Encoder on the raw input sequence of length `T_J * k`.
    pub fn css_encode(&self, u: &[u8]) -> Result<ChainedCode, CompoundError> {
        if u.len() != self.input_len() {
            return Err(CompoundError::Length { expected: self.input_len(), got: u.len() });
        }
        let a = u.chunks(self.k).map(transform).collect::<Result<Vec<_>, _>>()?;
        self.encode_blocks(&a)
    }

    fn decode_block(&self, ctx: &DecodeCtx, t: usize, v_bits: &[u8]) -> Result<Vec<u8>, CompoundError> {
        let s = &self.sets[ctx.j - 1];
        let mut known = vec![None; self.k];
        for (&i, &b) in s.v.iter().zip(v_bits) {
            known[i] = Some(b);
        }
        let r = ctx.residue.len();
        for (&i, &b) in ctx.residue.iter().zip(&ctx.residues[t * r..(t + 1) * r]) {
            known[i] = Some(b);
        }
        Ok(sc_decode_si(ctx.y[t], &known, &s.h, &self.models[ctx.j - 1])?)
    }

    /// Decoder `m` given the level-`m - 1` bridge bits of `blocks_at(m - 1)` blocks.
    fn decode_bridge(&self, ctx: &DecodeCtx, m: usize, f: &[u8], t0: usize) -> Result<Vec<Vec<u8>>, CompoundError> {
        let w = self.sets[m - 1].v.len();
        (0..self.blocks_at(m - 1)).map(|i| self.decode_block(ctx, t0 + i, &f[i * w..(i + 1) * w])).collect()
    }

    fn g_at(&self, ctx: &DecodeCtx, m: usize, seg: &[u8], t0: usize) -> Result<Vec<Vec<u8>>, CompoundError> {
        if m == 1 {
            return Ok(vec![self.decode_block(ctx, t0, seg)?]);
        }
        let c = self.multipliers[m - 1];
        let sub = self.blocks_at(m - 1);
        let (el, fl) = (self.e_len_at(m - 1), self.bridge_len(m - 1));
        let mut parts = Vec::with_capacity(c + 1);
        let mut pos = 0;
        for len in self.segments_at(m) {
            parts.push(&seg[pos..pos + len]);
            pos += len;
        }
        let mut kids: Vec<Vec<Vec<u8>>> = vec![Vec::new(); c];
        if ctx.j < m {
            kids[0] = self.g_at(ctx, m - 1, parts[0], t0)?;
            for i in 1..c {
                let mut e = xor_pad(parts[i], &self.bridge_at(m - 1, &kids[i - 1]));
                e.truncate(el);
                kids[i] = self.g_at(ctx, m - 1, &e, t0 + i * sub)?;
            }
        } else {
            kids[c - 1] = self.decode_bridge(ctx, m, parts[c], t0 + (c - 1) * sub)?;
            for i in (0..c - 1).rev() {
                let mut f = xor_pad(parts[i + 1], &self.e_at(m - 1, &kids[i + 1]));
                f.truncate(fl);
                kids[i] = self.decode_bridge(ctx, m, &f, t0 + i * sub)?;
            }
        }
        Ok(kids.concat())
    }

    /// Decoder `j` (1-based): estimates of the transformed blocks from the side
    /// information blocks, `E` and the residues `E'_j` of that decoder.
    pub fn decode_blocks(
        &self,
        j: usize,
        y: &[&[u8]],
        e: &[u8],
        residues_j: &[u8],
    ) -> Result<Vec<Vec<u8>>, CompoundError> {
        if j == 0 || j > self.j() {
            return Err(CompoundError::Decoder { index: j, j: self.j() });
        }
        if y.len() != self.group() {
            return Err(CompoundError::Length { expected: self.group(), got: y.len() });
        }
        if e.len() != self.e_len() {
            return Err(CompoundError::Length { expected: self.e_len(), got: e.len() });
        }
        if residues_j.len() != self.residue_len(j) {
            return Err(CompoundError::Length { expected: self.residue_len(j), got: residues_j.len() });
        }
        let ctx = DecodeCtx { j, y: y.to_vec(), residues: residues_j, residue: self.sets[j - 1].residue() };
        self.g_at(&ctx, self.j(), e, 0)
    }

    /// Decoder `j` on a side-information sequence of length `T_J * k`;
    /// returns the estimate of the input sequence.
    pub fn css_decode(&self, j: usize, y: &[u8], code: &ChainedCode) -> Result<Vec<u8>, CompoundError> {
        if j == 0 || j > self.j() {
            return Err(CompoundError::Decoder { index: j, j: self.j() });
        }
        if y.len() != self.input_len() {
            return Err(CompoundError::Length { expected: self.input_len(), got: y.len() });
        }
        if code.residues.len() != self.j() {
            return Err(CompoundError::Length { expected: self.j(), got: code.residues.len() });
        }
        let blocks: Vec<&[u8]> = y.chunks(self.k).collect();
        let a = self.decode_blocks(j, &blocks, &code.e, &code.residues[j - 1])?;
        let mut u = Vec::with_capacity(self.input_len());
        for blk in &a {
            u.extend(transform(blk)?);
        }
        Ok(u)
    }
}

/// Sizes of the embedding sets by Euclidean division of `e_len` over `blocks`:
/// the first `e_len % blocks` sets get one extra position.
pub fn euclidean_split(e_len: usize, blocks: usize, capacity: usize) -> Result<Vec<usize>, CompoundError> {
    if blocks == 0 || e_len > blocks * capacity {
        return Err(CompoundError::Split { e_len, blocks, capacity });
    }
    let (q, r) = (e_len / blocks, e_len % blocks);
    Ok((0..blocks).map(|t| q + usize::from(t < r)).collect())
}

/// Compound channel code: block-Markov embedding of the chained source code
/// of each block's input into the next block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompoundChannelCode {
    spec: CompoundSpec,
    input: JointModel,
    /// Near-uniform positions `V_X`, increasing.
    v_x: Vec<usize>,
    /// Embedding sets `A_t`: the lowest `|A_t|` indices of `V_X`.
    embed: Vec<Vec<usize>>,
    /// Message positions `V_X \ A_t`.
    message: Vec<Vec<usize>>,
    /// One channel code per side channel for the residues and the last `E`.
    aux: Vec<PolarChannelCode>,
}

/// Everything the encoder emits for a run of blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompoundCodewords {
    /// Per block, the `T_J * k` channel inputs.
    pub blocks: Vec<Vec<u8>>,
    /// Per channel `j`, the auxiliary codewords carrying every block's
    /// residues followed by the last block's `E`.
    pub aux: Vec<Vec<Vec<u8>>>,
}

impl CompoundChannelCode {
    pub fn new(
        spec: CompoundSpec,
        input: JointModel,
        v_x: Vec<usize>,
        aux: Vec<PolarChannelCode>,
    ) -> Result<Self, CompoundError> {
        if aux.len() != spec.j() {
            return Err(CompoundError::Shape { j: spec.j(), sets: aux.len(), models: spec.j() });
        }
        let sizes = euclidean_split(spec.e_len(), spec.group(), v_x.len())?;
        let embed: Vec<Vec<usize>> = sizes.iter().map(|&s| v_x[..s].to_vec()).collect();
        let message = sizes.iter().map(|&s| v_x[s..].to_vec()).collect();
        Ok(CompoundChannelCode { spec, input, v_x, embed, message, aux })
    }

    /// Sets from Monte Carlo or exact profiles of each channel with input law
    /// `P[X = 1] = p1`, and one auxiliary code of rate `aux_rate` per channel.
    #[allow(clippy::too_many_arguments)]
    pub fn construct(
        channels: &[Dmc],
        multipliers: Vec<usize>,
        p1: f64,
        params: &PolarParams,
        mode: ProfileMode,
        aux_rate: f64,
        cache: Option<&ProfileCache>,
    ) -> Result<Self, CompoundError> {
        let source = SourceSpec::identity(p1)?;
        let mut sets = Vec::new();
        let mut models = Vec::new();
        let mut v_x = Vec::new();
        let mut aux = Vec::new();
        for ch in channels {
            let (s, _) = construct_index_sets(&source, ch, params, mode, cache)?;
            sets.push(SideSets::new(s.v_u_y.clone(), s.h_u_y.clone()));
            models.push(JointModel::u_given_y(&source, ch));
            v_x = s.v_u;
            aux.push(PolarChannelCode::construct(ch, params.k, aux_rate, mode, cache)?);
        }
        let spec = CompoundSpec::new(params.k, multipliers, sets, models)?;
        CompoundChannelCode::new(spec, JointModel::u(&source), v_x, aux)
    }

    pub fn spec(&self) -> &CompoundSpec {
        &self.spec
    }

    pub fn embed_sets(&self) -> &[Vec<usize>] {
        &self.embed
    }

    /// `|V_X \ A_t|` for each polar block `t`.
    pub fn message_lens(&self) -> Vec<usize> {
        self.message.iter().map(Vec::len).collect()
    }

    /// Message bits per channel use.
    pub fn rate(&self) -> f64 {
        self.message_lens().iter().sum::<usize>() as f64 / self.spec.input_len() as f64
    }

    pub fn aux_codes(&self) -> &[PolarChannelCode] {
        &self.aux
    }

    /// Encodes `messages[b][t]` for blocks `b` and polar blocks `t`.
    pub fn encode(&self, messages: &[Vec<Vec<u8>>], coins: &mut dyn Coins) -> Result<CompoundCodewords, CompoundError> {
        let g = self.spec.group();
        let k = self.spec.k;
        let mut carry: Vec<Vec<u8>> = self.embed.iter().map(|s| coins.uniform_bits(s.len())).collect();
        let mut blocks = Vec::with_capacity(messages.len());
        let mut residues = Vec::new();
        for m in messages {
            if m.len() != g {
                return Err(CompoundError::Length { expected: g, got: m.len() });
            }
            let mut v_blocks = Vec::with_capacity(g);
            let mut x = Vec::with_capacity(g * k);
            for t in 0..g {
                if m[t].len() != self.message[t].len() {
                    return Err(CompoundError::Length { expected: self.message[t].len(), got: m[t].len() });
                }
                let mut frozen = vec![None; k];
                for (&i, &b) in self.message[t].iter().zip(&m[t]) {
                    frozen[i] = Some(b);
                }
                for (&i, &b) in self.embed[t].iter().zip(&carry[t]) {
                    frozen[i] = Some(b);
                }
                for &i in &self.v_x {
                    debug_assert!(frozen[i].is_some());
                }
                let v = sc_sample(&self.input, None, &frozen, None, SampleMode::Random, coins)?;
                x.extend(transform(&v)?);
                v_blocks.push(v);
            }
            let code = self.spec.encode_blocks(&v_blocks)?;
            residues.extend(code.residue_bits());
            let mut pos = 0;
            for (t, s) in self.embed.iter().enumerate() {
                carry[t] = code.e[pos..pos + s.len()].to_vec();
                pos += s.len();
            }
            blocks.push(x);
        }
        residues.extend(carry.concat());
        let aux = self.aux.iter().map(|c| c.encode_stream(&residues)).collect::<Result<Vec<_>, _>>()?;
        Ok(CompoundCodewords { blocks, aux })
    }

    /// Decoder `j` (1-based) from the channel outputs of every block and of
    /// its own auxiliary codewords.
    pub fn decode(&self, j: usize, outputs: &[Vec<u8>], aux_outputs: &[Vec<u8>]) -> Result<Vec<Vec<Vec<u8>>>, CompoundError> {
        if j == 0 || j > self.spec.j() {
            return Err(CompoundError::Decoder { index: j, j: self.spec.j() });
        }
        let nb = outputs.len();
        let per_block = self.spec.residue_total();
        let e_len = self.spec.e_len();
        let side = self.aux[j - 1].decode_stream(aux_outputs, nb * per_block + e_len)?;
        let (res_all, e_last) = side.split_at(nb * per_block);
        let offset: usize = (1..j).map(|i| self.spec.residue_len(i)).sum();
        let mine = self.spec.residue_len(j);
        let mut e = e_last.to_vec();
        let mut out = vec![Vec::new(); nb];
        for b in (0..nb).rev() {
            let y = &outputs[b];
            if y.len() != self.spec.input_len() {
                return Err(CompoundError::Length { expected: self.spec.input_len(), got: y.len() });
            }
            let ys: Vec<&[u8]> = y.chunks(self.spec.k).collect();
            let res = &res_all[b * per_block + offset..b * per_block + offset + mine];
            let v = self.spec.decode_blocks(j, &ys, &e, res)?;
            out[b] = v.iter().zip(&self.message).map(|(blk, s)| pick(blk, s)).collect();
            e = v.iter().zip(&self.embed).flat_map(|(blk, s)| pick(blk, s)).collect();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::RngCoins;

    fn noiseless_spec(k: usize, multipliers: Vec<usize>, sets: Vec<SideSets>) -> CompoundSpec {
        let model = JointModel::u_given_y(&SourceSpec::uniform(), &Dmc::noiseless());
        let n = sets.len();
        CompoundSpec::new(k, multipliers, sets, vec![model; n]).unwrap()
    }

    /// Straight transcription of the three-line recursion for J = 2.
    fn oracle_two(a: &[Vec<u8>], v1: &[usize], v2: &[usize]) -> Vec<u8> {
        let e1 = |blk: &Vec<u8>| v1.iter().map(|&i| blk[i]).collect::<Vec<u8>>();
        let f1 = |blk: &Vec<u8>| v2.iter().map(|&i| blk[i]).collect::<Vec<u8>>();
        let mut out = e1(&a[0]);
        for t in 1..a.len() {
            let (x, y) = (e1(&a[t]), f1(&a[t - 1]));
            let n = x.len().max(y.len());
            for i in 0..n {
                out.push(x.get(i).copied().unwrap_or(0) ^ y.get(i).copied().unwrap_or(0));
            }
        }
        out.extend(f1(&a[a.len() - 1]));
        out
    }

    #[test]
    fn single_channel_is_the_plain_split() {
        let sets = vec![SideSets::new(vec![1, 3], vec![1, 2, 3])];
        let spec = noiseless_spec(4, vec![1], sets);
        let a = vec![vec![1, 0, 1, 1]];
        let code = spec.encode_blocks(&a).unwrap();
        assert_eq!(code.e, vec![0, 1]);
        assert_eq!(code.residues, vec![vec![1]]);
    }

    #[test]
    fn two_level_recursion_matches_oracle() {
        let sets = vec![SideSets::new(vec![1, 3], vec![1, 3]), SideSets::new(vec![0, 2, 3], vec![0, 2, 3])];
        let spec = noiseless_spec(4, vec![1, 2], sets);
        let mut c = RngCoins::stream(4, 0);
        for _ in 0..20 {
            let a: Vec<Vec<u8>> = (0..2).map(|_| c.uniform_bits(4)).collect();
            let code = spec.encode_blocks(&a).unwrap();
            assert_eq!(code.e, oracle_two(&a, &[1, 3], &[0, 2, 3]));
            assert_eq!(code.e.len(), spec.e_len());
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let sets = vec![SideSets::new(vec![1], vec![0, 1]), SideSets::new(vec![2, 3], vec![1, 2, 3])];
        let spec = noiseless_spec(4, vec![1, 3], sets);
        let code = spec.css_encode(&[0; 12]).unwrap();
        assert!(code.e.iter().chain(code.residue_bits().iter()).all(|&b| b == 0));
    }

    #[test]
    fn decoder_index_is_checked() {
        let spec = noiseless_spec(4, vec![1], vec![SideSets::new(vec![], vec![0, 1, 2, 3])]);
        let code = spec.css_encode(&[0; 4]).unwrap();
        for j in [0, 2] {
            assert_eq!(spec.css_decode(j, &[0; 4], &code), Err(CompoundError::Decoder { index: j, j: 1 }));
        }
    }

    #[test]
    fn split_arithmetic() {
        assert_eq!(euclidean_split(13, 4, 10).unwrap(), vec![4, 3, 3, 3]);
        assert_eq!(euclidean_split(8, 4, 2).unwrap(), vec![2, 2, 2, 2]);
        assert!(matches!(euclidean_split(9, 4, 2), Err(CompoundError::Split { .. })));
    }

    #[test]
    fn noiseless_ccc_round_trip() {
        let params = PolarParams::new(8, 0.3).unwrap();
        let code = CompoundChannelCode::construct(
            &[Dmc::noiseless()],
            vec![1],
            0.5,
            &params,
            ProfileMode::Exact,
            0.5,
            None,
        )
        .unwrap();
        let mut c = RngCoins::stream(7, 0);
        let msgs: Vec<Vec<Vec<u8>>> = (0..3).map(|_| vec![c.uniform_bits(code.message_lens()[0])]).collect();
        let cw = code.encode(&msgs, &mut c).unwrap();
        assert_eq!(code.decode(1, &cw.blocks, &cw.aux[0]).unwrap(), msgs);
    }
}
