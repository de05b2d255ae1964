//! Exact security oracle for tiny configurations: joint laws of encoder
//! variables by exhaustive enumeration of every coin, information measures
//! on them, and the bound checks built from those.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{choose_tap, ChannelError};
use crate::codec::{encode_blocks, BlockSampler, CodeConfig, CodecError, KeyMaterial, Link};
use crate::coins::{enumerate_into, Coins, EnumerationError, MAX_OUTCOMES};
use crate::polar::{IndexSets, SampleMode, SourceSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeakageError {
    #[error("unknown variable {0:?}")]
    Unknown(String),
    #[error("tables have different variables: {0:?} vs {1:?}")]
    Arity(Vec<String>, Vec<String>),
    #[error("total mass {0} differs from 1")]
    Mass(f64),
    #[error("negative probability {0}")]
    Negative(f64),
    #[error("block {block} outside the {blocks}-block session")]
    Block { block: usize, blocks: usize },
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

const MASS_TOL: f64 = 1e-10;

type Outcome = Vec<Vec<u8>>;

/// Exact joint law of named bit-vector variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    names: Vec<String>,
    law: BTreeMap<Outcome, f64>,
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

impl JointTable {
    /// Builds a table from (outcome, probability) pairs, merging repeats.
    pub fn new(names: Vec<String>, entries: impl IntoIterator<Item = (Outcome, f64)>) -> Result<Self, LeakageError> {
        let mut law = BTreeMap::new();
        for (o, p) in entries {
            if p < 0.0 {
                return Err(LeakageError::Negative(p));
            }
            if o.len() != names.len() {
                return Err(LeakageError::Arity(names.clone(), vec![format!("{} values", o.len())]));
            }
            *law.entry(o).or_insert(0.0) += p;
        }
        let t = JointTable { names, law };
        if (t.mass() - 1.0).abs() > MASS_TOL {
            return Err(LeakageError::Mass(t.mass()));
        }
        Ok(t)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.law.len()
    }

    pub fn is_empty(&self) -> bool {
        self.law.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.law.values().sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Outcome, f64)> {
        self.law.iter().map(|(o, &p)| (o, p))
    }

    pub fn prob(&self, outcome: &[Vec<u8>]) -> f64 {
        self.law.get(outcome).copied().unwrap_or(0.0)
    }

    fn indices(&self, vars: &[&str]) -> Result<Vec<usize>, LeakageError> {
        vars.iter()
            .map(|v| self.names.iter().position(|n| n == v).ok_or_else(|| LeakageError::Unknown(v.to_string())))
            .collect()
    }

    fn project(&self, idx: &[usize]) -> HashMap<Outcome, f64> {
        let mut out = HashMap::new();
        for (o, &p) in &self.law {
            *out.entry(idx.iter().map(|&i| o[i].clone()).collect()).or_insert(0.0) += p;
        }
        out
    }

    pub fn marginal(&self, vars: &[&str]) -> Result<JointTable, LeakageError> {
        let idx = self.indices(vars)?;
        Ok(JointTable { names: vars.iter().map(|s| s.to_string()).collect(), law: self.project(&idx).into_iter().collect() })
    }

    /// `H(vars)` in bits.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64, LeakageError> {
        Ok(self.project(&self.indices(vars)?).values().map(|&p| plogp(p)).sum())
    }

    /// `H(a | b)`.
    pub fn cond_entropy(&self, a: &[&str], b: &[&str]) -> Result<f64, LeakageError> {
        let ab: Vec<&str> = a.iter().chain(b).copied().collect();
        Ok(self.entropy(&ab)? - self.entropy(b)?)
    }

    /// `I(a; b)`, clamped at zero against rounding.
    pub fn mutual_info(&self, a: &[&str], b: &[&str]) -> Result<f64, LeakageError> {
        let ab: Vec<&str> = a.iter().chain(b).copied().collect();
        Ok((self.entropy(a)? + self.entropy(b)? - self.entropy(&ab)?).max(0.0))
    }

    /// `-log2 max_{a,b} p(a | b)`; with `b` empty, the plain min-entropy.
    pub fn cond_min_entropy(&self, a: &[&str], b: &[&str]) -> Result<f64, LeakageError> {
        let ia = self.indices(a)?;
        let ib = self.indices(b)?;
        let ab: Vec<usize> = ia.iter().chain(&ib).copied().collect();
        let pb = self.project(&ib);
        let worst = self
            .project(&ab)
            .iter()
            .map(|(o, &p)| p / pb[&o[ia.len()..].to_vec()])
            .fold(0.0, f64::max);
        Ok(-worst.log2())
    }

    /// `V(p_{ab}, p_a p_b) = sum |p(a,b) - p(a) p(b)|`.
    pub fn independence_distance(&self, a: &[&str], b: &[&str]) -> Result<f64, LeakageError> {
        let ia = self.indices(a)?;
        let ib = self.indices(b)?;
        let ab: Vec<usize> = ia.iter().chain(&ib).copied().collect();
        let pa = self.project(&ia);
        let pb = self.project(&ib);
        let pab = self.project(&ab);
        let mut v = 0.0;
        for (x, &px) in &pa {
            for (y, &py) in &pb {
                let key: Outcome = x.iter().chain(y).cloned().collect();
                v += (pab.get(&key).copied().unwrap_or(0.0) - px * py).abs();
            }
        }
        Ok(v)
    }

    /// Product of the marginals of `a` and `b`, as a table over `a ++ b`.
    pub fn product_of_marginals(&self, a: &[&str], b: &[&str]) -> Result<JointTable, LeakageError> {
        let pa = self.project(&self.indices(a)?);
        let pb = self.project(&self.indices(b)?);
        let names = a.iter().chain(b).map(|s| s.to_string()).collect();
        let law = pa
            .iter()
            .flat_map(|(x, &px)| pb.iter().map(move |(y, &py)| (x.iter().chain(y).cloned().collect(), px * py)))
            .collect();
        Ok(JointTable { names, law })
    }

    fn same_names(&self, other: &JointTable) -> Result<(), LeakageError> {
        if self.names != other.names {
            return Err(LeakageError::Arity(self.names.clone(), other.names.clone()));
        }
        Ok(())
    }
}

/// `D(p || q)` in bits; infinite when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &JointTable, q: &JointTable) -> Result<f64, LeakageError> {
    p.same_names(q)?;
    let mut d = 0.0;
    for (o, pp) in p.entries() {
        if pp > 0.0 {
            let qq = q.prob(o);
            if qq <= 0.0 {
                return Ok(f64::INFINITY);
            }
            d += pp * (pp / qq).log2();
        }
    }
    Ok(d.max(0.0))
}

/// `V(p, q) = sum |p - q|` (no factor one half).
pub fn variational_distance(p: &JointTable, q: &JointTable) -> Result<f64, LeakageError> {
    p.same_names(q)?;
    let mut v: f64 = p.entries().map(|(o, pp)| (pp - q.prob(o)).abs()).sum();
    v += q.entries().filter(|(o, _)| p.prob(o) == 0.0).map(|(_, qq)| qq).sum::<f64>();
    Ok(v)
}

/// Encoder variables that can be enumerated. Block indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    /// All messages, concatenated.
    Messages,
    Message(usize),
    /// `M_b || M'_b`, the part of the hash input that must stay secret.
    Protected(usize),
    /// All hash seeds.
    Seeds,
    Seed(usize),
    /// Hash preimage of a block.
    Hashed(usize),
    /// All eavesdropper channel outputs.
    Eve,
    EveBlock(usize),
    /// All tapped channel inputs.
    Taps,
    TapBlock(usize),
    Input(usize),
    SourceBlock(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Messages => write!(f, "M"),
            Var::Message(b) => write!(f, "M{b}"),
            Var::Protected(b) => write!(f, "Mbar{b}"),
            Var::Seeds => write!(f, "R"),
            Var::Seed(b) => write!(f, "R{b}"),
            Var::Hashed(b) => write!(f, "T{b}"),
            Var::Eve => write!(f, "Z"),
            Var::EveBlock(b) => write!(f, "Z{b}"),
            Var::Taps => write!(f, "XA"),
            Var::TapBlock(b) => write!(f, "XA{b}"),
            Var::Input(b) => write!(f, "X{b}"),
            Var::SourceBlock(b) => write!(f, "U{b}"),
        }
    }
}

impl Var {
    fn block(&self) -> Option<usize> {
        match *self {
            Var::Message(b)
            | Var::Protected(b)
            | Var::Seed(b)
            | Var::Hashed(b)
            | Var::EveBlock(b)
            | Var::TapBlock(b)
            | Var::Input(b)
            | Var::SourceBlock(b) => Some(b),
            _ => None,
        }
    }
}

struct BlockView {
    z: Vec<u8>,
    tap: Vec<u8>,
}

/// Exact joint law of `vars` under the real encoder with uniform messages,
/// over every hash seed, randomizer, sampler coin, tap choice and
/// eavesdropper channel noise. The pad is not part of the eavesdropper's
/// per-block view, so an all-zero key is used.
pub fn enumerate_induced(cfg: &CodeConfig, link: &Link, vars: &[Var]) -> Result<JointTable, LeakageError> {
    enumerate_induced_with_limit(cfg, link, vars, MAX_OUTCOMES)
}

pub fn enumerate_induced_with_limit(cfg: &CodeConfig, link: &Link, vars: &[Var], limit: usize) -> Result<JointTable, LeakageError> {
    let blocks = cfg.design.b;
    if let Some(b) = vars.iter().filter_map(Var::block).find(|&b| b >= blocks) {
        return Err(LeakageError::Block { block: b, blocks });
    }
    let key = KeyMaterial::injected(vec![0; cfg.l_otp()]);
    let n = cfg.n();
    let mut failure = None;
    let mut law: HashMap<Outcome, f64> = HashMap::new();
    enumerate_into(
        |c| -> Result<Outcome, LeakageError> {
            let msgs: Vec<Vec<u8>> = cfg.message_lens().iter().map(|&l| c.uniform_bits(l)).collect();
            let enc = encode_blocks(&msgs, &key, cfg, c)?;
            let mut views = Vec::with_capacity(blocks);
            for blk in &enc.blocks {
                let states = link.states.generate(n, c)?;
                let tap = choose_tap(&link.tap, cfg.design.alpha, n, c)?;
                let z = blk.x.iter().zip(&states.eve).map(|(&x, &s)| link.family.eves[s].sample(x, c)).collect();
                views.push(BlockView { z, tap: tap.iter().map(|&i| blk.x[i]).collect() });
            }
            Ok(vars
                .iter()
                .map(|v| match *v {
                    Var::Messages => msgs.concat(),
                    Var::Message(b) => msgs[b].clone(),
                    Var::Protected(b) => [msgs[b].as_slice(), &enc.blocks[b].chained_in].concat(),
                    Var::Seeds => enc.blocks.iter().flat_map(|x| x.hash_seed.clone()).collect(),
                    Var::Seed(b) => enc.blocks[b].hash_seed.clone(),
                    Var::Hashed(b) => enc.blocks[b].t.clone(),
                    Var::Eve => views.iter().flat_map(|v| v.z.clone()).collect(),
                    Var::EveBlock(b) => views[b].z.clone(),
                    Var::Taps => views.iter().flat_map(|v| v.tap.clone()).collect(),
                    Var::TapBlock(b) => views[b].tap.clone(),
                    Var::Input(b) => enc.blocks[b].x.clone(),
                    Var::SourceBlock(b) => enc.blocks[b].polar.u_concat(),
                })
                .collect())
        },
        limit,
        |out, p| match out {
            Ok(o) => *law.entry(o).or_insert(0.0) += p,
            Err(e) => {
                failure.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    JointTable::new(vars.iter().map(Var::to_string).collect(), law)
}

/// One checked quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub quantity: String,
    pub exact_value: f64,
    pub bound: f64,
    pub bound_ref: String,
    pub pass: bool,
}

impl Check {
    fn at_most(quantity: impl Into<String>, exact_value: f64, bound: f64, bound_ref: impl Into<String>) -> Self {
        Check { quantity: quantity.into(), exact_value, bound, bound_ref: bound_ref.into(), pass: exact_value <= bound }
    }

    fn at_least(quantity: impl Into<String>, exact_value: f64, bound: f64, bound_ref: impl Into<String>) -> Self {
        Check { quantity: quantity.into(), exact_value, bound, bound_ref: bound_ref.into(), pass: exact_value >= bound }
    }
}

/// Slack for floating-point sums in exact comparisons.
pub const FLOAT_SLACK: f64 = 1e-12;

/// Divergence of the target product law of `(U, X)` from the law the sampler
/// induces when `V_U` carries uniform bits, over `blocks` polar blocks,
/// against `2 blocks K delta_K`.
pub fn check_sampler_divergence(source: &SourceSpec, sets: &IndexSets, blocks: usize, mode: SampleMode) -> Result<Check, LeakageError> {
    let sampler = BlockSampler::new(source, sets);
    let t_len = blocks * sets.v_u.len();
    let mut failure = None;
    let mut law: HashMap<Outcome, f64> = HashMap::new();
    enumerate_into(
        |c| {
            let t = c.uniform_bits(t_len);
            sampler.sample(&t, blocks, mode, c).map(|p| {
                let x = p.x();
                vec![p.u_concat(), x]
            })
        },
        MAX_OUTCOMES,
        |out, p| match out {
            Ok(o) => *law.entry(o).or_insert(0.0) += p,
            Err(e) => {
                failure.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let induced = JointTable::new(vec!["U".into(), "X".into()], law)?;
    let n = blocks * sets.k;
    let q = source.q();
    let mut target = Vec::with_capacity(1 << (2 * n));
    for code in 0..1usize << (2 * n) {
        let u: Vec<u8> = (0..n).map(|i| ((code >> (2 * n - 1 - i)) & 1) as u8).collect();
        let x: Vec<u8> = (0..n).map(|i| ((code >> (n - 1 - i)) & 1) as u8).collect();
        let p: f64 = u.iter().zip(&x).map(|(&a, &b)| q[a as usize][b as usize]).product();
        if p > 0.0 {
            target.push((vec![u, x], p));
        }
    }
    let target = JointTable::new(vec!["U".into(), "X".into()], target)?;
    let d = kl_divergence(&target, &induced)?;
    let bound = 2.0 * n as f64 * sets.delta;
    Ok(Check::at_most("D(target || induced) of (U, X)", d, bound, "2 L K delta_K sampler divergence bound"))
}

/// Exact hash-output leakage of a one-block session against the leftover
/// bound at zero smoothing, and the continuity bound on the mutual
/// information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeftoverReport {
    /// `V(p_{M, R, Z, X[A]}, p_M p_{R, Z, X[A]})` against
    /// `sqrt(2^(r - H_min(T | Z, X[A])))`.
    pub distance: Check,
    /// `I(M; R, Z, X[A])` against `1.2 f(V)`, `f(x) = x log(2^N / x)`.
    pub information: Check,
    pub min_entropy: f64,
    pub r: usize,
}

fn continuity(v: f64, n: usize) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * n as f64 - v * v.log2()
    }
}

pub fn check_leftover(cfg: &CodeConfig, link: &Link) -> Result<LeftoverReport, LeakageError> {
    if cfg.design.b != 1 {
        return Err(LeakageError::Block { block: 1, blocks: cfg.design.b });
    }
    let table = enumerate_induced(cfg, link, &[Var::Protected(0), Var::Hashed(0), Var::Seed(0), Var::EveBlock(0), Var::TapBlock(0)])?;
    let (m, t, r, z, xa) = ("Mbar0", "T0", "R0", "Z0", "XA0");
    let h_min = table.cond_min_entropy(&[t], &[z, xa])?;
    let v = table.independence_distance(&[m], &[r, z, xa])?;
    let bound = (cfg.r as f64 - h_min).exp2().sqrt();
    let info = table.mutual_info(&[m], &[r, z, xa])?;
    let f_bound = 1.2 * continuity(v, cfg.n());
    Ok(LeftoverReport {
        distance: Check::at_most(
            "V(p_{M,R,Z,X[A]}, p_M p_{R,Z,X[A]})",
            v,
            bound + FLOAT_SLACK,
            "leftover hash bound sqrt(2^(r - H_min(T|Z,X[A]))) at zero smoothing",
        ),
        information: Check::at_most("I(M; R, Z, X[A])", info, f_bound + FLOAT_SLACK, "1.2 (V N - V log V)"),
        min_entropy: h_min,
        r: cfg.r,
    })
}

/// Whole-session leakage against twice the sum of the per-block leakages of
/// the protected hash inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLeakage {
    /// `I(M_{1:B}; Z_{1:B}, X_{1:B}[A], R_{1:B})`.
    pub joint: f64,
    /// `I(M_b M'_b; Z_b, X_b[A], R_b)` per block.
    pub per_block: Vec<f64>,
    /// `I(M_1; M_2 ... M_B)`, zero for independent messages.
    pub message_dependence: f64,
    pub structure: Check,
    /// Joint leakage against `2 B delta4` at each reported gamma.
    pub asymptotic: Vec<Check>,
}

pub fn joint_block_leakage(cfg: &CodeConfig, link: &Link) -> Result<JointLeakage, LeakageError> {
    let blocks = cfg.design.b;
    let mut vars = vec![Var::Messages];
    for b in 0..blocks {
        vars.extend([Var::Message(b), Var::Protected(b), Var::Seed(b), Var::EveBlock(b), Var::TapBlock(b)]);
    }
    let table = enumerate_induced(cfg, link, &vars)?;
    let name = |v: Var| v.to_string();
    let mut eve_all = Vec::new();
    let mut per_block = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let eve = [name(Var::Seed(b)), name(Var::EveBlock(b)), name(Var::TapBlock(b))];
        let eve: Vec<&str> = eve.iter().map(String::as_str).collect();
        per_block.push(table.mutual_info(&[&name(Var::Protected(b))], &eve)?);
        eve_all.extend(eve.iter().map(|s| s.to_string()));
    }
    let eve_all: Vec<&str> = eve_all.iter().map(String::as_str).collect();
    let joint = table.mutual_info(&["M"], &eve_all)?;
    let rest: Vec<String> = (1..blocks).map(|b| name(Var::Message(b))).collect();
    let rest: Vec<&str> = rest.iter().map(String::as_str).collect();
    let message_dependence = if rest.is_empty() { 0.0 } else { table.mutual_info(&[&name(Var::Message(0))], &rest)? };
    let sum: f64 = per_block.iter().sum();
    let structure = Check::at_most(
        "I(M_{1:B}; Z_{1:B}, X_{1:B}[A], R_{1:B})",
        joint,
        2.0 * sum + FLOAT_SLACK,
        "2 x sum over blocks of I(M_b M'_b; Z_b, X_b[A], R_b)",
    );
    let asymptotic = cfg
        .rates
        .asymptotic
        .by_gamma
        .iter()
        .map(|g| {
            Check::at_most(
                format!("I(M_{{1:B}}; Z_{{1:B}}, X_{{1:B}}[A], R_{{1:B}}) at gamma = {}", g.gamma),
                joint,
                2.0 * blocks as f64 * g.delta4,
                "2 B delta4(K, L, xi)",
            )
        })
        .collect();
    Ok(JointLeakage { joint, per_block, message_dependence, structure, asymptotic })
}

/// Leakage of a one-block session when the eavesdropper state follows
/// `varying` compared with the leakage against the best channel alone.
pub fn check_best_channel(cfg: &CodeConfig, varying: &Link, best: &Link) -> Result<Check, LeakageError> {
    let vars = [Var::Messages, Var::Seeds, Var::Eve, Var::Taps];
    let leak = |link: &Link| -> Result<f64, LeakageError> {
        let t = enumerate_induced(cfg, link, &vars)?;
        t.mutual_info(&["M"], &["R", "Z", "XA"])
    };
    let mixed = leak(varying)?;
    let reference = leak(best)?;
    Ok(Check::at_most(
        "I(M; R, Z, X[A]) under varying eavesdropper states",
        mixed,
        reference + 1e-9,
        "leakage against the best eavesdropper channel alone",
    ))
}

/// Composition of `total` into `parts` non-negative counts, in
/// lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Smooth min-entropy of `L` i.i.d. copies of `pair[x][z]` by greedy
/// trimming: mass above `lambda p(z^L)` is removed until the removed mass
/// reaches `eps`; the result is `-log2 lambda`. This lower-bounds the optimal
/// smoothing. Sequences are grouped by joint type.
pub fn trimmed_min_entropy(pair: &[Vec<f64>], l: usize, eps: f64) -> f64 {
    let (nx, nz) = (pair.len(), pair[0].len());
    let pz: Vec<f64> = (0..nz).map(|z| (0..nx).map(|x| pair[x][z]).sum()).collect();
    // (p(x^L | z^L), total weight of the class) for every joint type
    let mut classes: Vec<(f64, f64)> = Vec::new();
    for counts in compositions(l, nx * nz) {
        let mut ln_ratio = 0.0;
        let mut ln_weight = ln_factorial(l);
        let mut possible = true;
        for (c, &n) in counts.iter().enumerate() {
            let (x, z) = (c / nz, c % nz);
            ln_weight -= ln_factorial(n);
            if n > 0 {
                if pair[x][z] <= 0.0 {
                    possible = false;
                    break;
                }
                ln_ratio += n as f64 * (pair[x][z] / pz[z]).ln();
                ln_weight += n as f64 * pz[z].ln();
            }
        }
        if possible {
            classes.push((ln_ratio.exp(), ln_weight.exp()));
        }
    }
    classes.sort_by(|a, b| b.0.total_cmp(&a.0));
    // removed(lambda) = sum over ratio > lambda of w (ratio - lambda)
    let (mut s0, mut s1) = (0.0, 0.0);
    for i in 0..classes.len() {
        s0 += classes[i].1;
        s1 += classes[i].1 * classes[i].0;
        let next = classes.get(i + 1).map_or(0.0, |c| c.0);
        if s1 - next * s0 > eps {
            let lambda = (s1 - eps) / s0;
            return -lambda.log2();
        }
    }
    f64::INFINITY
}

/// Smoothing check for `L` i.i.d. pairs: the trimmed smooth min-entropy at
/// `eps = 2^(-L delta^2 / (2 log2^2(|X| + 3)))` against `H(X^L|Z^L) - L delta`.
pub fn check_smoothing(pair: &[Vec<f64>], l: usize, delta: f64) -> Check {
    let nx = pair.len();
    let eps = (-(l as f64) * delta * delta / (2.0 * ((nx as f64 + 3.0).log2()).powi(2))).exp2();
    let nz = pair[0].len();
    let h_joint: f64 = pair.iter().flatten().map(|&p| plogp(p)).sum();
    let h_z: f64 = (0..nz).map(|z| plogp((0..nx).map(|x| pair[x][z]).sum())).sum();
    let target = l as f64 * (h_joint - h_z) - l as f64 * delta;
    let h = trimmed_min_entropy(pair, l, eps);
    Check::at_least(
        format!("trimmed smooth min-entropy, L = {l}, delta = {delta}, eps = {eps:.6}"),
        h,
        target - FLOAT_SLACK,
        "H(X^L|Z^L) - L delta",
    )
}
