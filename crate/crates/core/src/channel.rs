//! Binary-input discrete memoryless channels, per-use state sequences, the
//! tapping adversary and degradation certificates for eavesdropper families.
//!
//! Main and eavesdropper outputs are simulated independently given the
//! input; every quantity downstream depends only on the two marginals.

use std::fmt;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coins::Coins;

/// Output symbol used by [`Dmc::bec`] for an erasure.
pub const ERASURE: u8 = 2;

const ROW_TOL: f64 = 1e-12;
const CERT_TOL: f64 = 1e-9;

/// Largest output alphabet accepted by [`check_degraded`].
pub const MAX_CERT_ALPHABET: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("transition table must have two rows of equal nonzero length")]
    Shape,
    #[error("output alphabet of {0} symbols exceeds 256")]
    Alphabet(usize),
    #[error("row {row} is not a probability vector (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },
    #[error("{what} index {index} out of range 0..{len}")]
    StateOutOfRange { what: &'static str, index: usize, len: usize },
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("tap fraction {0} outside [0, 1]")]
    TapFraction(Ratio<u64>),
    #[error("tap size alpha*N = {alpha}*{n} is not an integer")]
    TapNotIntegral { alpha: Ratio<u64>, n: usize },
    #[error("custom tap set invalid: {0}")]
    TapSet(String),
    #[error("channel family needs at least one main and one eavesdropper channel")]
    EmptyFamily,
    #[error("mixture weights invalid: {0}")]
    Weights(String),
    #[error("output alphabet {0} exceeds the certificate limit of {MAX_CERT_ALPHABET}")]
    DimensionOverflow(usize),
    #[error("declared best eavesdropper channel is not certified: channel {0} is not degraded")]
    NotDegraded(usize),
    #[error("state generator: {0}")]
    Generator(String),
}

/// A binary-input channel given by its 2 x m transition table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DmcRepr", into = "DmcRepr")]
pub struct Dmc {
    rows: [Vec<f64>; 2],
}

#[derive(Serialize, Deserialize)]
struct DmcRepr {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<DmcRepr> for Dmc {
    type Error = ChannelError;
    fn try_from(r: DmcRepr) -> Result<Self, ChannelError> {
        Dmc::new(r.rows)
    }
}

impl From<Dmc> for DmcRepr {
    fn from(d: Dmc) -> Self {
        let [a, b] = d.rows;
        DmcRepr { rows: vec![a, b] }
    }
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        if rows.len() != 2 || rows[0].is_empty() || rows[0].len() != rows[1].len() {
            return Err(ChannelError::Shape);
        }
        if rows[0].len() > 256 {
            return Err(ChannelError::Alphabet(rows[0].len()));
        }
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (sum - 1.0).abs() > ROW_TOL {
                return Err(ChannelError::NotStochastic { row: i, sum });
            }
        }
        let mut it = rows.into_iter();
        Ok(Dmc { rows: [it.next().unwrap(), it.next().unwrap()] })
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Self {
        Dmc::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).expect("crossover in [0, 1]")
    }

    /// Binary erasure channel; output [`ERASURE`] marks an erasure.
    pub fn bec(e: f64) -> Self {
        Dmc::new(vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]]).expect("erasure in [0, 1]")
    }

    pub fn noiseless() -> Self {
        Dmc::bsc(0.0)
    }

    /// Single-output channel: the output carries no information about x.
    pub fn pure_noise() -> Self {
        Dmc::new(vec![vec![1.0], vec![1.0]]).unwrap()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: u8) -> &[f64] {
        &self.rows[x as usize]
    }

    pub fn prob(&self, x: u8, y: u8) -> f64 {
        self.rows[x as usize][y as usize]
    }

    pub fn sample(&self, x: u8, coins: &mut dyn Coins) -> u8 {
        coins.choice(&self.rows[x as usize]) as u8
    }

    /// Outputs with positive probability under some input.
    pub fn support(&self) -> Vec<u8> {
        (0..self.outputs()).filter(|&y| self.rows[0][y] > 0.0 || self.rows[1][y] > 0.0).map(|y| y as u8).collect()
    }

    /// Channel obtained by passing this channel's output through `w`
    /// (`w[y][k]` = probability of k given y).
    pub fn then(&self, w: &[Vec<f64>]) -> Result<Dmc, ChannelError> {
        if w.len() != self.outputs() || w.is_empty() {
            return Err(ChannelError::Length(w.len(), self.outputs()));
        }
        let m = w[0].len();
        let rows = self
            .rows
            .iter()
            .map(|row| (0..m).map(|k| row.iter().zip(w).map(|(p, wr)| p * wr[k]).sum()).collect())
            .collect();
        Dmc::new(rows)
    }

    /// Convex combination of channels. Smaller output alphabets are padded
    /// with never-used symbols up to the largest one.
    pub fn mixture(channels: &[Dmc], weights: &[f64]) -> Result<Dmc, ChannelError> {
        check_weights(weights, channels.len())?;
        let m = channels.iter().map(Dmc::outputs).max().unwrap();
        let rows = (0..2)
            .map(|x| {
                (0..m)
                    .map(|y| {
                        channels
                            .iter()
                            .zip(weights)
                            .filter(|(c, _)| y < c.outputs())
                            .map(|(c, w)| w * c.rows[x][y])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Dmc::new(rows)
    }
}

impl fmt::Display for Dmc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} / {:?}", self.rows[0], self.rows[1])
    }
}

fn check_weights(weights: &[f64], len: usize) -> Result<(), ChannelError> {
    if weights.len() != len || len == 0 {
        return Err(ChannelError::Weights(format!("{} weights for {} channels", weights.len(), len)));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > ROW_TOL {
        return Err(ChannelError::Weights(format!("weights must be a probability vector (sum {sum})")));
    }
    Ok(())
}

/// Main-channel family indexed by t and eavesdropper family indexed by s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFamily {
    pub mains: Vec<Dmc>,
    pub eves: Vec<Dmc>,
    /// Mixing weights over `eves` for a declared best eavesdropper channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_eve: Option<Vec<f64>>,
}

impl ChannelFamily {
    pub fn new(mains: Vec<Dmc>, eves: Vec<Dmc>) -> Result<Self, ChannelError> {
        if mains.is_empty() || eves.is_empty() {
            return Err(ChannelError::EmptyFamily);
        }
        Ok(ChannelFamily { mains, eves, best_eve: None })
    }

    /// One main channel, one eavesdropper channel.
    pub fn single(main: Dmc, eve: Dmc) -> Self {
        ChannelFamily { mains: vec![main], eves: vec![eve], best_eve: None }
    }

    /// Declares the mixture `weights` as best eavesdropper channel after
    /// certifying that every family member is degraded with respect to it.
    pub fn with_best_eve(mut self, weights: Vec<f64>) -> Result<Self, ChannelError> {
        match check_degraded(&self, &weights)? {
            Degradation::Certified(_) => {
                self.best_eve = Some(weights);
                Ok(self)
            }
            Degradation::Refused { eve } => Err(ChannelError::NotDegraded(eve)),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.mains.is_empty() || self.eves.is_empty() {
            return Err(ChannelError::EmptyFamily);
        }
        if let Some(w) = &self.best_eve {
            if let Degradation::Refused { eve } = check_degraded(self, w)? {
                return Err(ChannelError::NotDegraded(eve));
            }
        }
        Ok(())
    }

    /// The declared best eavesdropper channel as a single table.
    pub fn best_eve_channel(&self) -> Result<Option<Dmc>, ChannelError> {
        self.best_eve.as_ref().map(|w| Dmc::mixture(&self.eves, w)).transpose()
    }
}

/// Per-use channel indices for one block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    pub main: Vec<usize>,
    pub eve: Vec<usize>,
}

impl StateSequence {
    pub fn constant(n: usize, main: usize, eve: usize) -> Self {
        StateSequence { main: vec![main; n], eve: vec![eve; n] }
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    pub fn check(&self, family: &ChannelFamily) -> Result<(), ChannelError> {
        if self.main.len() != self.eve.len() {
            return Err(ChannelError::Length(self.main.len(), self.eve.len()));
        }
        for &t in &self.main {
            if t >= family.mains.len() {
                return Err(ChannelError::StateOutOfRange { what: "main", index: t, len: family.mains.len() });
            }
        }
        for &s in &self.eve {
            if s >= family.eves.len() {
                return Err(ChannelError::StateOutOfRange { what: "eavesdropper", index: s, len: family.eves.len() });
            }
        }
        Ok(())
    }
}

/// How state sequences are produced for each block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateGenerator {
    /// The same pair of indices at every use.
    Constant { main: usize, eve: usize },
    /// Independent draws per use.
    Iid { main: Vec<f64>, eve: Vec<f64> },
    /// Fixed patterns, repeated cyclically to the block length.
    Explicit { main: Vec<usize>, eve: Vec<usize> },
}

impl Default for StateGenerator {
    fn default() -> Self {
        StateGenerator::Constant { main: 0, eve: 0 }
    }
}

impl StateGenerator {
    pub fn generate(&self, n: usize, coins: &mut dyn Coins) -> Result<StateSequence, ChannelError> {
        match self {
            StateGenerator::Constant { main, eve } => Ok(StateSequence::constant(n, *main, *eve)),
            StateGenerator::Iid { main, eve } => {
                for w in [main, eve] {
                    check_weights(w, w.len())?;
                }
                let m = (0..n).map(|_| coins.choice(main)).collect();
                let e = (0..n).map(|_| coins.choice(eve)).collect();
                Ok(StateSequence { main: m, eve: e })
            }
            StateGenerator::Explicit { main, eve } => {
                if main.is_empty() || eve.is_empty() {
                    return Err(ChannelError::Generator("explicit pattern is empty".into()));
                }
                Ok(StateSequence {
                    main: (0..n).map(|i| main[i % main.len()]).collect(),
                    eve: (0..n).map(|i| eve[i % eve.len()]).collect(),
                })
            }
        }
    }

    /// Generator that fixes the main channel to `t`, keeping the
    /// eavesdropper part.
    pub fn with_main(&self, t: usize) -> StateGenerator {
        match self {
            StateGenerator::Constant { eve, .. } => StateGenerator::Constant { main: t, eve: *eve },
            StateGenerator::Iid { main, eve } => {
                let mut m = vec![0.0; main.len()];
                if t < m.len() {
                    m[t] = 1.0;
                }
                StateGenerator::Iid { main: m, eve: eve.clone() }
            }
            StateGenerator::Explicit { eve, .. } => StateGenerator::Explicit { main: vec![t], eve: eve.clone() },
        }
    }
}

/// Passes `x` through the main and eavesdropper channels selected by `states`.
pub fn transmit(
    x: &[u8],
    states: &StateSequence,
    family: &ChannelFamily,
    coins: &mut dyn Coins,
) -> Result<(Vec<u8>, Vec<u8>), ChannelError> {
    if states.len() != x.len() {
        return Err(ChannelError::Length(x.len(), states.len()));
    }
    states.check(family)?;
    let y = x.iter().zip(&states.main).map(|(&b, &t)| family.mains[t].sample(b, coins)).collect();
    let z = x.iter().zip(&states.eve).map(|(&b, &s)| family.eves[s].sample(b, coins)).collect();
    Ok((y, z))
}

/// Passes `x` through one channel.
pub fn transmit_one(x: &[u8], channel: &Dmc, coins: &mut dyn Coins) -> Vec<u8> {
    x.iter().map(|&b| channel.sample(b, coins)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "positions", rename_all = "snake_case")]
pub enum TapStrategy {
    First,
    Random,
    Custom(Vec<usize>),
}

/// Chooses the tapped positions (0-based, sorted) with |A| = alpha*N exactly.
pub fn choose_tap(
    strategy: &TapStrategy,
    alpha: Ratio<u64>,
    n: usize,
    coins: &mut dyn Coins,
) -> Result<Vec<usize>, ChannelError> {
    if alpha > Ratio::from_integer(1) {
        return Err(ChannelError::TapFraction(alpha));
    }
    let size = alpha * Ratio::from_integer(n as u64);
    if !size.is_integer() {
        return Err(ChannelError::TapNotIntegral { alpha, n });
    }
    let size = size.to_integer() as usize;
    match strategy {
        TapStrategy::First => Ok((0..size).collect()),
        TapStrategy::Random => {
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..size {
                let j = i + coins.uniform((n - i) as u64) as usize;
                pool.swap(i, j);
            }
            let mut out = pool[..size].to_vec();
            out.sort_unstable();
            Ok(out)
        }
        TapStrategy::Custom(list) => {
            let mut out = list.clone();
            out.sort_unstable();
            out.dedup();
            if out.len() != list.len() {
                return Err(ChannelError::TapSet("duplicate positions".into()));
            }
            if out.len() != size {
                return Err(ChannelError::TapSet(format!("{} positions given, alpha*N = {size}", out.len())));
            }
            if out.last().is_some_and(|&p| p >= n) {
                return Err(ChannelError::TapSet(format!("position out of range 0..{n}")));
            }
            Ok(out)
        }
    }
}

/// Outcome of a degradation check.
#[derive(Clone, Debug, PartialEq)]
pub enum Degradation {
    /// One stochastic map per eavesdropper channel s with
    /// p_s = p_best followed by the map.
    Certified(Vec<Vec<Vec<f64>>>),
    Refused { eve: usize },
}

/// Searches, for every eavesdropper channel, a stochastic map that turns the
/// weighted best channel into it. Feasibility is decided by a linear program
/// and the returned maps are re-verified entrywise to 1e-9.
pub fn check_degraded(family: &ChannelFamily, weights: &[f64]) -> Result<Degradation, ChannelError> {
    let m = family.eves.iter().map(Dmc::outputs).max().unwrap_or(0);
    if m > MAX_CERT_ALPHABET {
        return Err(ChannelError::DimensionOverflow(m));
    }
    let best = Dmc::mixture(&family.eves, weights)?;
    let mut maps = Vec::with_capacity(family.eves.len());
    for (s, target) in family.eves.iter().enumerate() {
        match degrading_map(&best, target) {
            Some(w) => maps.push(w),
            None => return Ok(Degradation::Refused { eve: s }),
        }
    }
    Ok(Degradation::Certified(maps))
}

/// Stochastic map w with `target = best.then(w)`, if one exists.
pub fn degrading_map(best: &Dmc, target: &Dmc) -> Option<Vec<Vec<f64>>> {
    let (m, k) = (best.outputs(), target.outputs());
    if best == target {
        return Some((0..m).map(|j| (0..m).map(|c| (j == c) as u8 as f64).collect()).collect());
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..m).map(|_| (0..k).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect()).collect();
    for row in &vars {
        let terms: Vec<_> = row.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(&terms, ComparisonOp::Eq, 1.0);
    }
    for x in 0..2u8 {
        for c in 0..k {
            let terms: Vec<_> = (0..m).filter(|&j| best.prob(x, j as u8) > 0.0).map(|j| (vars[j][c], best.prob(x, j as u8))).collect();
            lp.add_constraint(&terms, ComparisonOp::Eq, target.prob(x, c as u8));
        }
    }
    let sol = match lp.solve().ok()? {
        microlp::SolveOutcome::Solution(sol) => sol,
        microlp::SolveOutcome::Interrupted(_) => return None,
    };
    let w: Vec<Vec<f64>> = vars
        .iter()
        .map(|row| {
            let r: Vec<f64> = row.iter().map(|&v| sol[v].max(0.0)).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|p| p / s).collect()
        })
        .collect();
    let composed = best.then(&w).ok()?;
    for x in 0..2u8 {
        for c in 0..k {
            if (composed.prob(x, c as u8) - target.prob(x, c as u8)).abs() > CERT_TOL {
                return None;
            }
        }
    }
    Some(w)
}
