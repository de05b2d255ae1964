//! Bit-channel entropy profiles, the six polarized index sets, and the
//! on-disk profile cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_block_length, transform_in_place, JointModel, PolarError, PolarParams, ScKernel, SourceSpec};
use crate::channel::Dmc;
use crate::coins::RngCoins;
use rand::Rng;

/// Samples per deterministic Monte Carlo chunk; chunk c uses RNG stream c.
pub const CHUNK: usize = 1024;

/// Largest tolerated fraction of discarded Monte Carlo samples.
pub const MAX_DISCARD_RATE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// A = U G, no side information.
    U,
    /// A = U G given the main-channel output.
    UGivenY,
    /// V = X G, no side information.
    X,
    /// V = X G given U.
    XGivenU,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ProfileMode {
    /// Full enumeration; K <= 8 and side alphabet <= 4.
    Exact,
    /// Genie-aided SC runs averaging `-log2` of the true bit's posterior.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Per-index estimates of `H(A^i | A^{<i}, side)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub k: usize,
    pub values: Vec<f64>,
    pub mode: ProfileMode,
    /// Monte Carlo samples dropped for hitting a zero-probability posterior.
    pub discarded: usize,
}

impl EntropyProfile {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.k as f64
    }

    /// Indices with value strictly above `threshold`.
    pub fn above(&self, threshold: f64) -> Vec<usize> {
        (0..self.k).filter(|&i| self.values[i] > threshold).collect()
    }
}

pub fn entropy_profile(model: &JointModel, k: usize, mode: ProfileMode) -> Result<EntropyProfile, PolarError> {
    check_block_length(k)?;
    match mode {
        ProfileMode::Exact => Ok(EntropyProfile { k, values: exact_profile(model, k)?, mode, discarded: 0 }),
        ProfileMode::MonteCarlo { samples, seed } => {
            if samples < 1000 {
                return Err(PolarError::TooFewSamples(samples));
            }
            if let Some(v) = constant_profile(model) {
                return Ok(EntropyProfile { k, values: vec![v; k], mode, discarded: 0 });
            }
            let chunks = samples.div_ceil(CHUNK);
            let parts: Vec<(Vec<f64>, usize, usize)> = (0..chunks)
                .into_par_iter()
                .map(|c| mc_chunk(model, k, seed, c as u64, CHUNK.min(samples - c * CHUNK)))
                .collect();
            let mut sum = vec![0.0; k];
            let (mut kept, mut discarded) = (0, 0);
            for (s, kp, d) in parts {
                for (a, b) in sum.iter_mut().zip(&s) {
                    *a += b;
                }
                kept += kp;
                discarded += d;
            }
            if discarded as f64 > MAX_DISCARD_RATE * samples as f64 || kept == 0 {
                return Err(PolarError::Discards { discarded, samples });
            }
            let values = sum.into_iter().map(|s| (s / kept as f64).clamp(0.0, 1.0)).collect();
            Ok(EntropyProfile { k, values, mode, discarded })
        }
    }
}

/// Profile shared by every index when each observation leaves the bit
/// uniform (all ones) or determined (all zeros); `G_K` is a bijection, so the
/// transformed bits inherit either property.
fn constant_profile(model: &JointModel) -> Option<f64> {
    let posts: Vec<f64> = model.weights().iter().filter(|w| w[0] + w[1] > 0.0).map(|w| w[0] / (w[0] + w[1])).collect();
    if posts.iter().all(|&p| p == 0.5) {
        Some(1.0)
    } else if posts.iter().all(|&p| p == 0.0 || p == 1.0) {
        Some(0.0)
    } else {
        None
    }
}

fn mc_chunk(model: &JointModel, k: usize, seed: u64, chunk: u64, count: usize) -> (Vec<f64>, usize, usize) {
    let mut coins = RngCoins::stream(seed, chunk);
    let weights = model.weights();
    // Cumulative table over (observation, bit) pairs; the draw counts the
    // entries at or below a uniform variate, which skips zero-mass pairs.
    let mut cum = Vec::with_capacity(2 * weights.len());
    let mut acc = 0.0;
    for w in weights.iter().flatten() {
        acc += w;
        cum.push(acc);
    }
    let last_positive = (0..cum.len()).rev().find(|&i| weights[i >> 1][i & 1] > 0.0).unwrap_or(0);
    let table: Vec<f64> = weights.iter().map(|w| if w[0] + w[1] > 0.0 { w[0] / (w[0] + w[1]) } else { 0.5 }).collect();
    let mut kernel = ScKernel::new(k);
    let mut sum = vec![0.0; k];
    // Per-index running products of posteriors, flushed to `sum` as logs
    // before they underflow.
    let mut prod = vec![1.0f64; k];
    let mut tmp = vec![1.0f64; k];
    let mut a = vec![0u8; k];
    let mut leaf = vec![0.0; k];
    let (mut kept, mut discarded) = (0, 0);
    for _ in 0..count {
        for i in 0..k {
            let u = (coins.rng().gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let idx = cum.iter().filter(|&&c| c <= u).count().min(last_positive);
            a[i] = (idx & 1) as u8;
            leaf[i] = table[idx >> 1];
        }
        transform_in_place(&mut a);
        let mut bad = false;
        kernel.run(&leaf, |i, p0| {
            let b = a[i];
            let p = if b == 0 { p0 } else { 1.0 - p0 };
            if p > 0.0 {
                tmp[i] = p;
                Some(b)
            } else {
                bad = true;
                None
            }
        });
        if bad || kernel.zero_events() > 0 {
            discarded += 1;
            continue;
        }
        kept += 1;
        for ((s, q), &t) in sum.iter_mut().zip(prod.iter_mut()).zip(&tmp) {
            *q *= t;
            if *q < 1e-250 {
                *s -= q.log2();
                *q = 1.0;
            }
        }
    }
    for (s, q) in sum.iter_mut().zip(&prod) {
        *s -= q.log2();
    }
    (sum, kept, discarded)
}

fn exact_profile(model: &JointModel, k: usize) -> Result<Vec<f64>, PolarError> {
    let m = model.alphabet();
    if k > 8 || m > 4 {
        return Err(PolarError::ExactInfeasible { k, alphabet: m });
    }
    // Sequences are indexed with position 0 in the most significant bit so
    // that prefixes are the high bits.
    let to_bits = |v: usize| (0..k).map(|i| ((v >> (k - 1 - i)) & 1) as u8).collect::<Vec<u8>>();
    let perm: Vec<usize> = (0..1usize << k)
        .map(|ui| {
            let mut a = to_bits(ui);
            transform_in_place(&mut a);
            a.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
        })
        .collect();
    let w = model.weights();
    let mut joint = vec![0.0; k + 1];
    let mut law = vec![0.0; 1 << k];
    let mut obs = vec![0usize; k];
    for oi in 0..m.pow(k as u32) {
        let mut rest = oi;
        for o in obs.iter_mut() {
            *o = rest % m;
            rest /= m;
        }
        for (ui, &ai) in perm.iter().enumerate() {
            law[ai] = (0..k).map(|i| w[obs[i]][(ui >> (k - 1 - i)) & 1]).product();
        }
        let mut level = law.clone();
        for i in (0..=k).rev() {
            joint[i] += level.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum::<f64>();
            if i > 0 {
                level = level.chunks_exact(2).map(|c| c[0] + c[1]).collect();
            }
        }
    }
    Ok((0..k).map(|i| (joint[i + 1] - joint[i]).clamp(0.0, 1.0)).collect())
}

pub type ProfileSet = BTreeMap<Role, EntropyProfile>;

/// The six polarized sets, 0-based and sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    pub k: usize,
    pub delta: f64,
    pub v_u: Vec<usize>,
    pub h_u: Vec<usize>,
    pub v_u_y: Vec<usize>,
    pub h_u_y: Vec<usize>,
    pub v_x: Vec<usize>,
    pub v_x_u: Vec<usize>,
    /// Indices moved to restore the subset relations after thresholding.
    pub repairs: usize,
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| b.binary_search(i).is_ok())
}

impl IndexSets {
    /// `H_{U|Y} \ V_{U|Y}` in increasing order.
    pub fn h_minus_v(&self) -> Vec<usize> {
        self.h_u_y.iter().copied().filter(|i| self.v_u_y.binary_search(i).is_err()).collect()
    }

    pub fn check(&self) -> Result<(), String> {
        let pairs = [
            ("V_U|Y in V_U", &self.v_u_y, &self.v_u),
            ("V_U in H_U", &self.v_u, &self.h_u),
            ("V_U|Y in H_U|Y", &self.v_u_y, &self.h_u_y),
            ("H_U|Y in H_U", &self.h_u_y, &self.h_u),
            ("V_X|U in V_X", &self.v_x_u, &self.v_x),
        ];
        for (name, a, b) in pairs {
            if !is_subset(a, b) {
                return Err(format!("subset relation {name} violated"));
            }
        }
        Ok(())
    }
}

pub fn build_index_sets(profiles: &ProfileSet, params: &PolarParams) -> Result<IndexSets, PolarError> {
    let get = |r: Role| profiles.get(&r).ok_or(PolarError::MissingRole(r));
    let (u, uy, x, xu) = (get(Role::U)?, get(Role::UGivenY)?, get(Role::X)?, get(Role::XGivenU)?);
    if [u, uy, x, xu].iter().any(|p| p.k != params.k || p.values.len() != params.k) {
        return Err(PolarError::KMismatch);
    }
    let d = params.delta();
    let mut sets = IndexSets {
        k: params.k,
        delta: d,
        v_u: u.above(1.0 - d),
        h_u: u.above(d),
        v_u_y: uy.above(1.0 - d),
        h_u_y: uy.above(d),
        v_x: x.above(1.0 - d),
        v_x_u: xu.above(1.0 - d),
        repairs: 0,
    };
    let mut repairs = 0;
    let before = sets.v_u_y.len();
    sets.v_u_y.retain(|i| sets.v_u.binary_search(i).is_ok());
    repairs += before - sets.v_u_y.len();
    repairs += merge_into(&mut sets.h_u_y, &sets.v_u_y);
    repairs += merge_into(&mut sets.h_u, &sets.h_u_y);
    let before = sets.v_x_u.len();
    sets.v_x_u.retain(|i| sets.v_x.binary_search(i).is_ok());
    repairs += before - sets.v_x_u.len();
    sets.repairs = repairs;
    debug_assert!(sets.check().is_ok());
    Ok(sets)
}

fn merge_into(dst: &mut Vec<usize>, src: &[usize]) -> usize {
    let before = dst.len();
    dst.extend(src.iter().filter(|i| dst.binary_search(i).is_err()).copied().collect::<Vec<_>>());
    dst.sort_unstable();
    dst.dedup();
    dst.len() - before
}

/// JSON files under one directory, named by the SHA-256 of the canonical
/// JSON form of their key. Writes go through a temporary file and a rename.
#[derive(Clone, Debug)]
pub struct ProfileCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry<K, T> {
    key: K,
    value: T,
}

impl ProfileCache {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self, PolarError> {
        fs::create_dir_all(dir.as_ref()).map_err(|e| PolarError::Cache(e.to_string()))?;
        Ok(ProfileCache { dir: dir.as_ref().to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for<K: Serialize>(&self, kind: &str, key: &K) -> PathBuf {
        let canon = serde_json::to_string(key).expect("cache keys serialize");
        let digest = Sha256::digest(format!("{kind}\n{canon}").as_bytes());
        self.dir.join(format!("{kind}-{}.json", &hex::encode(digest)[..32]))
    }

    pub fn get_or_compute<K, T, F>(&self, kind: &str, key: &K, compute: F) -> Result<T, PolarError>
    where
        K: Serialize + DeserializeOwned + PartialEq,
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, PolarError>,
    {
        let path = self.path_for(kind, key);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(entry) = serde_json::from_str::<CacheEntry<K, T>>(&text) {
                if &entry.key == key {
                    return Ok(entry.value);
                }
            }
        }
        let value = compute()?;
        let entry = CacheEntry { key, value: &value };
        let text = serde_json::to_string(&entry).map_err(|e| PolarError::Cache(e.to_string()))?;
        let io = |e: std::io::Error| PolarError::Cache(e.to_string());
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(text.as_bytes()).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(value)
    }
}

#[derive(Serialize, Deserialize, PartialEq)]
struct ProfileKey {
    model: JointModel,
    k: usize,
    mode: ProfileMode,
}

/// Profile through the cache when one is given.
pub fn cached_profile(
    model: &JointModel,
    k: usize,
    mode: ProfileMode,
    cache: Option<&ProfileCache>,
) -> Result<EntropyProfile, PolarError> {
    match cache {
        None => entropy_profile(model, k, mode),
        Some(c) => {
            let key = ProfileKey { model: model.clone(), k, mode };
            c.get_or_compute("profile", &key, || entropy_profile(model, k, mode))
        }
    }
}

/// Profiles for the four roles of `source` with main channel `main`, and the
/// resulting index sets.
pub fn construct_index_sets(
    source: &SourceSpec,
    main: &Dmc,
    params: &PolarParams,
    mode: ProfileMode,
    cache: Option<&ProfileCache>,
) -> Result<(IndexSets, ProfileSet), PolarError> {
    let models = [
        (Role::U, JointModel::u(source)),
        (Role::UGivenY, JointModel::u_given_y(source, main)),
        (Role::X, JointModel::x(source)),
        (Role::XGivenU, JointModel::x_given_u(source)),
    ];
    let mut profiles = ProfileSet::new();
    for (role, model) in models {
        profiles.insert(role, cached_profile(&model, params.k, mode, cache)?);
    }
    Ok((build_index_sets(&profiles, params)?, profiles))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(k: usize, v: f64) -> EntropyProfile {
        EntropyProfile { k, values: vec![v; k], mode: ProfileMode::Exact, discarded: 0 }
    }

    #[test]
    fn bec_pair_profile() {
        let model = JointModel::u_given_y(&SourceSpec::uniform(), &Dmc::bec(0.5));
        let p = entropy_profile(&model, 2, ProfileMode::Exact).unwrap();
        assert!((p.values[0] - 0.75).abs() < 1e-12 && (p.values[1] - 0.25).abs() < 1e-12, "{:?}", p.values);
    }

    #[test]
    fn bec_erasure_recursion_at_eight() {
        let model = JointModel::u_given_y(&SourceSpec::uniform(), &Dmc::bec(0.3));
        let p = entropy_profile(&model, 8, ProfileMode::Exact).unwrap();
        // Erasure recursion: e -> (2e - e^2, e^2) applied along the index bits.
        let mut z = vec![0.3];
        for _ in 0..3 {
            z = z.iter().flat_map(|&e| [2.0 * e - e * e, e * e]).collect();
        }
        for (a, b) in p.values.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_without_side_info_is_flat() {
        let model = JointModel::u(&SourceSpec::uniform());
        let p = entropy_profile(&model, 8, ProfileMode::Exact).unwrap();
        assert!(p.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let p = entropy_profile(&model, 64, ProfileMode::MonteCarlo { samples: 2000, seed: 1 }).unwrap();
        assert!(p.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn determined_bits_have_zero_profile() {
        let model = JointModel::x_given_u(&SourceSpec::uniform());
        let exact = entropy_profile(&model, 8, ProfileMode::Exact).unwrap();
        assert!(exact.values.iter().all(|&v| v == 0.0));
        let mc = entropy_profile(&model, 1024, ProfileMode::MonteCarlo { samples: 1000, seed: 1 }).unwrap();
        assert!(mc.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let model = JointModel::u(&SourceSpec::identity(0.11).unwrap());
        let exact = entropy_profile(&model, 4, ProfileMode::Exact).unwrap();
        let mc = entropy_profile(&model, 4, ProfileMode::MonteCarlo { samples: 100_000, seed: 7 }).unwrap();
        for (a, b) in exact.values.iter().zip(&mc.values) {
            assert!((a - b).abs() <= 0.02, "{a} vs {b}");
        }
        let sum: f64 = exact.values.iter().sum();
        let h = -(0.11f64 * 0.11f64.log2() + 0.89 * 0.89f64.log2());
        assert!((sum - 4.0 * h).abs() < 1e-10);
    }

    #[test]
    fn infeasible_requests() {
        let model = JointModel::u(&SourceSpec::uniform());
        assert!(matches!(entropy_profile(&model, 16, ProfileMode::Exact), Err(PolarError::ExactInfeasible { .. })));
        let mode = ProfileMode::MonteCarlo { samples: 10, seed: 0 };
        assert_eq!(entropy_profile(&model, 16, mode), Err(PolarError::TooFewSamples(10)));
    }

    #[test]
    fn set_thresholds() {
        let params = PolarParams::new(8, 0.25).unwrap();
        let mut ps = ProfileSet::new();
        ps.insert(Role::U, flat(8, 1.0));
        ps.insert(Role::UGivenY, flat(8, 0.0));
        ps.insert(Role::X, flat(8, 1.0));
        ps.insert(Role::XGivenU, flat(8, 0.0));
        let s = build_index_sets(&ps, &params).unwrap();
        assert_eq!(s.v_u, (0..8).collect::<Vec<_>>());
        assert!(s.h_u_y.is_empty() && s.v_u_y.is_empty());
        ps.remove(&Role::X);
        assert_eq!(build_index_sets(&ps, &params), Err(PolarError::MissingRole(Role::X)));
    }

    #[test]
    fn ties_are_excluded_and_repairs_counted() {
        let params = PolarParams::new(4, 0.25).unwrap();
        let d = params.delta();
        let mut ps = ProfileSet::new();
        ps.insert(Role::U, EntropyProfile { values: vec![1.0, 1.0 - d, 0.5, d], ..flat(4, 0.0) });
        ps.insert(Role::UGivenY, EntropyProfile { values: vec![0.0, 1.0, 0.0, 0.0], ..flat(4, 0.0) });
        ps.insert(Role::X, flat(4, 1.0));
        ps.insert(Role::XGivenU, flat(4, 0.0));
        let s = build_index_sets(&ps, &params).unwrap();
        assert_eq!(s.v_u, vec![0]);
        assert_eq!(s.h_u, vec![0, 1, 2]);
        assert!(s.v_u_y.is_empty());
        assert_eq!(s.h_u_y, vec![1]);
        assert_eq!(s.repairs, 1);
        s.check().unwrap();
    }

    #[test]
    fn cache_round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ProfileCache::new(dir.path()).unwrap();
        let model = JointModel::u_given_y(&SourceSpec::uniform(), &Dmc::bsc(0.11));
        let mode = ProfileMode::MonteCarlo { samples: 1000, seed: 3 };
        let a = cached_profile(&model, 64, mode, Some(&cache)).unwrap();
        let b = cached_profile(&model, 64, mode, Some(&cache)).unwrap();
        let c = entropy_profile(&model, 64, mode).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
