//! Batch driver for the wiretap codes: scenario presets, end-to-end trials,
//! parameter sweeps, the exact leakage checks and a field benchmark.

pub mod config;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wiretap_core::channel::{ChannelFamily, StateGenerator};
use wiretap_core::codec::{
    construct, decode_session, encode_session, init_phase, CodeConfig, CodecError, Derived, Link, RateReport,
};
use wiretap_core::coins::{Coins, EnumerationError, RngCoins};
use wiretap_core::galois::{gf_inv, gf_mul_with, std_modulus, ClmulBackend, GfError};
use wiretap_core::leakage::{check_best_channel, check_leftover, check_sampler_divergence, joint_block_leakage, Check, LeakageError};
use wiretap_core::polar::{PolarError, ProfileCache};

pub use config::{ChannelSpec, ExperimentConfig, Scenario};

/// Environment variable naming the profile cache directory.
pub const CACHE_ENV: &str = "WIRETAP_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Leakage(#[from] LeakageError),
    #[error(transparent)]
    Galois(#[from] GfError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Codec(CodecError::Config(_)) => 2,
            CliError::Codec(CodecError::Polar(PolarError::Beta(_) | PolarError::NotPowerOfTwo(_) | PolarError::RateAboveCapacity { .. })) => 2,
            CliError::Codec(CodecError::Galois(GfError::Unsupported(_))) => 2,
            _ => 1,
        }
    }
}

/// Profile cache from [`CACHE_ENV`], if set.
pub fn cache_from_env() -> Result<Option<ProfileCache>, CliError> {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) => Ok(Some(ProfileCache::new(dir).map_err(|e| CliError::Config(format!("{CACHE_ENV}: {e}")))?)),
        None => Ok(None),
    }
}

/// Builds the code of an experiment.
pub fn build(cfg: &ExperimentConfig, cache: Option<&ProfileCache>) -> Result<(CodeConfig, config::Resolved), CliError> {
    let resolved = cfg.resolve()?;
    let code = construct(&cfg.source, &resolved.family, &resolved.design, cfg.profile, cache)?;
    Ok((code, resolved))
}

/// Failure count with a 95% Wilson interval on the rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub count: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn new(count: usize, trials: usize) -> Self {
        let n = trials as f64;
        let p = count as f64 / n;
        let z = 1.959_964;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        Estimate { count, trials, rate: p, ci_low: (centre - half).max(0.0), ci_high: (centre + half).min(1.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainResult {
    pub main: usize,
    /// Sessions with at least one wrong message.
    pub session_errors: Estimate,
    /// Sessions whose two key copies agree.
    pub key_agreement: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: usize,
    pub r: usize,
    pub key_len: usize,
    pub b0: usize,
    pub derived: Derived,
    pub theoretical_rate: f64,
    pub achieved_rate: f64,
    pub rates: RateReport,
    /// Session error rate over all active main channels.
    pub bler: Option<Estimate>,
    pub key_agreement_rate: Option<Estimate>,
    pub per_main: Vec<MainResult>,
    pub leakage_checks: Vec<Check>,
    /// Why the exact checks were skipped, if they were.
    pub leakage_note: Option<String>,
    pub wall_time: f64,
}

impl RunReport {
    /// The report as JSON without the timing field, byte-identical for
    /// identical configurations and seeds.
    pub fn deterministic_json(&self) -> Result<String, CliError> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("wall_time");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

struct TrialOutcome {
    session_ok: bool,
    key_ok: bool,
}

fn trial(code: &CodeConfig, link: &Link, seed: u64, stream: u64) -> Result<TrialOutcome, CliError> {
    let mut c = RngCoins::stream(seed, stream);
    let (tx, rx, _) = init_phase(code, link, &mut c)?;
    let msgs: Vec<Vec<u8>> = code.message_lens().iter().map(|&n| c.uniform_bits(n)).collect();
    let tr = encode_session(&msgs, &tx, code, link, &mut c)?;
    let decoded = decode_session(&tr.receiver_view(code), &rx, code)?;
    Ok(TrialOutcome { session_ok: decoded == msgs, key_ok: tx.bits == rx.bits })
}

/// Per-trial stream: main index in the high half, trial index in the low.
pub fn trial_stream(main: usize, trial: usize) -> u64 {
    ((main as u64) << 32) | trial as u64
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))
}

/// Outcome of the exact checks, or why they were not run.
pub fn leakage_checks(cfg: &ExperimentConfig, code: &CodeConfig, resolved: &config::Resolved) -> Result<(Vec<Check>, Option<String>), CliError> {
    const MAX_N: usize = 8;
    if code.n() > MAX_N || code.design.b > 3 {
        return Ok((Vec::new(), Some(format!("exact checks need N <= {MAX_N} and B <= 3 (N = {}, B = {})", code.n(), code.design.b))));
    }
    let skip = |e: LeakageError| -> Result<Option<String>, CliError> {
        match e {
            LeakageError::Enumeration(EnumerationError::Overflow { .. } | EnumerationError::TooWide(_)) => Ok(Some(e.to_string())),
            other => Err(other.into()),
        }
    };
    let mut checks = Vec::new();
    let link = &resolved.link;
    let mut note = None;
    match check_sampler_divergence(&cfg.source, &code.sets, code.polar_blocks(), code.design.mode) {
        Ok(c) => checks.push(c),
        Err(e) => note = skip(e)?,
    }
    let per_session = if code.design.b == 1 {
        check_leftover(code, link).map(|r| vec![r.distance, r.information])
    } else {
        joint_block_leakage(code, link).map(|r| std::iter::once(r.structure).chain(r.asymptotic).collect())
    };
    match per_session {
        Ok(c) => checks.extend(c),
        Err(e) => note = skip(e)?,
    }
    if cfg.scenario == Scenario::AvcEve && code.design.b == 1 {
        let best = resolved.family.best_eve_channel().map_err(|e| CliError::Config(e.to_string()))?.expect("declared best channel");
        let best_link = Link {
            family: ChannelFamily { mains: resolved.family.mains.clone(), eves: vec![best], best_eve: None },
            states: StateGenerator::Constant { main: 0, eve: 0 },
            tap: link.tap.clone(),
        };
        match check_best_channel(code, link, &best_link) {
            Ok(c) => checks.push(c),
            Err(e) => note = skip(e)?,
        }
    }
    Ok((checks, note))
}

/// Construct, key generation, trials and (for tiny codes) the exact checks.
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>, cache: Option<&ProfileCache>) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let (code, resolved) = build(cfg, cache)?;
    let mut per_main = Vec::new();
    if cfg.trials > 0 {
        let pool = pool(threads)?;
        for &t in &resolved.mains {
            let link = Link { states: resolved.link.states.with_main(t), ..resolved.link.clone() };
            let outcomes: Vec<TrialOutcome> = pool.install(|| {
                (0..cfg.trials).into_par_iter().map(|i| trial(&code, &link, cfg.seed, trial_stream(t, i))).collect::<Result<_, _>>()
            })?;
            per_main.push(MainResult {
                main: t,
                session_errors: Estimate::new(outcomes.iter().filter(|o| !o.session_ok).count(), cfg.trials),
                key_agreement: Estimate::new(outcomes.iter().filter(|o| o.key_ok).count(), cfg.trials),
            });
        }
    }
    let total = cfg.trials * per_main.len();
    let (bler, key_agreement_rate) = if total > 0 {
        (
            Some(Estimate::new(per_main.iter().map(|m| m.session_errors.count).sum(), total)),
            Some(Estimate::new(per_main.iter().map(|m| m.key_agreement.count).sum(), total)),
        )
    } else {
        (None, None)
    };
    let (leakage_checks, leakage_note) =
        if cfg.leakage { leakage_checks(cfg, &code, &resolved)? } else { (Vec::new(), Some("disabled".into())) };
    Ok(RunReport {
        scenario: cfg.scenario,
        seed: cfg.seed,
        trials: cfg.trials,
        r: code.r,
        key_len: code.key_len,
        b0: code.b0,
        derived: code.derived.clone(),
        theoretical_rate: code.rates.theoretical,
        achieved_rate: code.rates.achieved,
        rates: code.rates.clone(),
        bler,
        key_agreement_rate,
        per_main,
        leakage_checks,
        leakage_note,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    axis: String,
    value: f64,
    theoretical_rate: f64,
    achieved_rate: f64,
    r: usize,
    n: usize,
    b0: usize,
    session_error_rate: Option<f64>,
    session_error_ci_low: Option<f64>,
    session_error_ci_high: Option<f64>,
    key_agreement_rate: Option<f64>,
}

const SWEEP_HEADER: [&str; 11] = [
    "axis",
    "value",
    "theoretical_rate",
    "achieved_rate",
    "r",
    "n",
    "b0",
    "session_error_rate",
    "session_error_ci_low",
    "session_error_ci_high",
    "key_agreement_rate",
];

/// One run per value of `axis`, written as CSV rows under a fixed header.
pub fn sweep<W: Write>(
    base: &ExperimentConfig,
    axis: &str,
    values: &[f64],
    threads: Option<usize>,
    cache: Option<&ProfileCache>,
    out: W,
) -> Result<Vec<RunReport>, CliError> {
    base.clone().set_numeric(axis, 0.0)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    let mut reports = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        cfg.set_numeric(axis, v)?;
        let rep = run(&cfg, threads, cache)?;
        w.serialize(SweepRow {
            axis: axis.to_string(),
            value: v,
            theoretical_rate: rep.theoretical_rate,
            achieved_rate: rep.achieved_rate,
            r: rep.r,
            n: rep.derived.n,
            b0: rep.b0,
            session_error_rate: rep.bler.as_ref().map(|e| e.rate),
            session_error_ci_low: rep.bler.as_ref().map(|e| e.ci_low),
            session_error_ci_high: rep.bler.as_ref().map(|e| e.ci_high),
            key_agreement_rate: rep.key_agreement_rate.as_ref().map(|e| e.rate),
        })?;
        reports.push(rep);
    }
    w.flush()?;
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GfTiming {
    pub n: usize,
    pub modulus: String,
    pub mul_hardware_ns: Option<f64>,
    pub mul_portable_ns: f64,
    pub inv_ns: f64,
}

/// Mean time per multiplication (both carry-less backends) and per inversion.
pub fn bench_gf(degrees: &[usize], reps: usize, seed: u64) -> Result<Vec<GfTiming>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps = reps.max(1);
    degrees
        .iter()
        .map(|&n| {
            let spec = std_modulus(n)?;
            let a: Vec<_> = (0..reps).map(|_| spec.random_nonzero(&mut rng)).collect();
            let b: Vec<_> = (0..reps).map(|_| spec.random(&mut rng)).collect();
            let time_mul = |backend| -> Result<f64, CliError> {
                let t = Instant::now();
                for (x, y) in a.iter().zip(&b) {
                    std::hint::black_box(gf_mul_with(backend, x, y, &spec)?);
                }
                Ok(t.elapsed().as_nanos() as f64 / reps as f64)
            };
            let hardware = match ClmulBackend::detect() {
                ClmulBackend::Hardware => Some(time_mul(ClmulBackend::Hardware)?),
                ClmulBackend::Portable => None,
            };
            let portable = time_mul(ClmulBackend::Portable)?;
            let t = Instant::now();
            for x in &a {
                std::hint::black_box(gf_inv(x, &spec)?);
            }
            let inv_ns = t.elapsed().as_nanos() as f64 / reps as f64;
            Ok(GfTiming { n, modulus: spec.polynomial(), mul_hardware_ns: hardware, mul_portable_ns: portable, inv_ns })
        })
        .collect()
}

/// Writes `text` to `path`, or to stdout without a path.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
