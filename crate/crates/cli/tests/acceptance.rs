//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Each criterion also has a wall-clock budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wiretap_cli::{build, run, ChannelSpec, ExperimentConfig, Scenario};
use wiretap_core::channel::{check_degraded, ChannelFamily, Degradation, Dmc, StateGenerator};
use wiretap_core::codec::{construct, encode_session, init_phase, CodeConfig, Design, Link};
use wiretap_core::coins::{Coins, RngCoins};
use wiretap_core::compound::{CompoundSpec, SideSets};
use wiretap_core::galois::{gf_inv, gf_mul, std_modulus, uh_hash, FieldElem, FieldSpec};
use wiretap_core::leakage::{check_best_channel, check_leftover, check_sampler_divergence, joint_block_leakage};
use wiretap_core::polar::{
    construct_index_sets, sc_posterior, transform, transform_packed, unpack, JointModel, PolarParams, ProfileMode,
    SampleMode, SourceSpec,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---- 1. field correctness -------------------------------------------------

/// Degree-indexed words from most-significant-first bits.
fn words(bits: &[u8], len: usize) -> Vec<u64> {
    let mut w = vec![0u64; len.div_ceil(64)];
    for (d, &b) in bits.iter().rev().enumerate() {
        w[d / 64] |= (b as u64) << (d % 64);
    }
    w
}

/// Horner-style shift-and-add multiplication with reduction after every shift.
fn shift_add_mul(a: &FieldElem, b: &FieldElem, spec: &FieldSpec) -> Vec<u8> {
    let n = spec.n();
    let m = words(&spec.modulus_bits(), n + 1);
    let bw = words(&b.to_bits(), n + 1);
    let abits = a.to_bits();
    let mut acc = vec![0u64; m.len()];
    for &bit in &abits {
        let mut carry = 0;
        for w in acc.iter_mut() {
            let next = *w >> 63;
            *w = (*w << 1) | carry;
            carry = next;
        }
        if (acc[n / 64] >> (n % 64)) & 1 == 1 {
            acc.iter_mut().zip(&m).for_each(|(x, y)| *x ^= y);
        }
        if bit == 1 {
            acc.iter_mut().zip(&bw).for_each(|(x, y)| *x ^= y);
        }
    }
    (0..n).rev().map(|d| ((acc[d / 64] >> (d % 64)) & 1) as u8).collect()
}

fn field_correctness() -> Outcome {
    let f8 = std_modulus(8).map_err(e2s)?;
    for v in 1u32..256 {
        let bits: Vec<u8> = (0..8).rev().map(|i| ((v >> i) & 1) as u8).collect();
        let a = f8.element(&bits).map_err(e2s)?;
        let prod = gf_mul(&a, &gf_inv(&a, &f8).map_err(e2s)?, &f8).map_err(e2s)?;
        ensure(prod == f8.one(), || format!("a * a^-1 != 1 for a = {v:#04x}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs = 10_000;
    for n in [8usize, 16, 64, 1024] {
        let spec = std_modulus(n).map_err(e2s)?;
        for i in 0..pairs {
            let (a, b) = (spec.random(&mut rng), spec.random(&mut rng));
            let got = gf_mul(&a, &b, &spec).map_err(e2s)?.to_bits();
            ensure(got == shift_add_mul(&a, &b, &spec), || format!("n = {n}, pair {i}: product differs from oracle"))?;
        }
    }
    Ok(format!("255 inverses in GF(2^8); {pairs} products each at n = 8, 16, 64, 1024; 0 failures"))
}

// ---- 2. two-universality --------------------------------------------------

fn two_universality() -> Outcome {
    let n = 12;
    let spec = std_modulus(n).map_err(e2s)?;
    let elem = |v: u32| spec.element(&(0..n).rev().map(|i| ((v >> i) & 1) as u8).collect::<Vec<_>>());
    let seeds: Vec<FieldElem> = (1u32..1 << n).map(elem).collect::<Result<_, _>>().map_err(e2s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let t = rng.gen_range(0u32..1 << n);
        let t2 = loop {
            let c = rng.gen_range(0u32..1 << n);
            if c != t {
                break c;
            }
        };
        let (t, t2) = (elem(t).map_err(e2s)?, elem(t2).map_err(e2s)?);
        let mut collisions = [0usize; 13];
        for r in &seeds {
            let h = uh_hash(r, &t, n, &spec).map_err(e2s)?;
            let h2 = uh_hash(r, &t2, n, &spec).map_err(e2s)?;
            let agree = h.iter().zip(&h2).take_while(|(a, b)| a == b).count();
            for c in collisions.iter_mut().take(agree + 1).skip(1) {
                *c += 1;
            }
        }
        for (out_len, &c) in collisions.iter().enumerate().skip(1) {
            let p = c as f64 / seeds.len() as f64;
            let bound = (-(out_len as f64)).exp2() * 4096.0 / 4095.0;
            ensure(p <= bound + 1e-15, || format!("out_len {out_len}: collision probability {p} > {bound}"))?;
            worst = worst.max(p / bound);
        }
    }
    Ok(format!("500 pairs x 4095 seeds x out_len 1..=12; worst probability / bound = {worst:.6}"))
}

// ---- 3. polar kernel ------------------------------------------------------

fn random_source(rng: &mut ChaCha8Rng) -> SourceSpec {
    let w: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    SourceSpec::new([[w[0] / s, w[1] / s], [w[2] / s, w[3] / s]]).unwrap()
}

fn random_channel(rng: &mut ChaCha8Rng) -> Dmc {
    let outputs = rng.gen_range(2..=3);
    let rows = (0..2)
        .map(|_| {
            let w: Vec<f64> = (0..outputs).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        })
        .collect();
    Dmc::new(rows).unwrap()
}

/// P(A = a | Y = y) over `a = u G`, indexed by `sum a_i 2^i`, from the source
/// and channel tables directly.
fn transformed_law(source: &SourceSpec, channel: &Dmc, y: &[u8]) -> Vec<f64> {
    let k = y.len();
    let q = source.q();
    let pair = |u: usize, o: u8| q[u][0] * channel.prob(0, o) + q[u][1] * channel.prob(1, o);
    let mut law = vec![0.0; 1 << k];
    for ui in 0..1usize << k {
        let u: Vec<u8> = (0..k).map(|i| ((ui >> i) & 1) as u8).collect();
        let p: f64 = u.iter().zip(y).map(|(&b, &o)| pair(b as usize, o)).product();
        let a = transform(&u).unwrap();
        law[a.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum::<usize>()] += p;
    }
    law
}

fn polar_kernel() -> Outcome {
    let k = 1 << 20;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut spent = Duration::ZERO;
    let mut w = vec![0u64; k / 64];
    for i in 0..1000 {
        rng.fill(&mut w[..]);
        let orig = w.clone();
        let start = Instant::now();
        transform_packed(&mut w, k);
        if i < 2 {
            let bytes = unpack(&orig, k);
            ensure(transform(&bytes).map_err(e2s)? == unpack(&w, k), || "packed and bytewise transforms differ".into())?;
        }
        transform_packed(&mut w, k);
        spent += start.elapsed();
        ensure(w == orig, || format!("vector {i}: transform applied twice is not the identity"))?;
    }
    ensure(spent < Duration::from_secs(5), || format!("involution took {spent:?}"))?;

    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for _ in 0..5 {
        let source = random_source(&mut rng);
        let channel = random_channel(&mut rng);
        let model = JointModel::u_given_y(&source, &channel);
        for k in [2usize, 4, 8] {
            let y: Vec<u8> = (0..k).map(|_| rng.gen_range(0..channel.outputs() as u8)).collect();
            let law = transformed_law(&source, &channel, &y);
            for j in 0..k {
                for pi in 0..1usize << j {
                    let prefix: Vec<u8> = (0..j).map(|i| ((pi >> i) & 1) as u8).collect();
                    let (mut p0, mut tot) = (0.0, 0.0);
                    for (ai, &p) in law.iter().enumerate() {
                        if ai & ((1 << j) - 1) == pi {
                            tot += p;
                            if (ai >> j) & 1 == 0 {
                                p0 += p;
                            }
                        }
                    }
                    let got = sc_posterior(&prefix, Some(&y), j, &model, k).map_err(e2s)?;
                    let err = (got - p0 / tot).abs();
                    ensure(err <= 1e-10, || format!("K = {k}, j = {j}, prefix {prefix:?}: error {err}"))?;
                    worst = worst.max(err);
                    compared += 1;
                }
            }
        }
    }
    Ok(format!("1000 involutions at K = 2^20 in {spent:.2?}; {compared} posteriors, max error {worst:.2e}"))
}

// ---- 4. index-set asymptotics ---------------------------------------------

fn index_set_asymptotics() -> Outcome {
    let k = 1 << 14;
    let params = PolarParams::new(k, 0.1).map_err(e2s)?;
    let mode = ProfileMode::MonteCarlo { samples: 100_000, seed: 4 };
    let (sets, _) = construct_index_sets(&SourceSpec::uniform(), &Dmc::bec(0.4), &params, mode, None).map_err(e2s)?;
    let frac = sets.h_u_y.len() as f64 / k as f64;
    ensure((0.36..=0.44).contains(&frac), || format!("|H_U|Y| / K = {frac}"))?;
    Ok(format!("|H_U|Y| / K = {frac:.4} at K = 2^14"))
}

// ---- 5. distribution approximation ----------------------------------------

fn distribution_approximation() -> Outcome {
    let sources = [
        SourceSpec::identity(0.3).unwrap(),
        SourceSpec::prefixed(0.4, 0.2).unwrap(),
        SourceSpec::new([[0.1, 0.25], [0.4, 0.25]]).unwrap(),
    ];
    let mut lines = Vec::new();
    for k in [4usize, 8] {
        let params = PolarParams::new(k, 0.25).map_err(e2s)?;
        for (i, src) in sources.iter().enumerate() {
            let (sets, _) = construct_index_sets(src, &Dmc::noiseless(), &params, ProfileMode::Exact, None).map_err(e2s)?;
            let c = check_sampler_divergence(src, &sets, 1, SampleMode::Random).map_err(e2s)?;
            ensure(c.pass, || format!("K = {k}, source {i}: divergence {} > bound {}", c.exact_value, c.bound))?;
            lines.push(format!("{:.3e}<={:.3}", c.exact_value, c.bound));
        }
    }
    Ok(format!("6 cases, 0 violations [{}]", lines.join(", ")))
}

// ---- 6. end-to-end reliability --------------------------------------------

fn end_to_end() -> Outcome {
    let mut cfg = ExperimentConfig::new(Scenario::Wyner, 1024);
    cfg.mains = vec![ChannelSpec::Bec(0.1)];
    cfg.eves = vec![ChannelSpec::Bec(0.4)];
    cfg.l = 4;
    cfg.b = 4;
    cfg.beta = 0.45;
    cfg.backoff = 0.15;
    cfg.trials = 200;
    cfg.seed = 6;
    let rep = run(&cfg, None, None).map_err(e2s)?;
    let bler = rep.bler.clone().ok_or("no error estimate")?;
    ensure((rep.theoretical_rate - 0.3).abs() < 1e-9, || format!("theoretical rate {}", rep.theoretical_rate))?;
    ensure(bler.rate <= 0.05, || format!("session error rate {} over {} trials", bler.rate, bler.trials))?;
    ensure(rep.achieved_rate >= 0.10, || format!("achieved rate {}", rep.achieved_rate))?;
    Ok(format!(
        "session errors {}/{} (95% CI [{:.3}, {:.3}]), achieved rate {:.4} vs 0.3, key agreement {:.3}",
        bler.count,
        bler.trials,
        bler.ci_low,
        bler.ci_high,
        rep.achieved_rate,
        rep.key_agreement_rate.map_or(f64::NAN, |e| e.rate)
    ))
}

// ---- 7. rate formulas -----------------------------------------------------

fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// I(U; out) for `out` produced from X by `rows`, by summing the joint table.
fn mutual_info(q: [[f64; 2]; 2], rows: &[Vec<f64>]) -> f64 {
    let outs = rows[0].len();
    let mut joint = vec![0.0; 2 * outs];
    for u in 0..2 {
        for x in 0..2 {
            for o in 0..outs {
                joint[u * outs + o] += q[u][x] * rows[x][o];
            }
        }
    }
    let pu: Vec<f64> = (0..2).map(|u| joint[u * outs..(u + 1) * outs].iter().sum()).collect();
    let po: Vec<f64> = (0..outs).map(|o| joint[o] + joint[outs + o]).collect();
    entropy(&pu) + entropy(&po) - entropy(&joint)
}

fn rate_formulas() -> Outcome {
    let mut out = Vec::new();
    for (taps, alpha) in [(0, 0.0), (2, 0.25), (4, 0.5)] {
        let mut cfg = ExperimentConfig::new(Scenario::Type2, 8);
        cfg.alpha = taps as f64 / 8.0;
        cfg.profile = ProfileMode::Exact;
        cfg.leakage = false;
        let rep = run(&cfg, None, None).map_err(e2s)?;
        ensure((rep.theoretical_rate - (1.0 - alpha)).abs() < 1e-12, || format!("alpha {alpha}: rate {}", rep.theoretical_rate))?;
        ensure(rep.bler.is_none(), || "zero trials must not report an error rate".into())?;
        out.push(format!("{:.2}", rep.theoretical_rate));
    }
    let q = [[0.3, 0.1], [0.15, 0.45]];
    let main = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
    let eve = vec![vec![0.6, 0.4], vec![0.35, 0.65]];
    let mut cfg = ExperimentConfig::new(Scenario::Hybrid, 8);
    cfg.source = SourceSpec::new(q).map_err(e2s)?;
    cfg.mains = vec![ChannelSpec::Table(main.clone())];
    cfg.eves = vec![ChannelSpec::Table(eve.clone())];
    cfg.alpha = 0.125;
    cfg.aux_rate = 0.25;
    cfg.key_len = Some(8);
    cfg.profile = ProfileMode::Exact;
    cfg.leakage = false;
    let rep = run(&cfg, None, None).map_err(e2s)?;
    let identity = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let want = mutual_info(q, &main) - 0.125 * mutual_info(q, &identity) - 0.875 * mutual_info(q, &eve);
    ensure(want > 0.0, || format!("instance has no positive rate: {want}"))?;
    ensure((rep.theoretical_rate - want).abs() < 1e-12, || format!("hybrid rate {} vs direct sum {want}", rep.theoretical_rate))?;
    Ok(format!("type-II rates [{}]; hybrid rate {:.6} = direct sum {want:.6}", out.join(", "), rep.theoretical_rate))
}

// ---- 8. leftover hash -----------------------------------------------------

fn random_tiny_config(rng: &mut ChaCha8Rng) -> Option<(CodeConfig, Link)> {
    let k = if rng.gen_bool(0.5) { 2 } else { 4 };
    let p1 = rng.gen_range(0.2..0.8);
    let source = if rng.gen_bool(0.5) {
        SourceSpec::identity(p1).ok()?
    } else {
        SourceSpec::prefixed(p1, rng.gen_range(0.05..0.3)).ok()?
    };
    let main = if rng.gen_bool(0.5) { Dmc::noiseless() } else { Dmc::bec(rng.gen_range(0.0..0.3)) };
    let eve = match rng.gen_range(0..3) {
        0 => Dmc::pure_noise(),
        1 => Dmc::bsc(rng.gen_range(0.05..0.45)),
        _ => Dmc::bec(rng.gen_range(0.2..0.9)),
    };
    let family = ChannelFamily::single(main, eve);
    let mut d = Design::new(k, 1, 1, 0.3);
    d.alpha = Ratio::new(rng.gen_range(0..=k as u64 / 2), k as u64);
    d.key_len = Some(k);
    if rng.gen_bool(0.5) {
        d.r = Some(rng.gen_range(1..=k));
    }
    let cfg = construct(&source, &family, &d, ProfileMode::Exact, None).ok()?;
    Some((cfg, Link::new(family)))
}

fn leftover_hash() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut done, mut drawn, mut worst) = (0, 0, 0.0f64);
    while done < 50 {
        drawn += 1;
        ensure(drawn <= 1000, || format!("only {done} constructible configurations in 1000 draws"))?;
        let Some((cfg, link)) = random_tiny_config(&mut rng) else { continue };
        let rep = check_leftover(&cfg, &link).map_err(e2s)?;
        ensure(rep.distance.pass, || format!("config {done}: distance {} > {}", rep.distance.exact_value, rep.distance.bound))?;
        ensure(rep.information.pass, || {
            format!("config {done}: leakage {} > {}", rep.information.exact_value, rep.information.bound)
        })?;
        if rep.distance.bound > 0.0 {
            worst = worst.max(rep.distance.exact_value / rep.distance.bound);
        }
        done += 1;
    }
    Ok(format!("50/50 configurations ({drawn} drawn) satisfy both bounds; worst distance / bound = {worst:.4}"))
}

// ---- 9. joint-block structure ---------------------------------------------

fn joint_block_structure() -> Outcome {
    let cases = [
        (Dmc::bec(0.1), Dmc::bsc(0.2), Ratio::from_integer(0), Some(2)),
        (Dmc::noiseless(), Dmc::bsc(0.25), Ratio::new(1, 2), None),
        (Dmc::bsc(0.05), Dmc::bec(0.5), Ratio::from_integer(0), Some(1)),
    ];
    let mut lines = Vec::new();
    for (main, eve, alpha, r) in cases {
        let family = ChannelFamily::single(main, eve);
        let mut d = Design::new(2, 1, 2, 0.3);
        d.alpha = alpha;
        d.r = r;
        d.key_len = Some(2);
        let cfg = construct(&SourceSpec::uniform(), &family, &d, ProfileMode::Exact, None).map_err(e2s)?;
        let rep = joint_block_leakage(&cfg, &Link::new(family)).map_err(e2s)?;
        let sum: f64 = rep.per_block.iter().sum();
        ensure(rep.structure.pass, || format!("joint {} > 2 x {sum}", rep.joint))?;
        lines.push(format!("{:.4}<=2x{:.4}", rep.joint, sum));
    }
    Ok(format!("B = 2: joint <= 2 x sum of per-block [{}]", lines.join(", ")))
}

// ---- 10. compound codes ---------------------------------------------------

/// Largest input length enumerated in full.
const MAX_EXHAUSTIVE_BITS: usize = 16;

fn css_exhaustive() -> Result<(usize, usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = JointModel::u_given_y(&SourceSpec::uniform(), &Dmc::noiseless());
    let (mut specs, mut inputs, mut skipped) = (0, 0, 0);
    for k in [2usize, 4, 8] {
        for mults in [vec![1], vec![1, 1], vec![1, 2], vec![1, 1, 1], vec![1, 2, 2], vec![1, 2, 3]] {
            for _ in 0..6 {
                let sets: Vec<SideSets> = mults
                    .iter()
                    .map(|_| {
                        let h: Vec<usize> = (0..k).filter(|_| rng.gen_bool(0.6)).collect();
                        let v = h.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                        SideSets::new(v, h)
                    })
                    .collect();
                let spec = CompoundSpec::new(k, mults.clone(), sets, vec![model.clone(); mults.len()]).map_err(e2s)?;
                let len = spec.input_len();
                if len > MAX_EXHAUSTIVE_BITS {
                    skipped += 1;
                    continue;
                }
                for v in 0u64..1 << len {
                    let u: Vec<u8> = (0..len).map(|i| ((v >> i) & 1) as u8).collect();
                    let code = spec.css_encode(&u).map_err(e2s)?;
                    for j in 1..=spec.j() {
                        ensure(spec.css_decode(j, &u, &code).map_err(e2s)? == u, || {
                            format!("K = {k}, multipliers {mults:?}, decoder {j}: input {v:#x} not recovered")
                        })?;
                    }
                    inputs += 1;
                }
                specs += 1;
            }
        }
    }
    Ok((specs, inputs, skipped))
}

fn single_main_regression() -> Result<usize, String> {
    let mut compared = 0;
    for (k, mode) in [(8, ProfileMode::Exact), (256, ProfileMode::MonteCarlo { samples: 2000, seed: 10 })] {
        let family = ChannelFamily::single(Dmc::bec(0.3), Dmc::bsc(0.2));
        let mut design = Design::new(k, 2, 2, 0.3);
        design.key_len = Some(2 * k);
        design.aux_rate = 0.25;
        let plain = construct(&SourceSpec::uniform(), &family, &design, mode, None).map_err(e2s)?;
        design.multipliers = Some(vec![1]);
        let chained = construct(&SourceSpec::uniform(), &family, &design, mode, None).map_err(e2s)?;
        let link = Link::new(family);
        for seed in 0..5 {
            let transcript = |cfg: &CodeConfig| -> Result<String, String> {
                let mut c = RngCoins::stream(seed, 0);
                let (tx, _, init) = init_phase(cfg, &link, &mut c).map_err(e2s)?;
                let msgs: Vec<Vec<u8>> = cfg.message_lens().iter().map(|&n| c.uniform_bits(n)).collect();
                let tr = encode_session(&msgs, &tx, cfg, &link, &mut c).map_err(e2s)?;
                Ok(serde_json::to_string(&init).map_err(e2s)? + &serde_json::to_string(&tr).map_err(e2s)?)
            };
            ensure(transcript(&plain)? == transcript(&chained)?, || format!("K = {k}, seed {seed}: transcripts differ"))?;
            compared += 1;
        }
    }
    Ok(compared)
}

fn compound_codes() -> Outcome {
    let start = Instant::now();
    let (specs, inputs, skipped) = css_exhaustive()?;
    let css_time = start.elapsed();
    ensure(css_time < Duration::from_secs(60), || format!("exhaustive round trip took {css_time:?}"))?;

    let mut cfg = ExperimentConfig::new(Scenario::Compound, 1024);
    cfg.mains = vec![ChannelSpec::Bec(0.1), ChannelSpec::Bsc(0.05)];
    cfg.eves = vec![ChannelSpec::Bec(0.6)];
    cfg.multipliers = Some(vec![1, 2]);
    cfg.l = 4;
    cfg.b = 2;
    cfg.beta = 0.45;
    cfg.backoff = 0.15;
    cfg.aux_rate = 0.25;
    cfg.profile = ProfileMode::MonteCarlo { samples: 100_000, seed: 1 };
    cfg.trials = 100;
    cfg.seed = 10;
    let rep = run(&cfg, None, None).map_err(e2s)?;
    ensure(rep.per_main.len() == 2, || format!("{} mains reported", rep.per_main.len()))?;
    let mut per_main = Vec::new();
    for m in &rep.per_main {
        let ok = 1.0 - m.session_errors.rate;
        ensure(ok >= 0.95, || format!("main {}: success rate {ok}", m.main))?;
        per_main.push(format!("main {} {:.2}", m.main, ok));
    }

    let compared = single_main_regression()?;
    Ok(format!(
        "{specs} specs / {inputs} inputs round-trip in {css_time:.1?} ({skipped} specs over {MAX_EXHAUSTIVE_BITS} input bits skipped); noisy J = 2 success [{}] at rate {:.4}; {compared} single-main transcripts identical",
        per_main.join(", "),
        rep.achieved_rate
    ))
}

// ---- 11. varying eavesdropper ---------------------------------------------

fn varying_eavesdropper() -> Outcome {
    let eves = vec![Dmc::bec(0.3), Dmc::bec(0.5)];
    let family = ChannelFamily::new(vec![Dmc::noiseless()], eves.clone()).map_err(e2s)?;
    let Degradation::Certified(maps) = check_degraded(&family, &[1.0, 0.0]).map_err(e2s)? else {
        return Err("no certificate for BEC(0.3)".into());
    };
    ensure(matches!(check_degraded(&family, &[0.0, 1.0]).map_err(e2s)?, Degradation::Refused { .. }), || {
        "BEC(0.5) certified as best".into()
    })?;

    let mut cfg = ExperimentConfig::new(Scenario::AvcEve, 4);
    cfg.mains = vec![ChannelSpec::Noiseless];
    cfg.eves = vec![ChannelSpec::Bec(0.3), ChannelSpec::Bec(0.5)];
    cfg.best_eve = Some(vec![1.0, 0.0]);
    cfg.profile = ProfileMode::Exact;
    cfg.r = Some(2);
    cfg.key_len = Some(4);
    let (code, resolved) = build(&cfg, None).map_err(e2s)?;
    let best = resolved.family.best_eve_channel().map_err(e2s)?.ok_or("no best channel")?;
    ensure(best == eves[0], || format!("best channel {best:?}"))?;
    let states = resolved.link.states.generate(8, &mut RngCoins::stream(11, 0)).map_err(e2s)?;
    ensure(states.eve == [0, 1, 0, 1, 0, 1, 0, 1], || format!("state sequence {:?}", states.eve))?;

    let best_link = Link {
        family: ChannelFamily::single(Dmc::noiseless(), best),
        states: StateGenerator::Constant { main: 0, eve: 0 },
        tap: resolved.link.tap.clone(),
    };
    let mut lines = Vec::new();
    for (k, r) in [(4, 2), (4, 3), (2, 1)] {
        let (code, link) = if k == 4 && r == 2 {
            (code.clone(), resolved.link.clone())
        } else {
            let mut c = cfg.clone();
            c.k = k;
            c.r = Some(r);
            c.key_len = Some(k);
            let (code, res) = build(&c, None).map_err(e2s)?;
            (code, res.link)
        };
        let c = check_best_channel(&code, &link, &best_link).map_err(e2s)?;
        ensure(c.pass, || format!("K = {k}, r = {r}: mixed {} > best {}", c.exact_value, c.bound))?;
        lines.push(format!("{:.4}<={:.4}", c.exact_value, c.bound));
    }
    Ok(format!("certificate with {} maps; alternating states; leakage mixed <= best [{}]", maps.len(), lines.join(", ")))
}

// ---- driver ---------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(u8, &str, u64, fn() -> Outcome); 11] = [
        (1, "field correctness", 10, field_correctness),
        (2, "two-universality", 60, two_universality),
        (3, "polar kernel", 60, polar_kernel),
        (4, "index-set asymptotics", 300, index_set_asymptotics),
        (5, "distribution approximation", 60, distribution_approximation),
        (6, "end-to-end reliability", 600, end_to_end),
        (7, "rate formulas", 1, rate_formulas),
        (8, "leftover hash", 600, leftover_hash),
        (9, "joint-block structure", 600, joint_block_structure),
        (10, "compound codes", 900, compound_codes),
        (11, "varying eavesdropper", 600, varying_eavesdropper),
    ];
    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= Duration::from_secs(budget) {
                Ok(msg)
            } else {
                Err(format!("over budget ({elapsed:.1?} > {budget} s): {msg}"))
            }
        });
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {id:>2} {tag} {name} [{elapsed:.1?}]: {msg}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
