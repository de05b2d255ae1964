//! Arithmetic in GF(2^n) and the truncated-product universal hash.
//!
//! Internally an element is a little-endian vector of 64-bit words in which
//! bit `i` is the coefficient of `x^i`. At every public boundary a bit
//! sequence is read left to right from the coefficient of `x^(n-1)` down to
//! the constant term, and hex strings follow the same order.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("element has {got} bits but the field has degree {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("zero has no multiplicative inverse")]
    NotInvertible,
    #[error("hash seed must be nonzero")]
    ZeroSeed,
    #[error("output length {out_len} exceeds field degree {n}")]
    OutputLength { out_len: usize, n: usize },
    #[error("no standard modulus available for degree {0}")]
    Unsupported(usize),
    #[error("modulus of degree {0} is not irreducible")]
    Reducible(usize),
    #[error("malformed modulus: {0}")]
    BadModulus(String),
    #[error("malformed hex string: {0}")]
    Hex(String),
}

/// Largest degree for which `std_modulus` searches when the table has no entry.
pub const SEARCH_LIMIT: usize = 1 << 15;

const TABLE: &str = include_str!("../assets/moduli.txt");

fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

/// Degree and modulus of a binary extension field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FieldSpecRepr", into = "FieldSpecRepr")]
pub struct FieldSpec {
    n: usize,
    /// Exponents of the modulus in decreasing order, starting with `n`.
    exps: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct FieldSpecRepr {
    n: usize,
    modulus: Vec<usize>,
}

impl TryFrom<FieldSpecRepr> for FieldSpec {
    type Error = GfError;
    fn try_from(r: FieldSpecRepr) -> Result<Self, GfError> {
        let spec = FieldSpec::from_exponents(&r.modulus)?;
        if spec.n != r.n {
            return Err(GfError::BadModulus(format!("degree {} but n = {}", spec.n, r.n)));
        }
        Ok(spec)
    }
}

impl From<FieldSpec> for FieldSpecRepr {
    fn from(s: FieldSpec) -> Self {
        FieldSpecRepr { n: s.n, modulus: s.exps }
    }
}

impl FieldSpec {
    /// Builds a field from the exponents of its modulus, e.g. `[8, 4, 3, 1, 0]`.
    /// Irreducibility is always verified.
    pub fn from_exponents(exps: &[usize]) -> Result<Self, GfError> {
        let spec = Self::unchecked(exps)?;
        if !is_irreducible(&spec.exps) {
            return Err(GfError::Reducible(spec.n));
        }
        Ok(spec)
    }

    /// Builds a field from modulus bits, leftmost bit = coefficient of `x^n`.
    pub fn from_modulus_bits(bits: &[u8]) -> Result<Self, GfError> {
        if bits.len() < 2 || bits[0] != 1 {
            return Err(GfError::BadModulus("top coefficient must be 1".into()));
        }
        let n = bits.len() - 1;
        let exps: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| n - i)
            .collect();
        Self::from_exponents(&exps)
    }

    fn unchecked(exps: &[usize]) -> Result<Self, GfError> {
        let mut e = exps.to_vec();
        e.sort_unstable_by(|a, b| b.cmp(a));
        e.dedup();
        if e.len() != exps.len() {
            return Err(GfError::BadModulus("repeated exponent".into()));
        }
        let n = *e.first().ok_or_else(|| GfError::BadModulus("empty modulus".into()))?;
        if n == 0 {
            return Err(GfError::BadModulus("degree must be positive".into()));
        }
        Ok(FieldSpec { n, exps: e })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn exponents(&self) -> &[usize] {
        &self.exps
    }

    /// Modulus as `n + 1` bits, leftmost = coefficient of `x^n`.
    pub fn modulus_bits(&self) -> Vec<u8> {
        let mut bits = vec![0u8; self.n + 1];
        for &e in &self.exps {
            bits[self.n - e] = 1;
        }
        bits
    }

    /// Human-readable modulus, e.g. `x^8+x^4+x^3+x+1`.
    pub fn polynomial(&self) -> String {
        self.exps
            .iter()
            .map(|&e| match e {
                0 => "1".to_string(),
                1 => "x".to_string(),
                _ => format!("x^{e}"),
            })
            .collect::<Vec<_>>()
            .join("+")
    }

    fn words(&self) -> usize {
        words_for(self.n)
    }

    pub fn zero(&self) -> FieldElem {
        FieldElem { n: self.n, words: vec![0; self.words()] }
    }

    pub fn one(&self) -> FieldElem {
        let mut e = self.zero();
        e.words[0] = 1;
        e
    }

    /// Element from bits, leftmost = coefficient of `x^(n-1)`.
    pub fn element(&self, bits: &[u8]) -> Result<FieldElem, GfError> {
        if bits.len() != self.n {
            return Err(GfError::LengthMismatch { expected: self.n, got: bits.len() });
        }
        let mut e = self.zero();
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                let pos = self.n - 1 - i;
                e.words[pos / 64] |= 1 << (pos % 64);
            }
        }
        Ok(e)
    }

    pub fn from_hex(&self, s: &str) -> Result<FieldElem, GfError> {
        let digits = self.n.div_ceil(4);
        if s.len() != digits {
            return Err(GfError::Hex(format!("expected {digits} digits, got {}", s.len())));
        }
        let mut e = self.zero();
        for (i, c) in s.chars().enumerate() {
            let v = c.to_digit(16).ok_or_else(|| GfError::Hex(s.to_string()))? as u64;
            let shift = 4 * (digits - 1 - i);
            for b in 0..4 {
                if (v >> b) & 1 == 1 {
                    let pos = shift + b;
                    if pos >= self.n {
                        return Err(GfError::Hex(format!("value exceeds degree {}", self.n)));
                    }
                    e.words[pos / 64] |= 1 << (pos % 64);
                }
            }
        }
        Ok(e)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElem {
        let mut e = self.zero();
        for w in e.words.iter_mut() {
            *w = rng.gen();
        }
        e.mask();
        e
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElem {
        loop {
            let e = self.random(rng);
            if !e.is_zero() {
                return e;
            }
        }
    }

    fn check(&self, a: &FieldElem) -> Result<(), GfError> {
        if a.n != self.n {
            return Err(GfError::LengthMismatch { expected: self.n, got: a.n });
        }
        Ok(())
    }

    /// Reduces a polynomial of arbitrary degree modulo the field polynomial.
    fn reduce(&self, mut p: Vec<u64>) -> Vec<u64> {
        let n = self.n;
        if self.exps.len() > 1 && self.exps[1] + 64 <= n {
            self.reduce_sparse(&mut p);
            p.resize(self.words(), 0);
            return p;
        }
        loop {
            let deg = match degree(&p) {
                Some(d) if d >= n => d,
                _ => break,
            };
            let high = shr(&p, n, deg - n + 1);
            clear_from(&mut p, n);
            for &e in &self.exps[1..] {
                xor_shl(&mut p, &high, e);
            }
        }
        p.resize(self.words(), 0);
        p
    }

    /// Word-at-a-time reduction, valid when every non-leading exponent is at
    /// most `n - 64` so that folded words never land on unprocessed ones.
    fn reduce_sparse(&self, p: &mut [u64]) {
        let n = self.n;
        let taps = &self.exps[1..];
        for j in (0..p.len()).rev() {
            let lo = 64 * j;
            if lo + 64 <= n {
                break;
            }
            let w = p[j];
            if w == 0 {
                continue;
            }
            if lo < n {
                let keep = n - lo;
                let high = w >> keep;
                p[j] &= (1u64 << keep) - 1;
                for &e in taps {
                    xor_word_at(p, high, e);
                }
            } else {
                p[j] = 0;
                for &e in taps {
                    xor_word_at(p, w, lo - n + e);
                }
            }
        }
    }
}

fn xor_word_at(p: &mut [u64], w: u64, pos: usize) {
    let (i, b) = (pos / 64, pos % 64);
    p[i] ^= w << b;
    if b != 0 {
        p[i + 1] ^= w >> (64 - b);
    }
}

/// Element of GF(2^n).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldElem {
    n: usize,
    words: Vec<u64>,
}

impl FieldElem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bits with the coefficient of `x^(n-1)` first.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.n)
            .map(|i| {
                let pos = self.n - 1 - i;
                ((self.words[pos / 64] >> (pos % 64)) & 1) as u8
            })
            .collect()
    }

    /// Hex with the most significant nibble first, `ceil(n/4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.n.div_ceil(4);
        let mut s = String::with_capacity(digits);
        for i in (0..digits).rev() {
            let mut v = 0u32;
            for b in 0..4 {
                let pos = 4 * i + b;
                if pos < self.n && (self.words[pos / 64] >> (pos % 64)) & 1 == 1 {
                    v |= 1 << b;
                }
            }
            s.push(std::char::from_digit(v, 16).unwrap());
        }
        s
    }

    pub fn add(&self, other: &FieldElem) -> FieldElem {
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect();
        FieldElem { n: self.n, words }
    }

    fn mask(&mut self) {
        let rem = self.n % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }
}

/// Carry-less multiplication backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClmulBackend {
    Hardware,
    Portable,
}

impl ClmulBackend {
    /// Fastest backend supported by the running CPU.
    pub fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("pclmulqdq") {
                return ClmulBackend::Hardware;
            }
        }
        ClmulBackend::Portable
    }
}

/// Shift-and-XOR carry-less product of two words.
pub fn clmul64_portable(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut b = b;
    let mut r = 0u128;
    while b != 0 {
        r ^= a << b.trailing_zeros();
        b &= b - 1;
    }
    r
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "pclmulqdq,sse2")]
unsafe fn clmul64_hw(a: u64, b: u64) -> u128 {
    use std::arch::x86_64::*;
    let r = _mm_clmulepi64_si128(_mm_set_epi64x(0, a as i64), _mm_set_epi64x(0, b as i64), 0);
    std::mem::transmute::<__m128i, u128>(r)
}

/// Carry-less product of two words using the given backend.
pub fn clmul64(backend: ClmulBackend, a: u64, b: u64) -> u128 {
    match backend {
        #[cfg(target_arch = "x86_64")]
        ClmulBackend::Hardware => unsafe { clmul64_hw(a, b) },
        _ => clmul64_portable(a, b),
    }
}

fn poly_mul_portable(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let p = clmul64_portable(x, y);
            out[i + j] ^= p as u64;
            out[i + j + 1] ^= (p >> 64) as u64;
        }
    }
    out
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "pclmulqdq,sse2")]
unsafe fn poly_mul_hw(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let p = clmul64_hw(x, y);
            out[i + j] ^= p as u64;
            out[i + j + 1] ^= (p >> 64) as u64;
        }
    }
    out
}

/// Carry-less product of two word vectors (no reduction).
pub fn poly_mul(backend: ClmulBackend, a: &[u64], b: &[u64]) -> Vec<u64> {
    match backend {
        #[cfg(target_arch = "x86_64")]
        ClmulBackend::Hardware => unsafe { poly_mul_hw(a, b) },
        _ => poly_mul_portable(a, b),
    }
}

fn backend() -> ClmulBackend {
    static B: OnceLock<ClmulBackend> = OnceLock::new();
    *B.get_or_init(ClmulBackend::detect)
}

/// `a * b mod modulus`.
pub fn gf_mul(a: &FieldElem, b: &FieldElem, spec: &FieldSpec) -> Result<FieldElem, GfError> {
    gf_mul_with(backend(), a, b, spec)
}

/// `gf_mul` with an explicit carry-less backend.
pub fn gf_mul_with(
    backend: ClmulBackend,
    a: &FieldElem,
    b: &FieldElem,
    spec: &FieldSpec,
) -> Result<FieldElem, GfError> {
    spec.check(a)?;
    spec.check(b)?;
    let prod = poly_mul(backend, &a.words, &b.words);
    Ok(FieldElem { n: spec.n, words: spec.reduce(prod) })
}

/// Multiplicative inverse by the binary extended Euclidean algorithm.
pub fn gf_inv(a: &FieldElem, spec: &FieldSpec) -> Result<FieldElem, GfError> {
    spec.check(a)?;
    if a.is_zero() {
        return Err(GfError::NotInvertible);
    }
    let w = words_for(spec.n + 1);
    let mut u = a.words.clone();
    u.resize(w, 0);
    let mut v = vec![0u64; w];
    for &e in &spec.exps {
        v[e / 64] |= 1 << (e % 64);
    }
    let mut g1 = vec![0u64; w];
    g1[0] = 1;
    let mut g2 = vec![0u64; w];
    let mut du = degree(&u).unwrap();
    let mut dv = spec.n;
    while du != 0 {
        if du < dv {
            std::mem::swap(&mut u, &mut v);
            std::mem::swap(&mut g1, &mut g2);
            std::mem::swap(&mut du, &mut dv);
        }
        let j = du - dv;
        xor_shl(&mut u, &v, j);
        xor_shl(&mut g1, &g2, j);
        du = degree(&u).ok_or(GfError::NotInvertible)?;
    }
    Ok(FieldElem { n: spec.n, words: spec.reduce(g1) })
}

/// Leftmost `out_len` bits of `r * t`.
pub fn uh_hash(
    r: &FieldElem,
    t: &FieldElem,
    out_len: usize,
    spec: &FieldSpec,
) -> Result<Vec<u8>, GfError> {
    spec.check(r)?;
    if r.is_zero() {
        return Err(GfError::ZeroSeed);
    }
    if out_len > spec.n {
        return Err(GfError::OutputLength { out_len, n: spec.n });
    }
    let mut bits = gf_mul(r, t, spec)?.to_bits();
    bits.truncate(out_len);
    Ok(bits)
}

/// `r^{-1} * payload`, so that hashing the result with `r` returns the payload.
pub fn hash_preimage(r: &FieldElem, payload: &[u8], spec: &FieldSpec) -> Result<FieldElem, GfError> {
    spec.check(r)?;
    if r.is_zero() {
        return Err(GfError::ZeroSeed);
    }
    let p = spec.element(payload)?;
    gf_mul(&gf_inv(r, spec)?, &p, spec)
}

/// Standard modulus of degree `n`: the lowest-weight irreducible trinomial or
/// pentanomial, first in lexicographic order of its middle exponents.
///
/// Degrees up to 32 are searched and verified by trial division, powers of two
/// come from `assets/moduli.txt`, and any other degree up to [`SEARCH_LIMIT`]
/// is searched with Rabin's irreducibility test.
pub fn std_modulus(n: usize) -> Result<FieldSpec, GfError> {
    static CACHE: OnceLock<Mutex<HashMap<usize, FieldSpec>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().unwrap().get(&n) {
        return Ok(s.clone());
    }
    let spec = if n == 0 {
        return Err(GfError::Unsupported(0));
    } else if n == 1 {
        FieldSpec::unchecked(&[1, 0])?
    } else if let Some(exps) = table_entry(n) {
        FieldSpec::unchecked(&exps)?
    } else if n <= SEARCH_LIMIT {
        FieldSpec::unchecked(&search_low_weight(n).ok_or(GfError::Unsupported(n))?)?
    } else {
        return Err(GfError::Unsupported(n));
    };
    cache.lock().unwrap().insert(n, spec.clone());
    Ok(spec)
}

/// Degrees listed in the shipped modulus table.
pub fn table_degrees() -> Vec<usize> {
    parse_table().into_iter().map(|e| e[0]).collect()
}

fn parse_table() -> Vec<Vec<usize>> {
    TABLE
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|t| t.parse().expect("modulus table")).collect())
        .collect()
}

fn table_entry(n: usize) -> Option<Vec<usize>> {
    parse_table().into_iter().find(|e| e[0] == n)
}

/// Lexicographically first irreducible trinomial, else pentanomial, of degree `n`.
pub fn search_low_weight(n: usize) -> Option<Vec<usize>> {
    let sieve = Sieve::new(n);
    // A trinomial and its reciprocal are irreducible together, and no
    // trinomial of degree divisible by 8 is irreducible (Swan).
    let tri_max = if n % 8 == 0 { 0 } else { n / 2 };
    for k in 1..=tri_max {
        let exps = [n, k, 0];
        if sieve.passes(&exps) && is_irreducible(&exps) {
            return Some(exps.to_vec());
        }
    }
    for a in 3..n {
        for b in 2..a {
            for c in 1..b {
                let exps = [n, a, b, c, 0];
                if sieve.passes(&exps) && is_irreducible(&exps) {
                    return Some(exps.to_vec());
                }
            }
        }
    }
    None
}

/// Cheap rejection of candidates with an irreducible factor of degree at most
/// 12, using the cyclic powers of `x` modulo each small factor.
struct Sieve {
    powers: Vec<Vec<u16>>,
}

impl Sieve {
    fn new(n: usize) -> Self {
        let powers = (2u64..(1 << 13))
            .filter(|&g| g & 1 == 1 && (deg64(g) as usize) < n && irreducible_trial(g))
            .map(|g| {
                let mut cyc = vec![1u16];
                let mut cur = mod64(2, g);
                while cur != 1 {
                    cyc.push(cur as u16);
                    cur = mod64(cur << 1, g);
                }
                cyc
            })
            .collect();
        Sieve { powers }
    }

    fn passes(&self, exps: &[usize]) -> bool {
        self.powers.iter().all(|cyc| {
            let ord = cyc.len();
            exps.iter().fold(0u16, |acc, &e| acc ^ cyc[e % ord]) != 0
        })
    }
}

/// Irreducibility of the polynomial with the given exponents.
pub fn is_irreducible(exps: &[usize]) -> bool {
    let n = match exps.iter().max() {
        Some(&n) if n > 0 => n,
        _ => return false,
    };
    if n <= 32 {
        let mut f = 0u64;
        for &e in exps {
            f ^= 1 << e;
        }
        irreducible_trial(f)
    } else {
        rabin(exps)
    }
}

fn deg64(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn mod64(mut a: u64, m: u64) -> u64 {
    let dm = deg64(m);
    while a != 0 && deg64(a) >= dm {
        a ^= m << (deg64(a) - dm);
    }
    a
}

/// Trial division by every polynomial of degree at most `deg(f)/2`.
fn irreducible_trial(f: u64) -> bool {
    let n = deg64(f);
    if n <= 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    for g in 2u64..(1u64 << (n / 2 + 1)) {
        if mod64(f, g) == 0 {
            return false;
        }
    }
    true
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin's test: `x^(2^n) = x mod f` and `gcd(x^(2^(n/p)) - x, f) = 1` for
/// every prime `p | n`.
fn rabin(exps: &[usize]) -> bool {
    let spec = match FieldSpec::unchecked(exps) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let n = spec.n;
    let w = spec.words();
    let mut f = vec![0u64; words_for(n + 1)];
    for &e in &spec.exps {
        f[e / 64] |= 1 << (e % 64);
    }
    let mut x = vec![0u64; w];
    x[0] = 2;
    let checkpoints: Vec<usize> = prime_factors(n).iter().map(|p| n / p).collect();
    let mut cur = x.clone();
    for i in 1..=n {
        cur = spec.reduce(square(&cur));
        if checkpoints.contains(&i) {
            let mut diff = cur.clone();
            diff[0] ^= 2;
            if degree(&poly_gcd(diff, f.clone())) != Some(0) {
                return false;
            }
        }
    }
    cur == x
}

fn spread(w: u32) -> u64 {
    let mut x = w as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn square(a: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; 2 * a.len()];
    for (i, &w) in a.iter().enumerate() {
        out[2 * i] = spread(w as u32);
        out[2 * i + 1] = spread((w >> 32) as u32);
    }
    out
}

fn poly_gcd(mut a: Vec<u64>, mut b: Vec<u64>) -> Vec<u64> {
    loop {
        let db = match degree(&b) {
            None => return a,
            Some(d) => d,
        };
        while let Some(da) = degree(&a) {
            if da < db {
                break;
            }
            let src = b.clone();
            xor_shl(&mut a, &src, da - db);
        }
        std::mem::swap(&mut a, &mut b);
    }
}

fn degree(p: &[u64]) -> Option<usize> {
    p.iter()
        .enumerate()
        .rev()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| 64 * i + 63 - w.leading_zeros() as usize)
}

/// `dst ^= src << shift`, growing `dst` when needed.
fn xor_shl(dst: &mut Vec<u64>, src: &[u64], shift: usize) {
    let d = match degree(src) {
        Some(d) => d,
        None => return,
    };
    let top = (d + shift) / 64 + 1;
    if dst.len() < top {
        dst.resize(top, 0);
    }
    let ws = shift / 64;
    let bs = shift % 64;
    for (i, &w) in src.iter().enumerate() {
        if w == 0 {
            continue;
        }
        let k = i + ws;
        dst[k] ^= w << bs;
        if bs != 0 && k + 1 < dst.len() {
            dst[k + 1] ^= w >> (64 - bs);
        }
    }
}

/// `p >> shift`, keeping `len_bits` bits.
fn shr(p: &[u64], shift: usize, len_bits: usize) -> Vec<u64> {
    let ws = shift / 64;
    let bs = shift % 64;
    let out_words = words_for(len_bits);
    let mut out = vec![0u64; out_words];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = p.get(i + ws).copied().unwrap_or(0);
        let hi = p.get(i + ws + 1).copied().unwrap_or(0);
        *o = if bs == 0 { lo } else { (lo >> bs) | (hi << (64 - bs)) };
    }
    out
}

fn clear_from(p: &mut [u64], bit: usize) {
    let w = bit / 64;
    if w < p.len() {
        p[w] &= (1u64 << (bit % 64)).wrapping_sub(1);
        for x in p[w + 1..].iter_mut() {
            *x = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    /// Bit-level multiply then long division by the full modulus.
    fn schoolbook(a: &[u8], b: &[u8], modulus: &[u8]) -> Vec<u8> {
        let n = a.len();
        // coefficient arrays indexed by degree
        let ca: Vec<u8> = a.iter().rev().copied().collect();
        let cb: Vec<u8> = b.iter().rev().copied().collect();
        let cm: Vec<u8> = modulus.iter().rev().copied().collect();
        let mut prod = vec![0u8; 2 * n];
        for i in 0..n {
            if ca[i] == 1 {
                for j in 0..n {
                    prod[i + j] ^= cb[j];
                }
            }
        }
        for d in (n..2 * n).rev() {
            if prod[d] == 1 {
                for k in 0..=n {
                    prod[d - n + k] ^= cm[k];
                }
            }
        }
        prod[..n].iter().rev().copied().collect()
    }

    #[test]
    fn gf8_small_examples() {
        let f = std_modulus(3).unwrap();
        assert_eq!(f.polynomial(), "x^3+x+1");
        let x = f.element(&bits("010")).unwrap();
        let x2 = f.element(&bits("100")).unwrap();
        assert_eq!(gf_mul(&x, &x2, &f).unwrap().to_bits(), bits("011"));
        assert_eq!(uh_hash(&x, &x2, 2, &f).unwrap(), bits("01"));
        let p = bits("011");
        let pre = hash_preimage(&x, &p, &f).unwrap();
        let expect = gf_mul(&gf_inv(&x, &f).unwrap(), &f.element(&p).unwrap(), &f).unwrap();
        assert_eq!(pre, expect);
        // inv(x) = x^2 + 1 since x^3 + x = 1
        assert_eq!(gf_inv(&x, &f).unwrap().to_bits(), bits("101"));
    }

    #[test]
    fn moduli_examples() {
        assert_eq!(std_modulus(1).unwrap().polynomial(), "x+1");
        assert_eq!(std_modulus(8).unwrap().polynomial(), "x^8+x^4+x^3+x+1");
        assert_eq!(std_modulus(64).unwrap().polynomial(), "x^64+x^4+x^3+x+1");
        assert_eq!(std_modulus(128).unwrap().polynomial(), "x^128+x^7+x^2+x+1");
        assert!(matches!(std_modulus(0), Err(GfError::Unsupported(0))));
    }

    #[test]
    fn small_moduli_are_irreducible_and_first() {
        for n in 2..=32 {
            let s = std_modulus(n).unwrap();
            assert!(is_irreducible(s.exponents()), "n = {n}");
            assert!(s.exponents().len() <= 5);
        }
        // n = 4: x^4+x+1 is the first trinomial
        assert_eq!(std_modulus(4).unwrap().exponents(), &[4, 1, 0]);
    }

    #[test]
    fn rabin_agrees_with_trial_division() {
        for f in 2u64..(1 << 11) {
            let exps: Vec<usize> = (0..64).filter(|i| (f >> i) & 1 == 1).collect();
            let spec = FieldSpec::unchecked(&exps).unwrap();
            if spec.n < 2 {
                continue;
            }
            assert_eq!(irreducible_trial(f), rabin(&exps), "f = {f:b}");
        }
    }

    #[test]
    fn table_entries_up_to_4096_verify() {
        for n in table_degrees() {
            if n <= 4096 {
                let s = std_modulus(n).unwrap();
                assert!(rabin(s.exponents()), "n = {n}");
            }
        }
    }

    #[test]
    fn inverse_exhaustive_gf256() {
        let f = std_modulus(8).unwrap();
        for v in 1u32..256 {
            let b: Vec<u8> = (0..8).rev().map(|i| ((v >> i) & 1) as u8).collect();
            let a = f.element(&b).unwrap();
            let p = gf_mul(&a, &gf_inv(&a, &f).unwrap(), &f).unwrap();
            assert_eq!(p, f.one());
        }
        assert_eq!(gf_inv(&f.zero(), &f), Err(GfError::NotInvertible));
        assert_eq!(gf_inv(&f.one(), &f).unwrap(), f.one());
    }

    #[test]
    fn matches_schoolbook() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [8usize, 13, 16, 64, 100, 1024] {
            let f = std_modulus(n).unwrap();
            let m = f.modulus_bits();
            for _ in 0..200 {
                let a = f.random(&mut rng);
                let b = f.random(&mut rng);
                let want = schoolbook(&a.to_bits(), &b.to_bits(), &m);
                assert_eq!(gf_mul(&a, &b, &f).unwrap().to_bits(), want, "n = {n}");
            }
        }
    }

    #[test]
    fn backends_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let hw = ClmulBackend::detect();
        for _ in 0..10_000 {
            let (a, b): (u64, u64) = (rng.gen(), rng.gen());
            assert_eq!(clmul64(hw, a, b), clmul64_portable(a, b));
        }
        let f = std_modulus(1024).unwrap();
        for _ in 0..50 {
            let a = f.random(&mut rng);
            let b = f.random(&mut rng);
            assert_eq!(
                gf_mul_with(hw, &a, &b, &f).unwrap(),
                gf_mul_with(ClmulBackend::Portable, &a, &b, &f).unwrap()
            );
        }
    }

    #[test]
    fn hex_round_trip() {
        let f = std_modulus(13).unwrap();
        let a = f.element(&bits("1000000000011")).unwrap();
        assert_eq!(a.to_hex(), "1003");
        assert_eq!(f.from_hex("1003").unwrap(), a);
        assert!(f.from_hex("2003").is_err());
    }

    #[test]
    fn preimage_round_trip_gf65536() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = std_modulus(16).unwrap();
        for _ in 0..10_000 {
            let r = f.random_nonzero(&mut rng);
            let p = f.random(&mut rng).to_bits();
            let t = hash_preimage(&r, &p, &f).unwrap();
            assert_eq!(gf_mul(&r, &t, &f).unwrap().to_bits(), p);
            assert_eq!(uh_hash(&r, &t, 5, &f).unwrap(), p[..5].to_vec());
        }
    }

    #[test]
    fn hash_errors() {
        let f = std_modulus(8).unwrap();
        assert_eq!(uh_hash(&f.zero(), &f.one(), 3, &f), Err(GfError::ZeroSeed));
        assert!(matches!(uh_hash(&f.one(), &f.one(), 9, &f), Err(GfError::OutputLength { .. })));
        let t = f.element(&bits("10110011")).unwrap();
        assert_eq!(uh_hash(&f.one(), &t, 4, &f).unwrap(), bits("1011"));
        let g = std_modulus(9).unwrap();
        assert!(matches!(gf_mul(&t, &g.one(), &g), Err(GfError::LengthMismatch { .. })));
    }

    #[test]
    fn serde_round_trip() {
        let f = std_modulus(64).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: FieldSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(serde_json::from_str::<FieldSpec>(r#"{"n":4,"modulus":[4,2,0]}"#).is_err());
    }

    #[test]
    fn searched_degree_is_irreducible() {
        let s = std_modulus(1000).unwrap();
        assert!(rabin(s.exponents()));
        assert!(s.exponents().len() <= 5);
    }

    proptest::proptest! {
        #[test]
        fn field_laws(seed in 0u64..u64::MAX, which in 0usize..4) {
            let n = [8usize, 16, 64, 1024][which];
            let f = std_modulus(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (f.random(&mut rng), f.random(&mut rng), f.random(&mut rng));
            let ab = gf_mul(&a, &b, &f).unwrap();
            proptest::prop_assert_eq!(&ab, &gf_mul(&b, &a, &f).unwrap());
            let ab_c = gf_mul(&ab, &c, &f).unwrap();
            let a_bc = gf_mul(&a, &gf_mul(&b, &c, &f).unwrap(), &f).unwrap();
            proptest::prop_assert_eq!(&ab_c, &a_bc);
            let lhs = gf_mul(&a, &b.add(&c), &f).unwrap();
            let rhs = ab.add(&gf_mul(&a, &c, &f).unwrap());
            proptest::prop_assert_eq!(lhs, rhs);
            proptest::prop_assert!(gf_mul(&f.zero(), &a, &f).unwrap().is_zero());
            proptest::prop_assert_eq!(gf_mul(&a, &f.one(), &f).unwrap(), a);
        }
    }
}
