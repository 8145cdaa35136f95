//! ML-DSA (FIPS 204), pure variant with context strings, all three
//! parameter sets.
//!
//! Coefficients are kept reduced in `[0, q)`; signed views are computed where
//! norms and packing need them.

use alloc::vec;
use alloc::vec::Vec;

use sha3::digest::XofReader;

use super::hash::{shake128_reader, shake256, shake256_reader};
use super::{CryptoError, Result};

const N: usize = 256;
const Q: i32 = 8_380_417;
const D: u32 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    pub name: &'static str,
    k: usize,
    l: usize,
    eta: i32,
    tau: usize,
    beta: i32,
    gamma1: i32,
    gamma2: i32,
    omega: usize,
    lambda: usize,
}

pub const ML_DSA_44: Params = Params {
    name: "ML-DSA-44",
    k: 4,
    l: 4,
    eta: 2,
    tau: 39,
    beta: 78,
    gamma1: 1 << 17,
    gamma2: (Q - 1) / 88,
    omega: 80,
    lambda: 128,
};

pub const ML_DSA_65: Params = Params {
    name: "ML-DSA-65",
    k: 6,
    l: 5,
    eta: 4,
    tau: 49,
    beta: 196,
    gamma1: 1 << 19,
    gamma2: (Q - 1) / 32,
    omega: 55,
    lambda: 192,
};

pub const ML_DSA_87: Params = Params {
    name: "ML-DSA-87",
    k: 8,
    l: 7,
    eta: 2,
    tau: 60,
    beta: 120,
    gamma1: 1 << 19,
    gamma2: (Q - 1) / 32,
    omega: 75,
    lambda: 256,
};

const fn bitlen(x: u32) -> u32 {
    32 - x.leading_zeros()
}

impl Params {
    pub fn by_name(name: &str) -> Option<Params> {
        [ML_DSA_44, ML_DSA_65, ML_DSA_87]
            .into_iter()
            .find(|p| p.name == name)
    }

    fn eta_bits(&self) -> u32 {
        bitlen(2 * self.eta as u32)
    }

    fn z_bits(&self) -> u32 {
        1 + bitlen(self.gamma1 as u32 - 1)
    }

    fn w1_bits(&self) -> u32 {
        bitlen(((Q - 1) / (2 * self.gamma2) - 1) as u32)
    }

    fn ctilde_len(&self) -> usize {
        self.lambda / 4
    }

    pub fn public_key_len(&self) -> usize {
        32 + 320 * self.k
    }

    pub fn secret_key_len(&self) -> usize {
        128 + 32 * (self.k + self.l) * self.eta_bits() as usize + 416 * self.k
    }

    pub fn signature_len(&self) -> usize {
        self.ctilde_len() + self.l * 32 * self.z_bits() as usize + self.omega + self.k
    }
}

type Poly = [i32; N];
type PolyVec = Vec<Poly>;

const fn bitrev8(x: usize) -> usize {
    let mut r = 0;
    let mut i = 0;
    while i < 8 {
        r |= ((x >> i) & 1) << (7 - i);
        i += 1;
    }
    r
}

const ZETAS: [i32; N] = {
    let mut z = [0i32; N];
    let mut k = 0;
    while k < N {
        let mut acc: i64 = 1;
        let mut e = bitrev8(k);
        let mut b: i64 = 1753;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % Q as i64;
            }
            b = b * b % Q as i64;
            e >>= 1;
        }
        z[k] = acc as i32;
        k += 1;
    }
    z
};

#[inline]
fn red(a: i64) -> i32 {
    a.rem_euclid(Q as i64) as i32
}

#[inline]
fn mulq(a: i32, b: i32) -> i32 {
    red(a as i64 * b as i64)
}

/// Centered representative of a coefficient in `(-q/2, q/2]`.
#[inline]
fn centered(c: i32) -> i32 {
    if c > (Q - 1) / 2 {
        c - Q
    } else {
        c
    }
}

fn ntt(w: &mut Poly) {
    let mut m = 0;
    let mut len = 128;
    while len >= 1 {
        let mut start = 0;
        while start < N {
            m += 1;
            let z = ZETAS[m];
            for j in start..start + len {
                let t = mulq(z, w[j + len]);
                w[j + len] = red(w[j] as i64 - t as i64);
                w[j] = red(w[j] as i64 + t as i64);
            }
            start += 2 * len;
        }
        len /= 2;
    }
}

fn ntt_inv(w: &mut Poly) {
    let mut m = N;
    let mut len = 1;
    while len < N {
        let mut start = 0;
        while start < N {
            m -= 1;
            let z = Q - ZETAS[m];
            for j in start..start + len {
                let t = w[j];
                w[j] = red(t as i64 + w[j + len] as i64);
                w[j + len] = mulq(z, red(t as i64 - w[j + len] as i64));
            }
            start += 2 * len;
        }
        len *= 2;
    }
    for c in w.iter_mut() {
        *c = mulq(*c, 8_347_681);
    }
}

fn pointwise(a: &Poly, b: &Poly) -> Poly {
    let mut r = [0i32; N];
    for i in 0..N {
        r[i] = mulq(a[i], b[i]);
    }
    r
}

fn add(a: &Poly, b: &Poly) -> Poly {
    let mut r = [0i32; N];
    for i in 0..N {
        r[i] = red(a[i] as i64 + b[i] as i64);
    }
    r
}

fn sub(a: &Poly, b: &Poly) -> Poly {
    let mut r = [0i32; N];
    for i in 0..N {
        r[i] = red(a[i] as i64 - b[i] as i64);
    }
    r
}

fn ntt_vec(v: &PolyVec) -> PolyVec {
    v.iter()
        .map(|p| {
            let mut p = *p;
            ntt(&mut p);
            p
        })
        .collect()
}

/// `A_hat * v_hat`, result converted back out of the NTT domain.
fn mat_mul(a: &[PolyVec], v_hat: &PolyVec) -> PolyVec {
    a.iter()
        .map(|row| {
            let mut acc = [0i32; N];
            for (aij, vj) in row.iter().zip(v_hat) {
                acc = add(&acc, &pointwise(aij, vj));
            }
            ntt_inv(&mut acc);
            acc
        })
        .collect()
}

fn scale_vec(c_hat: &Poly, v_hat: &PolyVec) -> PolyVec {
    v_hat
        .iter()
        .map(|p| {
            let mut r = pointwise(c_hat, p);
            ntt_inv(&mut r);
            r
        })
        .collect()
}

fn inf_norm(v: &PolyVec) -> i32 {
    v.iter()
        .flat_map(|p| p.iter())
        .map(|&c| centered(c).abs())
        .max()
        .unwrap_or(0)
}

fn pack_bits(values: impl Iterator<Item = u32>, bits: u32, out: &mut Vec<u8>) {
    let mut acc: u64 = 0;
    let mut n = 0u32;
    for v in values {
        acc |= (v as u64) << n;
        n += bits;
        while n >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            n -= 8;
        }
    }
    debug_assert_eq!(n, 0);
}

fn unpack_bits(bytes: &[u8], bits: u32) -> [u32; N] {
    let mut out = [0u32; N];
    let mask = (1u64 << bits) - 1;
    let mut acc: u64 = 0;
    let mut n = 0u32;
    let mut idx = 0;
    for o in out.iter_mut() {
        while n < bits {
            acc |= (bytes[idx] as u64) << n;
            idx += 1;
            n += 8;
        }
        *o = (acc & mask) as u32;
        acc >>= bits;
        n -= bits;
    }
    out
}

/// Packs `b - w_i` for coefficients in `[-a, b]`.
fn bit_pack(w: &Poly, b: i32, bits: u32, out: &mut Vec<u8>) {
    pack_bits(w.iter().map(|&c| (b - centered(c)) as u32), bits, out);
}

fn bit_unpack(bytes: &[u8], b: i32, bits: u32) -> Poly {
    let raw = unpack_bits(bytes, bits);
    let mut w = [0i32; N];
    for i in 0..N {
        w[i] = red(b as i64 - raw[i] as i64);
    }
    w
}

fn rej_ntt_poly(rho: &[u8], s: u8, r: u8) -> Poly {
    let mut xof = shake128_reader(&[rho, &[s, r]]);
    let mut a = [0i32; N];
    let mut j = 0;
    let mut buf = [0u8; 3];
    while j < N {
        xof.read(&mut buf);
        let z = buf[0] as i32 | (buf[1] as i32) << 8 | ((buf[2] & 0x7f) as i32) << 16;
        if z < Q {
            a[j] = z;
            j += 1;
        }
    }
    a
}

fn coef_from_half_byte(eta: i32, b: u8) -> Option<i32> {
    match eta {
        2 if b < 15 => Some(2 - (b % 5) as i32),
        4 if b < 9 => Some(4 - b as i32),
        _ => None,
    }
}

fn rej_bounded_poly(eta: i32, rho: &[u8], nonce: u16) -> Poly {
    let mut xof = shake256_reader(&[rho, &nonce.to_le_bytes()]);
    let mut a = [0i32; N];
    let mut j = 0;
    let mut byte = [0u8; 1];
    while j < N {
        xof.read(&mut byte);
        for half in [byte[0] & 0x0f, byte[0] >> 4] {
            if j < N {
                if let Some(c) = coef_from_half_byte(eta, half) {
                    a[j] = red(c as i64);
                    j += 1;
                }
            }
        }
    }
    a
}

fn expand_a(p: &Params, rho: &[u8]) -> Vec<PolyVec> {
    (0..p.k)
        .map(|r| {
            (0..p.l)
                .map(|s| rej_ntt_poly(rho, s as u8, r as u8))
                .collect()
        })
        .collect()
}

fn expand_s(p: &Params, rho_prime: &[u8]) -> (PolyVec, PolyVec) {
    let s1 = (0..p.l)
        .map(|r| rej_bounded_poly(p.eta, rho_prime, r as u16))
        .collect();
    let s2 = (0..p.k)
        .map(|r| rej_bounded_poly(p.eta, rho_prime, (r + p.l) as u16))
        .collect();
    (s1, s2)
}

fn expand_mask(p: &Params, rho: &[u8], kappa: u16) -> PolyVec {
    let bits = p.z_bits();
    (0..p.l)
        .map(|r| {
            let v = shake256(
                &[rho, &(kappa + r as u16).to_le_bytes()],
                32 * bits as usize,
            );
            bit_unpack(&v, p.gamma1, bits)
        })
        .collect()
}

fn sample_in_ball(p: &Params, seed: &[u8]) -> Poly {
    let mut xof = shake256_reader(&[seed]);
    let mut s = [0u8; 8];
    xof.read(&mut s);
    let signs = u64::from_le_bytes(s);
    let mut c = [0i32; N];
    let mut byte = [0u8; 1];
    for i in (N - p.tau)..N {
        let j = loop {
            xof.read(&mut byte);
            if byte[0] as usize <= i {
                break byte[0] as usize;
            }
        };
        c[i] = c[j];
        c[j] = if (signs >> (i + p.tau - N)) & 1 == 1 {
            Q - 1
        } else {
            1
        };
    }
    c
}

fn power2round(r: i32) -> (i32, i32) {
    let half = 1 << (D - 1);
    let mut r0 = r & ((1 << D) - 1);
    if r0 > half {
        r0 -= 1 << D;
    }
    ((r - r0) >> D, r0)
}

fn decompose(p: &Params, r: i32) -> (i32, i32) {
    let alpha = 2 * p.gamma2;
    let mut r0 = r % alpha;
    if r0 > alpha / 2 {
        r0 -= alpha;
    }
    if r - r0 == Q - 1 {
        (0, r0 - 1)
    } else {
        ((r - r0) / alpha, r0)
    }
}

fn high_bits(p: &Params, r: i32) -> i32 {
    decompose(p, r).0
}

fn low_bits(p: &Params, r: i32) -> i32 {
    decompose(p, r).1
}

fn use_hint(p: &Params, h: bool, r: i32) -> i32 {
    let m = (Q - 1) / (2 * p.gamma2);
    let (r1, r0) = decompose(p, r);
    match (h, r0 > 0) {
        (true, true) => (r1 + 1) % m,
        (true, false) => (r1 - 1).rem_euclid(m),
        _ => r1,
    }
}

fn w1_encode(p: &Params, w1: &[[i32; N]]) -> Vec<u8> {
    let mut out = Vec::new();
    for poly in w1 {
        pack_bits(poly.iter().map(|&c| c as u32), p.w1_bits(), &mut out);
    }
    out
}

fn hint_unpack(p: &Params, y: &[u8]) -> Option<Vec<[bool; N]>> {
    let mut h = vec![[false; N]; p.k];
    let mut index = 0usize;
    for (i, hi) in h.iter_mut().enumerate() {
        let limit = y[p.omega + i] as usize;
        if limit < index || limit > p.omega {
            return None;
        }
        let first = index;
        while index < limit {
            if index > first && y[index - 1] >= y[index] {
                return None;
            }
            hi[y[index] as usize] = true;
            index += 1;
        }
    }
    if y[index..p.omega].iter().any(|&b| b != 0) {
        return None;
    }
    Some(h)
}

/// Key generation from the 32-byte seed `xi`.
pub fn keygen(p: &Params, xi: &[u8; 32]) -> (Vec<u8>, Vec<u8>) {
    let h = shake256(&[xi, &[p.k as u8, p.l as u8]], 128);
    let (rho, rest) = h.split_at(32);
    let (rho_prime, key) = rest.split_at(64);
    let a_hat = expand_a(p, rho);
    let (s1, s2) = expand_s(p, rho_prime);
    let as1 = mat_mul(&a_hat, &ntt_vec(&s1));
    let t: PolyVec = as1.iter().zip(&s2).map(|(a, b)| add(a, b)).collect();

    let mut t1 = Vec::with_capacity(p.k);
    let mut t0 = Vec::with_capacity(p.k);
    for poly in &t {
        let mut hi = [0i32; N];
        let mut lo = [0i32; N];
        for i in 0..N {
            let (a, b) = power2round(poly[i]);
            hi[i] = a;
            lo[i] = red(b as i64);
        }
        t1.push(hi);
        t0.push(lo);
    }

    let mut pk = Vec::with_capacity(p.public_key_len());
    pk.extend_from_slice(rho);
    for poly in &t1 {
        pack_bits(poly.iter().map(|&c| c as u32), 10, &mut pk);
    }
    let tr = shake256(&[&pk], 64);

    let mut sk = Vec::with_capacity(p.secret_key_len());
    sk.extend_from_slice(rho);
    sk.extend_from_slice(key);
    sk.extend_from_slice(&tr);
    for poly in s1.iter().chain(&s2) {
        bit_pack(poly, p.eta, p.eta_bits(), &mut sk);
    }
    for poly in &t0 {
        bit_pack(poly, 1 << (D - 1), D, &mut sk);
    }
    (pk, sk)
}

struct SecretKey {
    rho: [u8; 32],
    key: [u8; 32],
    tr: [u8; 64],
    s1: PolyVec,
    s2: PolyVec,
    t0: PolyVec,
}

fn decode_sk(p: &Params, sk: &[u8]) -> SecretKey {
    let mut rho = [0u8; 32];
    let mut key = [0u8; 32];
    let mut tr = [0u8; 64];
    rho.copy_from_slice(&sk[..32]);
    key.copy_from_slice(&sk[32..64]);
    tr.copy_from_slice(&sk[64..128]);
    let eb = 32 * p.eta_bits() as usize;
    let mut off = 128;
    let mut take = |count: usize, width: usize, b: i32, bits: u32| -> PolyVec {
        (0..count)
            .map(|_| {
                let poly = bit_unpack(&sk[off..off + width], b, bits);
                off += width;
                poly
            })
            .collect()
    };
    let s1 = take(p.l, eb, p.eta, p.eta_bits());
    let s2 = take(p.k, eb, p.eta, p.eta_bits());
    let t0 = take(p.k, 32 * D as usize, 1 << (D - 1), D);
    SecretKey {
        rho,
        key,
        tr,
        s1,
        s2,
        t0,
    }
}

/// Signs the already-formatted message `M'` with explicit randomness.
pub fn sign_internal(p: &Params, sk: &[u8], m_prime: &[u8], rnd: &[u8; 32]) -> Vec<u8> {
    let sk = decode_sk(p, sk);
    let s1_hat = ntt_vec(&sk.s1);
    let s2_hat = ntt_vec(&sk.s2);
    let t0_hat = ntt_vec(&sk.t0);
    let a_hat = expand_a(p, &sk.rho);
    let mu = shake256(&[&sk.tr, m_prime], 64);
    let rho2 = shake256(&[&sk.key, rnd, &mu], 64);

    let mut kappa: u16 = 0;
    loop {
        let y = expand_mask(p, &rho2, kappa);
        kappa = kappa.wrapping_add(p.l as u16);
        let w = mat_mul(&a_hat, &ntt_vec(&y));
        let w1: Vec<[i32; N]> = w.iter().map(|poly| poly.map(|c| high_bits(p, c))).collect();
        let c_tilde = shake256(&[&mu, &w1_encode(p, &w1)], p.ctilde_len());
        let mut c_hat = sample_in_ball(p, &c_tilde);
        ntt(&mut c_hat);

        let cs1 = scale_vec(&c_hat, &s1_hat);
        let cs2 = scale_vec(&c_hat, &s2_hat);
        let z: PolyVec = y.iter().zip(&cs1).map(|(a, b)| add(a, b)).collect();
        let w_minus: PolyVec = w.iter().zip(&cs2).map(|(a, b)| sub(a, b)).collect();
        let r0: PolyVec = w_minus
            .iter()
            .map(|poly| poly.map(|c| red(low_bits(p, c) as i64)))
            .collect();
        if inf_norm(&z) >= p.gamma1 - p.beta || inf_norm(&r0) >= p.gamma2 - p.beta {
            continue;
        }
        let ct0 = scale_vec(&c_hat, &t0_hat);
        if inf_norm(&ct0) >= p.gamma2 {
            continue;
        }
        // MakeHint(-ct0, w - cs2 + ct0)
        let mut hints = Vec::with_capacity(p.k);
        let mut count = 0;
        for (wm, c0) in w_minus.iter().zip(&ct0) {
            let mut h = [false; N];
            for i in 0..N {
                let r = red(wm[i] as i64 + c0[i] as i64);
                let shifted = red(r as i64 - c0[i] as i64);
                h[i] = high_bits(p, r) != high_bits(p, shifted);
                count += h[i] as usize;
            }
            hints.push(h);
        }
        if count > p.omega {
            continue;
        }

        let mut sig = Vec::with_capacity(p.signature_len());
        sig.extend_from_slice(&c_tilde);
        for poly in &z {
            bit_pack(poly, p.gamma1, p.z_bits(), &mut sig);
        }
        let mut hint_bytes = vec![0u8; p.omega + p.k];
        let mut idx = 0;
        for (i, h) in hints.iter().enumerate() {
            for (j, &bit) in h.iter().enumerate() {
                if bit {
                    hint_bytes[idx] = j as u8;
                    idx += 1;
                }
            }
            hint_bytes[p.omega + i] = idx as u8;
        }
        sig.extend_from_slice(&hint_bytes);
        return sig;
    }
}

/// Verifies a signature over the already-formatted message `M'`.
pub fn verify_internal(p: &Params, pk: &[u8], m_prime: &[u8], sig: &[u8]) -> bool {
    if pk.len() != p.public_key_len() || sig.len() != p.signature_len() {
        return false;
    }
    let rho = &pk[..32];
    let t1: PolyVec = (0..p.k)
        .map(|i| {
            let raw = unpack_bits(&pk[32 + 320 * i..32 + 320 * (i + 1)], 10);
            raw.map(|c| c as i32)
        })
        .collect();
    let c_tilde = &sig[..p.ctilde_len()];
    let zw = 32 * p.z_bits() as usize;
    let z: PolyVec = (0..p.l)
        .map(|i| {
            let off = p.ctilde_len() + zw * i;
            bit_unpack(&sig[off..off + zw], p.gamma1, p.z_bits())
        })
        .collect();
    let Some(h) = hint_unpack(p, &sig[p.ctilde_len() + zw * p.l..]) else {
        return false;
    };
    if inf_norm(&z) >= p.gamma1 - p.beta {
        return false;
    }

    let a_hat = expand_a(p, rho);
    let tr = shake256(&[pk], 64);
    let mu = shake256(&[&tr, m_prime], 64);
    let mut c_hat = sample_in_ball(p, c_tilde);
    ntt(&mut c_hat);

    let z_hat = ntt_vec(&z);
    let w1: Vec<[i32; N]> = a_hat
        .iter()
        .zip(&t1)
        .zip(&h)
        .map(|((row, t1i), hi)| {
            let mut acc = [0i32; N];
            for (aij, zj) in row.iter().zip(&z_hat) {
                acc = add(&acc, &pointwise(aij, zj));
            }
            let mut t = t1i.map(|c| red((c as i64) << D));
            ntt(&mut t);
            acc = sub(&acc, &pointwise(&c_hat, &t));
            ntt_inv(&mut acc);
            let mut out = [0i32; N];
            for j in 0..N {
                out[j] = use_hint(p, hi[j], acc[j]);
            }
            out
        })
        .collect();
    let c_check = shake256(&[&mu, &w1_encode(p, &w1)], p.ctilde_len());
    c_check == c_tilde
}

fn format_message(msg: &[u8], ctx: &[u8]) -> Result<Vec<u8>> {
    if ctx.len() > 255 {
        return Err(CryptoError::ContextTooLong(ctx.len()));
    }
    let mut m = Vec::with_capacity(2 + ctx.len() + msg.len());
    m.push(0);
    m.push(ctx.len() as u8);
    m.extend_from_slice(ctx);
    m.extend_from_slice(msg);
    Ok(m)
}

/// ML-DSA.Sign. Deterministic when `rnd` is `None`, hedged otherwise.
pub fn sign(
    p: &Params,
    sk: &[u8],
    msg: &[u8],
    ctx: &[u8],
    rnd: Option<&[u8; 32]>,
) -> Result<Vec<u8>> {
    if sk.len() != p.secret_key_len() {
        return Err(CryptoError::BadKeyLength {
            alg: p.name,
            expected: p.secret_key_len(),
            got: sk.len(),
        });
    }
    let m = format_message(msg, ctx)?;
    Ok(sign_internal(p, sk, &m, rnd.unwrap_or(&[0u8; 32])))
}

pub fn verify(p: &Params, pk: &[u8], msg: &[u8], ctx: &[u8], sig: &[u8]) -> bool {
    match format_message(msg, ctx) {
        Ok(m) => verify_internal(p, pk, &m, sig),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ntt_round_trip() {
        let mut f = [0i32; N];
        for (i, c) in f.iter_mut().enumerate() {
            *c = red(i as i64 * 7919 - 400);
        }
        let orig = f;
        ntt(&mut f);
        ntt_inv(&mut f);
        assert_eq!(f, orig);
    }

    #[test]
    fn length_formulas() {
        assert_eq!(
            (
                ML_DSA_44.public_key_len(),
                ML_DSA_44.secret_key_len(),
                ML_DSA_44.signature_len()
            ),
            (1312, 2560, 2420)
        );
        assert_eq!(
            (
                ML_DSA_65.public_key_len(),
                ML_DSA_65.secret_key_len(),
                ML_DSA_65.signature_len()
            ),
            (1952, 4032, 3309)
        );
        assert_eq!(
            (
                ML_DSA_87.public_key_len(),
                ML_DSA_87.secret_key_len(),
                ML_DSA_87.signature_len()
            ),
            (2592, 4896, 4627)
        );
    }

    #[test]
    fn sign_verify_empty_message() {
        let (pk, sk) = keygen(&ML_DSA_44, &[9u8; 32]);
        let sig = sign(&ML_DSA_44, &sk, b"", b"", None).unwrap();
        assert!(verify(&ML_DSA_44, &pk, b"", b"", &sig));
        assert!(!verify(&ML_DSA_44, &pk, b"x", b"", &sig));
    }

    #[test]
    fn context_limit() {
        let (_, sk) = keygen(&ML_DSA_44, &[9u8; 32]);
        assert_eq!(
            sign(&ML_DSA_44, &sk, b"m", &[0u8; 256], None),
            Err(CryptoError::ContextTooLong(256))
        );
    }
}
