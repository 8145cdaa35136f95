//! ML-KEM (FIPS 203) for all three parameter sets.
//!
//! Straightforward reference-style arithmetic over `u16` coefficients; no
//! Montgomery tricks and no constant-time guarantees beyond what falls out of
//! the structure.

use alloc::vec::Vec;

use sha3::digest::XofReader;
use zeroize::Zeroize;

use super::hash::{sha3_256, sha3_512, shake128_reader, shake256, shake256_into};
use super::{CryptoError, Result};

const N: usize = 256;
const Q: u32 = 3329;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    pub name: &'static str,
    k: usize,
    eta1: usize,
    eta2: usize,
    du: u32,
    dv: u32,
}

pub const ML_KEM_512: Params = Params {
    name: "ML-KEM-512",
    k: 2,
    eta1: 3,
    eta2: 2,
    du: 10,
    dv: 4,
};
pub const ML_KEM_768: Params = Params {
    name: "ML-KEM-768",
    k: 3,
    eta1: 2,
    eta2: 2,
    du: 10,
    dv: 4,
};
pub const ML_KEM_1024: Params = Params {
    name: "ML-KEM-1024",
    k: 4,
    eta1: 2,
    eta2: 2,
    du: 11,
    dv: 5,
};

impl Params {
    pub fn by_name(name: &str) -> Option<Params> {
        [ML_KEM_512, ML_KEM_768, ML_KEM_1024]
            .into_iter()
            .find(|p| p.name == name)
    }

    pub const fn encaps_key_len(&self) -> usize {
        384 * self.k + 32
    }

    pub const fn decaps_key_len(&self) -> usize {
        768 * self.k + 96
    }

    pub const fn ciphertext_len(&self) -> usize {
        32 * (self.du as usize * self.k + self.dv as usize)
    }
}

type Poly = [u16; N];

const fn bitrev7(x: usize) -> usize {
    let mut r = 0;
    let mut i = 0;
    while i < 7 {
        r |= ((x >> i) & 1) << (6 - i);
        i += 1;
    }
    r
}

const fn pow_mod(base: u32, mut exp: usize) -> u32 {
    let mut acc: u32 = 1;
    let mut b = base % Q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % Q;
        }
        b = b * b % Q;
        exp >>= 1;
    }
    acc
}

const ZETAS: [u16; 128] = {
    let mut z = [0u16; 128];
    let mut i = 0;
    while i < 128 {
        z[i] = pow_mod(17, bitrev7(i)) as u16;
        i += 1;
    }
    z
};

const GAMMAS: [u16; 128] = {
    let mut g = [0u16; 128];
    let mut i = 0;
    while i < 128 {
        g[i] = pow_mod(17, 2 * bitrev7(i) + 1) as u16;
        i += 1;
    }
    g
};

#[inline]
fn mulq(a: u16, b: u16) -> u16 {
    (a as u32 * b as u32 % Q) as u16
}

#[inline]
fn addq(a: u16, b: u16) -> u16 {
    ((a as u32 + b as u32) % Q) as u16
}

#[inline]
fn subq(a: u16, b: u16) -> u16 {
    ((a as u32 + Q - b as u32) % Q) as u16
}

fn ntt(f: &mut Poly) {
    let mut i = 1;
    let mut len = 128;
    while len >= 2 {
        let mut start = 0;
        while start < N {
            let zeta = ZETAS[i];
            i += 1;
            for j in start..start + len {
                let t = mulq(zeta, f[j + len]);
                f[j + len] = subq(f[j], t);
                f[j] = addq(f[j], t);
            }
            start += 2 * len;
        }
        len /= 2;
    }
}

fn ntt_inv(f: &mut Poly) {
    let mut i = 127;
    let mut len = 2;
    while len <= 128 {
        let mut start = 0;
        while start < N {
            let zeta = ZETAS[i];
            i -= 1;
            for j in start..start + len {
                let t = f[j];
                f[j] = addq(t, f[j + len]);
                f[j + len] = mulq(zeta, subq(f[j + len], t));
            }
            start += 2 * len;
        }
        len *= 2;
    }
    for c in f.iter_mut() {
        *c = mulq(*c, 3303);
    }
}

fn multiply_ntts(a: &Poly, b: &Poly) -> Poly {
    let mut h = [0u16; N];
    for i in 0..128 {
        let (a0, a1, b0, b1) = (a[2 * i], a[2 * i + 1], b[2 * i], b[2 * i + 1]);
        h[2 * i] = addq(mulq(a0, b0), mulq(mulq(a1, b1), GAMMAS[i]));
        h[2 * i + 1] = addq(mulq(a0, b1), mulq(a1, b0));
    }
    h
}

fn poly_add(a: &Poly, b: &Poly) -> Poly {
    let mut r = [0u16; N];
    for i in 0..N {
        r[i] = addq(a[i], b[i]);
    }
    r
}

fn poly_sub(a: &Poly, b: &Poly) -> Poly {
    let mut r = [0u16; N];
    for i in 0..N {
        r[i] = subq(a[i], b[i]);
    }
    r
}

fn sample_ntt(rho: &[u8], j: u8, i: u8) -> Poly {
    let mut xof = shake128_reader(&[rho, &[j, i]]);
    let mut a = [0u16; N];
    let mut n = 0;
    let mut buf = [0u8; 3];
    while n < N {
        xof.read(&mut buf);
        let d1 = buf[0] as u16 | ((buf[1] as u16 & 0x0f) << 8);
        let d2 = (buf[1] as u16 >> 4) | ((buf[2] as u16) << 4);
        if (d1 as u32) < Q {
            a[n] = d1;
            n += 1;
        }
        if n < N && (d2 as u32) < Q {
            a[n] = d2;
            n += 1;
        }
    }
    a
}

fn prf(eta: usize, s: &[u8], b: u8) -> Vec<u8> {
    shake256(&[s, &[b]], 64 * eta)
}

fn sample_cbd(eta: usize, bytes: &[u8]) -> Poly {
    let bit = |k: usize| ((bytes[k / 8] >> (k % 8)) & 1) as u16;
    let mut f = [0u16; N];
    for (i, c) in f.iter_mut().enumerate() {
        let mut x = 0u16;
        let mut y = 0u16;
        for j in 0..eta {
            x += bit(2 * i * eta + j);
            y += bit(2 * i * eta + eta + j);
        }
        *c = subq(x, y);
    }
    f
}

fn byte_encode(d: u32, f: &Poly, out: &mut Vec<u8>) {
    let mut acc: u64 = 0;
    let mut bits = 0u32;
    for &c in f.iter() {
        acc |= (c as u64) << bits;
        bits += d;
        while bits >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            bits -= 8;
        }
    }
}

fn byte_decode(d: u32, bytes: &[u8]) -> Poly {
    let mut f = [0u16; N];
    let mask = (1u64 << d) - 1;
    let mut acc: u64 = 0;
    let mut bits = 0u32;
    let mut idx = 0;
    for c in f.iter_mut() {
        while bits < d {
            acc |= (bytes[idx] as u64) << bits;
            idx += 1;
            bits += 8;
        }
        let v = (acc & mask) as u32;
        acc >>= d;
        bits -= d;
        *c = if d == 12 { (v % Q) as u16 } else { v as u16 };
    }
    f
}

fn compress(d: u32, x: u16) -> u16 {
    (((((x as u64) << d) + (Q as u64 / 2)) / Q as u64) & ((1 << d) - 1)) as u16
}

fn decompress(d: u32, y: u16) -> u16 {
    ((y as u32 * Q + (1 << (d - 1))) >> d) as u16
}

fn generate_matrix(p: &Params, rho: &[u8]) -> Vec<Vec<Poly>> {
    (0..p.k)
        .map(|i| {
            (0..p.k)
                .map(|j| sample_ntt(rho, j as u8, i as u8))
                .collect()
        })
        .collect()
}

fn pke_keygen(p: &Params, d: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut g = sha3_512(&[d, &[p.k as u8]]);
    let (rho, sigma) = g.split_at(32);
    let a = generate_matrix(p, rho);
    let mut n = 0u8;
    let mut s = Vec::with_capacity(p.k);
    for _ in 0..p.k {
        let mut v = sample_cbd(p.eta1, &prf(p.eta1, sigma, n));
        ntt(&mut v);
        s.push(v);
        n += 1;
    }
    let mut e = Vec::with_capacity(p.k);
    for _ in 0..p.k {
        let mut v = sample_cbd(p.eta1, &prf(p.eta1, sigma, n));
        ntt(&mut v);
        e.push(v);
        n += 1;
    }
    let mut ek = Vec::with_capacity(p.encaps_key_len());
    for i in 0..p.k {
        let mut t = e[i];
        for j in 0..p.k {
            t = poly_add(&t, &multiply_ntts(&a[i][j], &s[j]));
        }
        byte_encode(12, &t, &mut ek);
    }
    ek.extend_from_slice(rho);
    let mut dk = Vec::with_capacity(384 * p.k);
    for v in &s {
        byte_encode(12, v, &mut dk);
    }
    g.zeroize();
    (ek, dk)
}

fn pke_encrypt(p: &Params, ek: &[u8], m: &[u8; 32], r: &[u8]) -> Vec<u8> {
    let t: Vec<Poly> = (0..p.k)
        .map(|i| byte_decode(12, &ek[384 * i..384 * (i + 1)]))
        .collect();
    let rho = &ek[384 * p.k..];
    let a = generate_matrix(p, rho);
    let mut n = 0u8;
    let mut y = Vec::with_capacity(p.k);
    for _ in 0..p.k {
        let mut v = sample_cbd(p.eta1, &prf(p.eta1, r, n));
        ntt(&mut v);
        y.push(v);
        n += 1;
    }
    let mut e1 = Vec::with_capacity(p.k);
    for _ in 0..p.k {
        e1.push(sample_cbd(p.eta2, &prf(p.eta2, r, n)));
        n += 1;
    }
    let e2 = sample_cbd(p.eta2, &prf(p.eta2, r, n));

    let mut c = Vec::with_capacity(p.ciphertext_len());
    for i in 0..p.k {
        let mut acc = [0u16; N];
        for j in 0..p.k {
            acc = poly_add(&acc, &multiply_ntts(&a[j][i], &y[j]));
        }
        ntt_inv(&mut acc);
        let u = poly_add(&acc, &e1[i]);
        let mut packed = [0u16; N];
        for (dst, &src) in packed.iter_mut().zip(u.iter()) {
            *dst = compress(p.du, src);
        }
        byte_encode(p.du, &packed, &mut c);
    }
    let mut acc = [0u16; N];
    for j in 0..p.k {
        acc = poly_add(&acc, &multiply_ntts(&t[j], &y[j]));
    }
    ntt_inv(&mut acc);
    let mu = byte_decode(1, m);
    let mut v = poly_add(&poly_add(&acc, &e2), &mu.map(|b| decompress(1, b)));
    for x in v.iter_mut() {
        *x = compress(p.dv, *x);
    }
    byte_encode(p.dv, &v, &mut c);
    c
}

fn pke_decrypt(p: &Params, dk: &[u8], c: &[u8]) -> [u8; 32] {
    let du_bytes = 32 * p.du as usize;
    let mut w = byte_decode(p.dv, &c[du_bytes * p.k..]).map(|y| decompress(p.dv, y));
    let mut acc = [0u16; N];
    for i in 0..p.k {
        let mut u =
            byte_decode(p.du, &c[du_bytes * i..du_bytes * (i + 1)]).map(|y| decompress(p.du, y));
        ntt(&mut u);
        let s = byte_decode(12, &dk[384 * i..384 * (i + 1)]);
        acc = poly_add(&acc, &multiply_ntts(&s, &u));
    }
    ntt_inv(&mut acc);
    w = poly_sub(&w, &acc);
    let mut out = Vec::with_capacity(32);
    byte_encode(1, &w.map(|x| compress(1, x)), &mut out);
    let mut m = [0u8; 32];
    m.copy_from_slice(&out);
    m
}

/// Deterministic key generation from the 64-byte `d || z` seed.
pub fn keygen(p: &Params, seed: &[u8; 64]) -> (Vec<u8>, Vec<u8>) {
    let (d, z) = seed.split_at(32);
    let (ek, mut dk_pke) = pke_keygen(p, d);
    let mut dk = Vec::with_capacity(p.decaps_key_len());
    dk.extend_from_slice(&dk_pke);
    dk.extend_from_slice(&ek);
    dk.extend_from_slice(&sha3_256(&[&ek]));
    dk.extend_from_slice(z);
    dk_pke.zeroize();
    (ek, dk)
}

fn check_encaps_key(p: &Params, ek: &[u8]) -> Result<()> {
    if ek.len() != p.encaps_key_len() {
        return Err(CryptoError::BadKeyLength {
            alg: p.name,
            expected: p.encaps_key_len(),
            got: ek.len(),
        });
    }
    // Modulus check: every 12-bit coefficient must already be reduced.
    for chunk in ek[..384 * p.k].chunks(3) {
        let a = chunk[0] as u32 | ((chunk[1] as u32 & 0x0f) << 8);
        let b = (chunk[1] as u32 >> 4) | ((chunk[2] as u32) << 4);
        if a >= Q || b >= Q {
            return Err(CryptoError::InvalidKey(p.name));
        }
    }
    Ok(())
}

/// Deterministic encapsulation with the 32-byte message seed `m`.
pub fn encaps(p: &Params, ek: &[u8], m: &[u8; 32]) -> Result<(Vec<u8>, [u8; 32])> {
    check_encaps_key(p, ek)?;
    let mut g = sha3_512(&[m, &sha3_256(&[ek])]);
    let mut k = [0u8; 32];
    k.copy_from_slice(&g[..32]);
    let c = pke_encrypt(p, ek, m, &g[32..]);
    g.zeroize();
    Ok((c, k))
}

/// Decapsulation with implicit rejection: a ciphertext that does not
/// re-encrypt to itself yields `J(z || c)` instead of an error.
pub fn decaps(p: &Params, dk: &[u8], c: &[u8]) -> Result<[u8; 32]> {
    if dk.len() != p.decaps_key_len() {
        return Err(CryptoError::BadKeyLength {
            alg: p.name,
            expected: p.decaps_key_len(),
            got: dk.len(),
        });
    }
    if c.len() != p.ciphertext_len() {
        return Err(CryptoError::BadCiphertextLength {
            alg: p.name,
            expected: p.ciphertext_len(),
            got: c.len(),
        });
    }
    let k = p.k;
    let dk_pke = &dk[..384 * k];
    let ek = &dk[384 * k..768 * k + 32];
    let h = &dk[768 * k + 32..768 * k + 64];
    let z = &dk[768 * k + 64..];
    if sha3_256(&[ek]) != h {
        return Err(CryptoError::InvalidKey(p.name));
    }
    let mut m = pke_decrypt(p, dk_pke, c);
    let mut g = sha3_512(&[&m, h]);
    let mut rejected = [0u8; 32];
    shake256_into(&[z, c], &mut rejected);
    let c2 = pke_encrypt(p, ek, &m, &g[32..]);
    let mut out = [0u8; 32];
    if c2 == c {
        out.copy_from_slice(&g[..32]);
    } else {
        out = rejected;
    }
    m.zeroize();
    g.zeroize();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ntt_round_trip() {
        let mut f = [0u16; N];
        for (i, c) in f.iter_mut().enumerate() {
            *c = (i as u16 * 13 + 7) % Q as u16;
        }
        let orig = f;
        ntt(&mut f);
        ntt_inv(&mut f);
        assert_eq!(f, orig);
    }

    #[test]
    fn encode_decode_widths() {
        let mut f = [0u16; N];
        for (i, c) in f.iter_mut().enumerate() {
            *c = (i as u16 * 5) % 1024;
        }
        let mut out = alloc::vec![];
        byte_encode(10, &f, &mut out);
        assert_eq!(out.len(), 320);
        assert_eq!(byte_decode(10, &out), f);
    }

    #[test]
    fn sizes_match_parameter_sets() {
        for (p, ek, dk, ct) in [
            (ML_KEM_512, 800, 1632, 768),
            (ML_KEM_768, 1184, 2400, 1088),
            (ML_KEM_1024, 1568, 3168, 1568),
        ] {
            let (e, d) = keygen(&p, &[3u8; 64]);
            assert_eq!((e.len(), d.len()), (ek, dk));
            let (c, _) = encaps(&p, &e, &[4u8; 32]).unwrap();
            assert_eq!(c.len(), ct);
        }
    }

    #[test]
    fn unreduced_key_rejected() {
        let (mut ek, _) = keygen(&ML_KEM_768, &[0u8; 64]);
        ek[0] = 0xff;
        ek[1] |= 0x0f;
        assert_eq!(
            encaps(&ML_KEM_768, &ek, &[0u8; 32]),
            Err(CryptoError::InvalidKey("ML-KEM-768"))
        );
    }
}
