//! Hash, XOF, HMAC and HKDF helpers over the RustCrypto implementations.

use alloc::vec;
use alloc::vec::Vec;

use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256, Sha384};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Sha3_256, Sha3_512, Shake128, Shake256};

use super::{CryptoError, Result};

pub const SHA384_LEN: usize = 48;

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        Digest::update(&mut h, p);
    }
    h.finalize().into()
}

pub fn sha384(parts: &[&[u8]]) -> [u8; 48] {
    let mut h = Sha384::new();
    for p in parts {
        Digest::update(&mut h, p);
    }
    h.finalize().into()
}

pub fn sha3_256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha3_256::new();
    for p in parts {
        Digest::update(&mut h, p);
    }
    h.finalize().into()
}

pub fn sha3_512(parts: &[&[u8]]) -> [u8; 64] {
    let mut h = Sha3_512::new();
    for p in parts {
        Digest::update(&mut h, p);
    }
    h.finalize().into()
}

/// SHAKE256 of the concatenated parts, squeezed into `out`.
pub fn shake256_into(parts: &[&[u8]], out: &mut [u8]) {
    shake256_reader(parts).read(out);
}

pub fn shake256(parts: &[&[u8]], len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    shake256_into(parts, &mut out);
    out
}

pub fn shake256_reader(parts: &[&[u8]]) -> impl XofReader {
    let mut h = Shake256::default();
    for p in parts {
        h.update(p);
    }
    h.finalize_xof()
}

pub fn shake128_reader(parts: &[&[u8]]) -> impl XofReader {
    let mut h = Shake128::default();
    for p in parts {
        h.update(p);
    }
    h.finalize_xof()
}

/// Hash functions usable under HMAC/HKDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HashAlg {
    Sha256,
    #[default]
    Sha384,
}

impl HashAlg {
    pub fn output_len(self) -> usize {
        match self {
            HashAlg::Sha256 => 32,
            HashAlg::Sha384 => 48,
        }
    }

    pub fn digest(self, parts: &[&[u8]]) -> Vec<u8> {
        match self {
            HashAlg::Sha256 => sha256(parts).to_vec(),
            HashAlg::Sha384 => sha384(parts).to_vec(),
        }
    }
}

pub fn hmac(alg: HashAlg, key: &[u8], parts: &[&[u8]]) -> Vec<u8> {
    match alg {
        HashAlg::Sha256 => {
            let mut m =
                <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac takes any key length");
            for p in parts {
                Mac::update(&mut m, p);
            }
            m.finalize().into_bytes().to_vec()
        }
        HashAlg::Sha384 => {
            let mut m =
                <Hmac<Sha384> as Mac>::new_from_slice(key).expect("hmac takes any key length");
            for p in parts {
                Mac::update(&mut m, p);
            }
            m.finalize().into_bytes().to_vec()
        }
    }
}

pub fn hmac_sha384(key: &[u8], parts: &[&[u8]]) -> [u8; 48] {
    let mut out = [0u8; 48];
    out.copy_from_slice(&hmac(HashAlg::Sha384, key, parts));
    out
}

/// HKDF-Extract. An empty salt means a string of zero bytes of hash length.
pub fn hkdf_extract(alg: HashAlg, salt: &[u8], ikm: &[u8]) -> Vec<u8> {
    let salt = if salt.is_empty() { None } else { Some(salt) };
    match alg {
        HashAlg::Sha256 => hkdf::Hkdf::<Sha256>::extract(salt, ikm).0.to_vec(),
        HashAlg::Sha384 => hkdf::Hkdf::<Sha384>::extract(salt, ikm).0.to_vec(),
    }
}

/// HKDF-Expand. `len` may be at most 255 times the hash output length.
pub fn hkdf_expand(alg: HashAlg, prk: &[u8], info: &[u8], len: usize) -> Result<Vec<u8>> {
    let limit = 255 * alg.output_len();
    if len > limit {
        return Err(CryptoError::LengthTooLarge {
            requested: len,
            limit,
        });
    }
    let mut okm = vec![0u8; len];
    let res = match alg {
        HashAlg::Sha256 => hkdf::Hkdf::<Sha256>::from_prk(prk).map(|h| h.expand(info, &mut okm)),
        HashAlg::Sha384 => hkdf::Hkdf::<Sha384>::from_prk(prk).map(|h| h.expand(info, &mut okm)),
    };
    match res {
        Ok(Ok(())) => Ok(okm),
        Ok(Err(_)) => Err(CryptoError::LengthTooLarge {
            requested: len,
            limit,
        }),
        Err(_) => Err(CryptoError::InvalidKey("HKDF PRK shorter than hash length")),
    }
}
