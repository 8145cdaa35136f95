//! Composite ML-DSA-65 signatures with a classical partner.
//!
//! The classical branch signs a SHAKE256 digest of the message, the ML-DSA
//! branch signs the message itself. Both prepared messages start with the
//! profile's domain prefix so neither component verifies outside the
//! composite.

use alloc::vec::Vec;

use crate::crypto::classical::{ecp384, ed25519, ed448};
use crate::crypto::hash::shake256;
use crate::crypto::registry;
use crate::crypto::{mldsa, CryptoError, Result};

const PQ: mldsa::Params = mldsa::ML_DSA_65;
const PREFIX: &[u8] = b"CompositeAlgorithmSignatures2025";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicalComponent {
    Ed448,
    Ed25519,
    EcdsaP384,
}

impl ClassicalComponent {
    pub fn seed_len(self) -> usize {
        match self {
            ClassicalComponent::Ed448 => 57,
            ClassicalComponent::Ed25519 => 32,
            ClassicalComponent::EcdsaP384 => 48,
        }
    }

    pub fn public_key_len(self) -> usize {
        match self {
            ClassicalComponent::Ed448 => 57,
            ClassicalComponent::Ed25519 => 32,
            ClassicalComponent::EcdsaP384 => 49,
        }
    }

    pub fn signature_len(self) -> usize {
        match self {
            ClassicalComponent::Ed448 => 114,
            ClassicalComponent::Ed25519 => 64,
            ClassicalComponent::EcdsaP384 => 96,
        }
    }

    fn public_key(self, seed: &[u8]) -> Result<Vec<u8>> {
        Ok(match self {
            ClassicalComponent::Ed448 => {
                ed448::public_key(&seed.try_into().expect("seed")).to_vec()
            }
            ClassicalComponent::Ed25519 => {
                ed25519::public_key(&seed.try_into().expect("seed")).to_vec()
            }
            ClassicalComponent::EcdsaP384 => {
                ecp384::ecdsa::public_key(&seed.try_into().expect("seed"))?
            }
        })
    }

    fn sign(self, seed: &[u8], msg: &[u8]) -> Result<Vec<u8>> {
        Ok(match self {
            ClassicalComponent::Ed448 => {
                ed448::sign(&seed.try_into().expect("seed"), b"", msg)?.to_vec()
            }
            ClassicalComponent::Ed25519 => {
                ed25519::sign(&seed.try_into().expect("seed"), msg).to_vec()
            }
            ClassicalComponent::EcdsaP384 => {
                ecp384::ecdsa::sign(&seed.try_into().expect("seed"), msg)?
            }
        })
    }

    fn verify(self, pk: &[u8], msg: &[u8], sig: &[u8]) -> bool {
        match self {
            ClassicalComponent::Ed448 => ed448::verify(pk, b"", msg, sig),
            ClassicalComponent::Ed25519 => ed25519::verify(pk, msg, sig),
            ClassicalComponent::EcdsaP384 => ecp384::ecdsa::verify(pk, msg, sig),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompositeProfile {
    pub name: &'static str,
    pub classical: ClassicalComponent,
    label: &'static [u8],
}

pub const ED448_ML_DSA_65: CompositeProfile = CompositeProfile {
    name: registry::ED448_ML_DSA_65,
    classical: ClassicalComponent::Ed448,
    label: b"COMPSIG-MLDSA65-Ed448-SHAKE256",
};

pub const ED25519_ML_DSA_65: CompositeProfile = CompositeProfile {
    name: registry::ED25519_ML_DSA_65,
    classical: ClassicalComponent::Ed25519,
    label: b"COMPSIG-MLDSA65-Ed25519-SHAKE256",
};

pub const P384_ML_DSA_65: CompositeProfile = CompositeProfile {
    name: registry::P384_ML_DSA_65,
    classical: ClassicalComponent::EcdsaP384,
    label: b"COMPSIG-MLDSA65-ECDSA-P384-SHAKE256",
};

pub const PROFILES: [CompositeProfile; 3] = [ED448_ML_DSA_65, ED25519_ML_DSA_65, P384_ML_DSA_65];

/// Profile by canonical name or alias.
pub fn profile(name: &str) -> Option<&'static CompositeProfile> {
    let canonical = registry::lookup(name).ok()?.id.name;
    PROFILES.iter().find(|p| p.name == canonical)
}

impl CompositeProfile {
    pub fn seed_len(&self) -> usize {
        self.classical.seed_len()
    }

    pub fn public_key_len(&self) -> usize {
        self.classical.public_key_len() + PQ.public_key_len()
    }

    pub fn secret_key_len(&self) -> usize {
        self.classical.seed_len() + PQ.secret_key_len()
    }

    pub fn signature_len(&self) -> usize {
        2 + self.classical.signature_len() + 3 + PQ.signature_len()
    }

    pub fn domain_prefix(&self) -> Vec<u8> {
        let mut p = PREFIX.to_vec();
        p.extend_from_slice(self.label);
        p
    }

    fn framed(&self, ctx: &[u8], body: &[u8]) -> Vec<u8> {
        let mut m = self.domain_prefix();
        m.push(ctx.len() as u8);
        m.extend_from_slice(ctx);
        m.extend_from_slice(body);
        m
    }

    /// Message signed by the classical component.
    pub fn classical_message(&self, msg: &[u8], ctx: &[u8]) -> Vec<u8> {
        self.framed(ctx, &shake256(&[msg], 64))
    }

    /// Message signed by the ML-DSA component (no pre-hash).
    pub fn pq_message(&self, msg: &[u8], ctx: &[u8]) -> Vec<u8> {
        self.framed(ctx, msg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeSignature {
    pub classical_sig: Vec<u8>,
    pub pq_sig: Vec<u8>,
}

impl CompositeSignature {
    /// `len16 || classical || len24 || pq`, big-endian lengths.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.classical_sig.len() + self.pq_sig.len());
        out.extend_from_slice(&(self.classical_sig.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.classical_sig);
        out.extend_from_slice(&(self.pq_sig.len() as u32).to_be_bytes()[1..]);
        out.extend_from_slice(&self.pq_sig);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = CryptoError::MalformedEncoding("composite signature");
        if bytes.len() < 2 {
            return Err(bad);
        }
        let cl = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
        let rest = &bytes[2..];
        if rest.len() < cl + 3 {
            return Err(bad);
        }
        let (classical, rest) = rest.split_at(cl);
        let pl = u32::from_be_bytes([0, rest[0], rest[1], rest[2]]) as usize;
        let rest = &rest[3..];
        if rest.len() != pl {
            return Err(bad);
        }
        Ok(CompositeSignature {
            classical_sig: classical.to_vec(),
            pq_sig: rest.to_vec(),
        })
    }
}

fn expand_seed(profile: &CompositeProfile, seed: &[u8]) -> (Vec<u8>, [u8; 32]) {
    let n = profile.seed_len();
    let out = shake256(
        &[b"composite keygen", profile.name.as_bytes(), seed],
        n + 32,
    );
    let mut pq = [0u8; 32];
    pq.copy_from_slice(&out[n..]);
    (out[..n].to_vec(), pq)
}

/// Returns `(pk, sk)` with `pk = classical_pk || pq_pk` and
/// `sk = classical_seed || pq_sk`.
pub fn keygen(profile: &CompositeProfile, seed: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    if seed.len() != profile.seed_len() {
        return Err(CryptoError::BadSeedLength {
            alg: profile.name,
            expected: profile.seed_len(),
            got: seed.len(),
        });
    }
    let (cl_seed, pq_seed) = expand_seed(profile, seed);
    let mut pk = profile.classical.public_key(&cl_seed)?;
    let (pq_pk, pq_sk) = mldsa::keygen(&PQ, &pq_seed);
    pk.extend_from_slice(&pq_pk);
    let mut sk = cl_seed;
    sk.extend_from_slice(&pq_sk);
    Ok((pk, sk))
}

pub fn sign(
    profile: &CompositeProfile,
    sk: &[u8],
    msg: &[u8],
    ctx: &[u8],
    rnd: Option<&[u8; 32]>,
) -> Result<CompositeSignature> {
    if ctx.len() > 255 {
        return Err(CryptoError::ContextTooLong(ctx.len()));
    }
    if sk.len() != profile.secret_key_len() {
        return Err(CryptoError::BadKeyLength {
            alg: profile.name,
            expected: profile.secret_key_len(),
            got: sk.len(),
        });
    }
    let (cl_sk, pq_sk) = sk.split_at(profile.seed_len());
    let classical_sig = profile
        .classical
        .sign(cl_sk, &profile.classical_message(msg, ctx))?;
    let pq_sig = mldsa::sign(&PQ, pq_sk, &profile.pq_message(msg, ctx), b"", rnd)?;
    Ok(CompositeSignature {
        classical_sig,
        pq_sig,
    })
}

/// Accepts only if both components verify on their prepared messages.
pub fn verify(
    profile: &CompositeProfile,
    pk: &[u8],
    msg: &[u8],
    ctx: &[u8],
    sig: &[u8],
) -> Result<bool> {
    let sig = CompositeSignature::decode(sig)?;
    if pk.len() != profile.public_key_len() || ctx.len() > 255 {
        return Ok(false);
    }
    let (cl_pk, pq_pk) = pk.split_at(profile.classical.public_key_len());
    let cl_ok = profile.classical.verify(
        cl_pk,
        &profile.classical_message(msg, ctx),
        &sig.classical_sig,
    );
    let pq_ok = mldsa::verify(&PQ, pq_pk, &profile.pq_message(msg, ctx), b"", &sig.pq_sig);
    Ok(cl_ok & pq_ok)
}

/// Splits a composite public key into `(classical, pq)` halves.
pub fn split_public_key<'a>(
    profile: &CompositeProfile,
    pk: &'a [u8],
) -> Option<(&'a [u8], &'a [u8])> {
    (pk.len() == profile.public_key_len()).then(|| pk.split_at(profile.classical.public_key_len()))
}
