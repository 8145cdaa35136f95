//! Seed-driven signature interface: ML-DSA, the classical curves, composite
//! profiles and the TEST-ONLY size classes.

use alloc::string::ToString;
use alloc::vec::Vec;

use zeroize::Zeroizing;

use super::classical::{ecp384, ed25519, ed448};
use super::registry::{self, AlgorithmDescriptor, AlgorithmId, AlgorithmKind};
use super::{mldsa, sizeclass, CryptoError, Result};
use crate::hybrid::composite;

/// Signature descriptor from the registry or the TEST-ONLY size classes.
pub fn descriptor(alg: &str) -> Result<&'static AlgorithmDescriptor> {
    if let Some(c) = sizeclass::lookup(alg) {
        return Ok(&c.descriptor);
    }
    let d = registry::lookup_kind(AlgorithmKind::Sig, alg)?;
    if !d.available {
        return Err(CryptoError::Unavailable(d.id.name));
    }
    Ok(d)
}

#[derive(Clone)]
pub struct SigKeyPair {
    pub algorithm: AlgorithmId,
    pub public_key: Vec<u8>,
    secret_key: Zeroizing<Vec<u8>>,
    pub origin_seed_len: usize,
    /// Set for composite keys; the components never sign on their own.
    pub composite_only: bool,
}

impl core::fmt::Debug for SigKeyPair {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SigKeyPair")
            .field("algorithm", &self.algorithm.name)
            .field("public_key_len", &self.public_key.len())
            .field("composite_only", &self.composite_only)
            .finish_non_exhaustive()
    }
}

impl SigKeyPair {
    pub fn secret_key(&self) -> &[u8] {
        &self.secret_key
    }

    pub fn name(&self) -> &'static str {
        self.algorithm.name
    }

    pub fn sign(&self, msg: &[u8], ctx: &[u8], seed: Option<&[u8]>) -> Result<Vec<u8>> {
        sig_sign(self.algorithm.name, &self.secret_key, msg, ctx, seed)
    }

    /// Signs under `alg`, which must be the key's own algorithm.
    pub fn sign_as(
        &self,
        alg: &str,
        msg: &[u8],
        ctx: &[u8],
        seed: Option<&[u8]>,
    ) -> Result<Vec<u8>> {
        let d = descriptor(alg)?;
        if d.id.name != self.algorithm.name {
            if self.composite_only {
                return Err(CryptoError::CompositeOnly(self.algorithm.name));
            }
            return Err(CryptoError::UnsupportedOperation {
                alg: d.id.name,
                op: "sign with foreign key",
            });
        }
        self.sign(msg, ctx, seed)
    }

    pub fn verify(&self, msg: &[u8], ctx: &[u8], sig: &[u8]) -> bool {
        sig_verify(self.algorithm.name, &self.public_key, msg, ctx, sig)
    }
}

fn fixed<const N: usize>(alg: &'static str, seed: &[u8]) -> Result<[u8; N]> {
    seed.try_into().map_err(|_| CryptoError::BadSeedLength {
        alg,
        expected: N,
        got: seed.len(),
    })
}

fn key<const N: usize>(alg: &'static str, sk: &[u8]) -> Result<[u8; N]> {
    sk.try_into().map_err(|_| CryptoError::BadKeyLength {
        alg,
        expected: N,
        got: sk.len(),
    })
}

fn no_ctx(alg: &'static str, ctx: &[u8]) -> Result<()> {
    if ctx.is_empty() {
        Ok(())
    } else {
        Err(CryptoError::ContextUnsupported(alg))
    }
}

pub fn sig_keygen(alg: &str, seed: &[u8]) -> Result<SigKeyPair> {
    let d = descriptor(alg)?;
    let name = d.id.name;
    let mut composite_only = false;
    let (pk, sk) = match name {
        registry::ED448 => {
            let s: [u8; 57] = fixed(name, seed)?;
            (ed448::public_key(&s).to_vec(), s.to_vec())
        }
        registry::ED25519 => {
            let s: [u8; 32] = fixed(name, seed)?;
            (ed25519::public_key(&s).to_vec(), s.to_vec())
        }
        registry::ECDSA_P384 => {
            let s: [u8; 48] = fixed(name, seed)?;
            (ecp384::ecdsa::public_key(&s)?, s.to_vec())
        }
        _ if composite::profile(name).is_some() => {
            composite_only = true;
            composite::keygen(composite::profile(name).expect("checked"), seed)?
        }
        _ if sizeclass::is_test_only(name) => {
            sizeclass::lookup(name).expect("checked").keygen(seed)?
        }
        _ => {
            let p = mldsa::Params::by_name(name).ok_or(CryptoError::Unavailable(name))?;
            let s: [u8; 32] = fixed(name, seed)?;
            mldsa::keygen(&p, &s)
        }
    };
    Ok(SigKeyPair {
        algorithm: d.id,
        public_key: pk,
        secret_key: Zeroizing::new(sk),
        origin_seed_len: seed.len(),
        composite_only,
    })
}

/// Signs `msg`. ML-DSA and composite profiles hedge with `seed` when given
/// and are deterministic otherwise; the classical curves are always
/// deterministic.
pub fn sig_sign(
    alg: &str,
    secret_key: &[u8],
    msg: &[u8],
    ctx: &[u8],
    seed: Option<&[u8]>,
) -> Result<Vec<u8>> {
    let d = descriptor(alg)?;
    let name = d.id.name;
    if ctx.len() > 255 {
        return Err(CryptoError::ContextTooLong(ctx.len()));
    }
    let rnd: Option<[u8; 32]> = match seed {
        Some(s) => Some(fixed(name, s)?),
        None => None,
    };
    match name {
        registry::ED448 => Ok(ed448::sign(&key(name, secret_key)?, ctx, msg)?.to_vec()),
        registry::ED25519 => {
            no_ctx(name, ctx)?;
            Ok(ed25519::sign(&key(name, secret_key)?, msg).to_vec())
        }
        registry::ECDSA_P384 => {
            no_ctx(name, ctx)?;
            ecp384::ecdsa::sign(&key(name, secret_key)?, msg)
        }
        _ if composite::profile(name).is_some() => {
            let profile = composite::profile(name).expect("checked");
            Ok(composite::sign(profile, secret_key, msg, ctx, rnd.as_ref())?.encode())
        }
        _ if sizeclass::is_test_only(name) => sizeclass::lookup(name)
            .expect("checked")
            .sign(secret_key, msg, ctx),
        _ => {
            let p = mldsa::Params::by_name(name).ok_or(CryptoError::Unavailable(name))?;
            mldsa::sign(&p, secret_key, msg, ctx, rnd.as_ref())
        }
    }
}

pub fn sig_verify(alg: &str, public_key: &[u8], msg: &[u8], ctx: &[u8], sig: &[u8]) -> bool {
    let Ok(d) = descriptor(alg) else { return false };
    let name = d.id.name;
    match name {
        registry::ED448 => ed448::verify(public_key, ctx, msg, sig),
        registry::ED25519 => ctx.is_empty() && ed25519::verify(public_key, msg, sig),
        registry::ECDSA_P384 => ctx.is_empty() && ecp384::ecdsa::verify(public_key, msg, sig),
        _ if composite::profile(name).is_some() => composite::verify(
            composite::profile(name).expect("checked"),
            public_key,
            msg,
            ctx,
            sig,
        )
        .unwrap_or(false),
        _ if sizeclass::is_test_only(name) => sizeclass::lookup(name)
            .expect("checked")
            .verify(public_key, msg, ctx, sig),
        _ => match mldsa::Params::by_name(name) {
            Some(p) => mldsa::verify(&p, public_key, msg, ctx, sig),
            None => false,
        },
    }
}

/// Canonical name for `alg`, resolving aliases.
pub fn canonical_name(alg: &str) -> Result<&'static str> {
    descriptor(alg)
        .map(|d| d.id.name)
        .map_err(|_| CryptoError::UnknownAlgorithm(alg.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ml_dsa_65_signature_len() {
        let kp = sig_keygen(registry::ML_DSA_65, &[3u8; 32]).unwrap();
        let sig = kp.sign(b"msg", b"", None).unwrap();
        assert_eq!(sig.len(), 3309);
        assert!(kp.verify(b"msg", b"", &sig));
    }

    #[test]
    fn context_domain_separation() {
        let kp = sig_keygen(registry::ML_DSA_44, &[4u8; 32]).unwrap();
        let sig = kp.sign(b"msg", b"A", None).unwrap();
        assert!(!kp.verify(b"msg", b"B", &sig));
    }

    #[test]
    fn hedged_differs_from_deterministic() {
        let kp = sig_keygen(registry::ML_DSA_44, &[4u8; 32]).unwrap();
        let a = kp.sign(b"msg", b"", None).unwrap();
        let b = kp.sign(b"msg", b"", Some(&[1u8; 32])).unwrap();
        assert_ne!(a, b);
        assert!(kp.verify(b"msg", b"", &b));
    }

    #[test]
    fn composite_keys_refuse_component_use() {
        let kp = sig_keygen(registry::ED448_ML_DSA_65, &[5u8; 57]).unwrap();
        assert!(kp.composite_only);
        assert_eq!(
            kp.sign_as(registry::ML_DSA_65, b"m", b"", None)
                .unwrap_err(),
            CryptoError::CompositeOnly(registry::ED448_ML_DSA_65)
        );
        assert!(kp.sign_as("ed448-dilithium3", b"m", b"", None).is_ok());
    }

    #[test]
    fn ed25519_rejects_context() {
        let kp = sig_keygen(registry::ED25519, &[6u8; 32]).unwrap();
        assert_eq!(
            kp.sign(b"m", b"x", None).unwrap_err(),
            CryptoError::ContextUnsupported("Ed25519")
        );
    }
}
