//! TEST-ONLY signature scheme parameterized by artifact size.
//!
//! Each class reproduces the combined key + signature footprint of a signature
//! family so handshake-size studies can run without implementing the family.
//! Signatures are a keyed XOF of the public key and message: structurally
//! valid, trivially forgeable, and rejected by every profile builder outside
//! comparison mode.

use alloc::vec::Vec;

use super::hash::shake256;
use super::registry::{
    AlgorithmDescriptor, AlgorithmId, AlgorithmKind, ArtifactSizes, SecurityLevel,
    SeedRequirements, SigArtifactSizes,
};
use super::{CryptoError, Result};

pub const SEED_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeClass {
    pub name: &'static str,
    pub key_plus_signature_kb: f64,
    pub descriptor: AlgorithmDescriptor,
}

const fn class(name: &'static str, alg: &'static str, tenths_kb: usize, kb: f64) -> SizeClass {
    let total = tenths_kb * 1024 / 10;
    let pk = total / 2;
    SizeClass {
        name,
        key_plus_signature_kb: kb,
        descriptor: AlgorithmDescriptor {
            id: AlgorithmId {
                kind: AlgorithmKind::Sig,
                name: alg,
                security_level: SecurityLevel::ClassicalBits(0),
            },
            sizes: ArtifactSizes::Sig(SigArtifactSizes {
                public_key_bytes: pk,
                secret_key_bytes: SEED_LEN,
                signature_bytes: total - pk,
            }),
            seeds: SeedRequirements {
                keygen: Some(SEED_LEN),
                encaps: None,
                sign: None,
            },
            available: true,
            aliases: &[],
        },
    }
}

/// Classes in ascending footprint order.
pub static SIZE_CLASSES: [SizeClass; 9] = [
    class("ECDSA", "TEST-ONLY-ECDSA", 1, 0.1),
    class("RSA", "TEST-ONLY-RSA", 5, 0.5),
    class("Lattice", "TEST-ONLY-Lattice", 110, 11.0),
    class("Stateful HBS", "TEST-ONLY-StatefulHBS", 150, 15.0),
    class("Stateless HBS", "TEST-ONLY-StatelessHBS", 420, 42.0),
    class("ZK (Picnic L1FS)", "TEST-ONLY-ZK", 660, 66.0),
    class("Multivariate", "TEST-ONLY-Multivariate", 1000, 100.0),
    class("Isogeny", "TEST-ONLY-Isogeny", 1220, 122.0),
    class("Code", "TEST-ONLY-Code", 1900, 190.0),
];

impl SizeClass {
    pub fn alg_name(&self) -> &'static str {
        self.descriptor.id.name
    }

    fn sizes(&self) -> SigArtifactSizes {
        self.descriptor.sig_sizes().expect("signature sizes")
    }

    pub fn total_bytes(&self) -> usize {
        let s = self.sizes();
        s.public_key_bytes + s.signature_bytes
    }

    pub fn keygen(&self, seed: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
        if seed.len() != SEED_LEN {
            return Err(CryptoError::BadSeedLength {
                alg: self.alg_name(),
                expected: SEED_LEN,
                got: seed.len(),
            });
        }
        let pk = shake256(
            &[b"TEST-ONLY/pk", self.alg_name().as_bytes(), seed],
            self.sizes().public_key_bytes,
        );
        Ok((pk, seed.to_vec()))
    }

    fn tag(&self, pk: &[u8], msg: &[u8], ctx: &[u8]) -> Vec<u8> {
        shake256(
            &[b"TEST-ONLY/sig", pk, &[ctx.len() as u8], ctx, msg],
            self.sizes().signature_bytes,
        )
    }

    pub fn sign(&self, sk: &[u8], msg: &[u8], ctx: &[u8]) -> Result<Vec<u8>> {
        if ctx.len() > 255 {
            return Err(CryptoError::ContextTooLong(ctx.len()));
        }
        let (pk, _) = self.keygen(sk)?;
        Ok(self.tag(&pk, msg, ctx))
    }

    pub fn verify(&self, pk: &[u8], msg: &[u8], ctx: &[u8], sig: &[u8]) -> bool {
        ctx.len() <= 255
            && pk.len() == self.sizes().public_key_bytes
            && sig.len() == self.sizes().signature_bytes
            && self.tag(pk, msg, ctx) == sig
    }
}

/// Finds a class by display name or algorithm name.
pub fn lookup(name: &str) -> Option<&'static SizeClass> {
    SIZE_CLASSES
        .iter()
        .find(|c| c.name == name || c.alg_name() == name)
}

pub fn is_test_only(alg: &str) -> bool {
    lookup(alg).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strictly_increasing_footprint() {
        for w in SIZE_CLASSES.windows(2) {
            assert!(w[0].total_bytes() < w[1].total_bytes());
            assert!(w[0].key_plus_signature_kb < w[1].key_plus_signature_kb);
        }
        assert_eq!(lookup("Code").unwrap().total_bytes(), 190 * 1024);
    }

    #[test]
    fn sign_verify() {
        let c = lookup("Lattice").unwrap();
        let (pk, sk) = c.keygen(&[1u8; 32]).unwrap();
        let sig = c.sign(&sk, b"m", b"").unwrap();
        assert!(c.verify(&pk, b"m", b"", &sig));
        assert!(!c.verify(&pk, b"n", b"", &sig));
    }
}
