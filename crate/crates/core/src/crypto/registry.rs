//! Immutable table of every algorithm the toolkit knows about.

use alloc::string::ToString;
use serde::Serialize;

use super::{CryptoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AlgorithmKind {
    Kem,
    Sig,
    Aead,
    Hash,
    Xof,
    Kdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SecurityLevel {
    /// NIST post-quantum category 1 through 5.
    Nist(u8),
    /// Classical bit strength for pre-quantum algorithms.
    ClassicalBits(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AlgorithmId {
    pub kind: AlgorithmKind,
    pub name: &'static str,
    pub security_level: SecurityLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KemArtifactSizes {
    pub public_key_bytes: usize,
    pub secret_key_bytes: usize,
    pub ciphertext_bytes: usize,
    pub shared_secret_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SigArtifactSizes {
    pub public_key_bytes: usize,
    pub secret_key_bytes: usize,
    pub signature_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AeadParams {
    pub key_bytes: usize,
    pub nonce_bytes: usize,
    pub tag_bytes: usize,
    pub max_records_per_key: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArtifactSizes {
    Kem(KemArtifactSizes),
    Sig(SigArtifactSizes),
    Aead(AeadParams),
    Digest { output_bytes: usize },
    Xof,
    Kdf { hash_bytes: usize },
}

/// Seed length per operation, `None` where the operation takes no seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SeedRequirements {
    pub keygen: Option<usize>,
    pub encaps: Option<usize>,
    pub sign: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlgorithmDescriptor {
    pub id: AlgorithmId,
    pub sizes: ArtifactSizes,
    pub seeds: SeedRequirements,
    /// False for ids that are registered for naming and negotiation only.
    pub available: bool,
    pub aliases: &'static [&'static str],
}

impl AlgorithmDescriptor {
    pub fn kem_sizes(&self) -> Option<KemArtifactSizes> {
        match self.sizes {
            ArtifactSizes::Kem(s) => Some(s),
            _ => None,
        }
    }

    pub fn sig_sizes(&self) -> Option<SigArtifactSizes> {
        match self.sizes {
            ArtifactSizes::Sig(s) => Some(s),
            _ => None,
        }
    }

    pub fn aead_params(&self) -> Option<AeadParams> {
        match self.sizes {
            ArtifactSizes::Aead(p) => Some(p),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.id.name
    }
}

const fn kem(
    name: &'static str,
    level: SecurityLevel,
    pk: usize,
    sk: usize,
    ct: usize,
    ss: usize,
    keygen_seed: usize,
    encaps_seed: usize,
    available: bool,
) -> AlgorithmDescriptor {
    AlgorithmDescriptor {
        id: AlgorithmId {
            kind: AlgorithmKind::Kem,
            name,
            security_level: level,
        },
        sizes: ArtifactSizes::Kem(KemArtifactSizes {
            public_key_bytes: pk,
            secret_key_bytes: sk,
            ciphertext_bytes: ct,
            shared_secret_bytes: ss,
        }),
        seeds: SeedRequirements {
            keygen: Some(keygen_seed),
            encaps: Some(encaps_seed),
            sign: None,
        },
        available,
        aliases: &[],
    }
}

const fn sig(
    name: &'static str,
    level: SecurityLevel,
    pk: usize,
    sk: usize,
    sig: usize,
    keygen_seed: usize,
    sign_seed: Option<usize>,
    available: bool,
    aliases: &'static [&'static str],
) -> AlgorithmDescriptor {
    AlgorithmDescriptor {
        id: AlgorithmId {
            kind: AlgorithmKind::Sig,
            name,
            security_level: level,
        },
        sizes: ArtifactSizes::Sig(SigArtifactSizes {
            public_key_bytes: pk,
            secret_key_bytes: sk,
            signature_bytes: sig,
        }),
        seeds: SeedRequirements {
            keygen: Some(keygen_seed),
            encaps: None,
            sign: sign_seed,
        },
        available,
        aliases,
    }
}

const fn simple(
    kind: AlgorithmKind,
    name: &'static str,
    level: SecurityLevel,
    sizes: ArtifactSizes,
) -> AlgorithmDescriptor {
    AlgorithmDescriptor {
        id: AlgorithmId {
            kind,
            name,
            security_level: level,
        },
        sizes,
        seeds: SeedRequirements {
            keygen: None,
            encaps: None,
            sign: None,
        },
        available: true,
        aliases: &[],
    }
}

const fn aead(name: &'static str, level: SecurityLevel, key_bytes: usize) -> AlgorithmDescriptor {
    simple(
        AlgorithmKind::Aead,
        name,
        level,
        ArtifactSizes::Aead(AeadParams {
            key_bytes,
            nonce_bytes: 12,
            tag_bytes: 16,
            max_records_per_key: 1 << 24,
        }),
    )
}

use SecurityLevel::{ClassicalBits as Bits, Nist};

pub const ML_KEM_512: &str = "ML-KEM-512";
pub const ML_KEM_768: &str = "ML-KEM-768";
pub const ML_KEM_1024: &str = "ML-KEM-1024";
pub const X25519: &str = "X25519";
pub const ECP_384: &str = "ECP-384";
pub const MODP_2048: &str = "MODP-2048";
pub const X_WING: &str = "X-Wing";
pub const ML_DSA_44: &str = "ML-DSA-44";
pub const ML_DSA_65: &str = "ML-DSA-65";
pub const ML_DSA_87: &str = "ML-DSA-87";
pub const HASH_ML_DSA_65: &str = "HashML-DSA-65";
pub const ED448: &str = "Ed448";
pub const ED25519: &str = "Ed25519";
pub const ECDSA_P384: &str = "ECDSA-P384";
pub const ED448_ML_DSA_65: &str = "Ed448-ML-DSA-65";
pub const ED25519_ML_DSA_65: &str = "Ed25519-ML-DSA-65";
pub const P384_ML_DSA_65: &str = "p384mldsa65";
pub const AES_256_GCM: &str = "AES-256-GCM";
pub const AES_128_GCM: &str = "AES-128-GCM";
pub const SHA_256: &str = "SHA-256";
pub const SHA_384: &str = "SHA-384";
pub const SHA3_256: &str = "SHA3-256";
pub const SHA3_512: &str = "SHA3-512";
pub const SHAKE128: &str = "SHAKE128";
pub const SHAKE256: &str = "SHAKE256";
pub const HKDF_SHA_384: &str = "HKDF-SHA-384";
pub const HKDF_SHA_256: &str = "HKDF-SHA-256";
pub const PRF_HMAC_SHA2_256: &str = "PRF-HMAC-SHA2-256";
pub const PRF_HMAC_SHA2_384: &str = "PRF-HMAC-SHA2-384";

// ML-DSA-65 public key: 32-byte rho plus six 320-byte packed t1 polynomials.
const ML_DSA_65_PK: usize = 32 + 6 * 320;

static REGISTRY: &[AlgorithmDescriptor] = &[
    kem(ML_KEM_512, Nist(1), 800, 1632, 768, 32, 64, 32, true),
    kem(ML_KEM_768, Nist(3), 1184, 2400, 1088, 32, 64, 32, true),
    kem(ML_KEM_1024, Nist(5), 1568, 3168, 1568, 32, 64, 32, true),
    kem(X25519, Bits(128), 32, 32, 32, 32, 32, 32, true),
    kem(ECP_384, Bits(192), 49, 48, 49, 48, 48, 48, true),
    kem(MODP_2048, Bits(112), 256, 256, 256, 256, 256, 256, false),
    kem(
        X_WING,
        Nist(3),
        1184 + 32,
        2400 + 32 + 32,
        1088 + 32,
        32,
        32,
        32,
        true,
    ),
    sig(
        ML_DSA_44,
        Nist(2),
        1312,
        2560,
        2420,
        32,
        Some(32),
        true,
        &[],
    ),
    sig(
        ML_DSA_65,
        Nist(3),
        ML_DSA_65_PK,
        4032,
        3309,
        32,
        Some(32),
        true,
        &["dilithium3"],
    ),
    sig(
        ML_DSA_87,
        Nist(5),
        2592,
        4896,
        4627,
        32,
        Some(32),
        true,
        &[],
    ),
    sig(
        HASH_ML_DSA_65,
        Nist(3),
        ML_DSA_65_PK,
        4032,
        3309,
        32,
        Some(32),
        false,
        &[],
    ),
    sig(ED448, Bits(224), 57, 57, 114, 57, None, true, &[]),
    sig(ED25519, Bits(128), 32, 32, 64, 32, None, true, &[]),
    sig(ECDSA_P384, Bits(192), 49, 48, 96, 48, None, true, &[]),
    sig(
        ED448_ML_DSA_65,
        Nist(3),
        57 + ML_DSA_65_PK,
        57 + 4032,
        2 + 114 + 3 + 3309,
        57,
        Some(32),
        true,
        &["ed448-dilithium3"],
    ),
    sig(
        ED25519_ML_DSA_65,
        Nist(3),
        32 + ML_DSA_65_PK,
        32 + 4032,
        2 + 64 + 3 + 3309,
        32,
        Some(32),
        true,
        &[],
    ),
    sig(
        P384_ML_DSA_65,
        Nist(3),
        49 + ML_DSA_65_PK,
        48 + 4032,
        2 + 96 + 3 + 3309,
        48,
        Some(32),
        true,
        &["p384ml-dsa65"],
    ),
    aead(AES_256_GCM, Nist(5), 32),
    aead(AES_128_GCM, Nist(1), 16),
    simple(
        AlgorithmKind::Hash,
        SHA_256,
        Bits(128),
        ArtifactSizes::Digest { output_bytes: 32 },
    ),
    simple(
        AlgorithmKind::Hash,
        SHA_384,
        Bits(192),
        ArtifactSizes::Digest { output_bytes: 48 },
    ),
    simple(
        AlgorithmKind::Hash,
        SHA3_256,
        Bits(128),
        ArtifactSizes::Digest { output_bytes: 32 },
    ),
    simple(
        AlgorithmKind::Hash,
        SHA3_512,
        Bits(256),
        ArtifactSizes::Digest { output_bytes: 64 },
    ),
    simple(AlgorithmKind::Xof, SHAKE128, Bits(128), ArtifactSizes::Xof),
    simple(AlgorithmKind::Xof, SHAKE256, Bits(256), ArtifactSizes::Xof),
    simple(
        AlgorithmKind::Kdf,
        HKDF_SHA_384,
        Bits(192),
        ArtifactSizes::Kdf { hash_bytes: 48 },
    ),
    simple(
        AlgorithmKind::Kdf,
        HKDF_SHA_256,
        Bits(128),
        ArtifactSizes::Kdf { hash_bytes: 32 },
    ),
    simple(
        AlgorithmKind::Kdf,
        PRF_HMAC_SHA2_256,
        Bits(128),
        ArtifactSizes::Kdf { hash_bytes: 32 },
    ),
    simple(
        AlgorithmKind::Kdf,
        PRF_HMAC_SHA2_384,
        Bits(192),
        ArtifactSizes::Kdf { hash_bytes: 48 },
    ),
];

/// Every registered descriptor, in registration order.
pub fn all() -> &'static [AlgorithmDescriptor] {
    REGISTRY
}

/// Finds a descriptor by canonical name or alias.
pub fn lookup(name: &str) -> Result<&'static AlgorithmDescriptor> {
    REGISTRY
        .iter()
        .find(|d| d.id.name == name || d.aliases.contains(&name))
        .ok_or_else(|| CryptoError::UnknownAlgorithm(name.to_string()))
}

/// Like [`lookup`], but the descriptor must also be of `kind`.
pub fn lookup_kind(kind: AlgorithmKind, name: &str) -> Result<&'static AlgorithmDescriptor> {
    match lookup(name)? {
        d if d.id.kind == kind => Ok(d),
        _ => Err(CryptoError::UnknownAlgorithm(name.to_string())),
    }
}

/// Descriptor that must exist and be usable.
pub fn require_available(name: &str) -> Result<&'static AlgorithmDescriptor> {
    let d = lookup(name)?;
    if d.available {
        Ok(d)
    } else {
        Err(CryptoError::Unavailable(d.id.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn names_unique_within_kind() {
        let mut seen = BTreeSet::new();
        for d in all() {
            assert!(
                seen.insert((d.id.kind, d.id.name)),
                "duplicate {}",
                d.id.name
            );
            for a in d.aliases {
                assert!(lookup(a).unwrap().id.name == d.id.name);
            }
        }
    }

    #[test]
    fn ml_kem_768_sizes() {
        let s = lookup(ML_KEM_768).unwrap().kem_sizes().unwrap();
        assert_eq!(
            (
                s.public_key_bytes,
                s.secret_key_bytes,
                s.ciphertext_bytes,
                s.shared_secret_bytes
            ),
            (1184, 2400, 1088, 32)
        );
    }

    #[test]
    fn ml_dsa_65_sizes() {
        let s = lookup(ML_DSA_65).unwrap().sig_sizes().unwrap();
        assert_eq!(s.secret_key_bytes, 4032);
        assert_eq!(s.signature_bytes, 3309);
        assert_eq!(s.public_key_bytes, 1952);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            lookup("NO-SUCH-ALG"),
            Err(CryptoError::UnknownAlgorithm(_))
        ));
        assert!(lookup_kind(AlgorithmKind::Kem, ML_DSA_65).is_err());
    }

    #[test]
    fn unavailable_ids_are_flagged() {
        assert!(matches!(
            require_available(MODP_2048),
            Err(CryptoError::Unavailable(_))
        ));
        assert!(matches!(
            require_available(HASH_ML_DSA_65),
            Err(CryptoError::Unavailable(_))
        ));
        assert!(require_available(ML_KEM_768).is_ok());
    }
}
