//! Negotiable suite profiles and the AES-256 policy for post-quantum modes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::registry::{self, AlgorithmId, AlgorithmKind};
use super::{sig, sizeclass, CryptoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProtectionMode {
    PurePq,
    Hybrid,
    Classical,
}

impl ProtectionMode {
    pub const ALL: [ProtectionMode; 3] = [
        ProtectionMode::PurePq,
        ProtectionMode::Hybrid,
        ProtectionMode::Classical,
    ];

    pub fn is_post_quantum(self) -> bool {
        !matches!(self, ProtectionMode::Classical)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProtectionMode::PurePq => "PURE_PQ",
            ProtectionMode::Hybrid => "HYBRID",
            ProtectionMode::Classical => "CLASSICAL",
        }
    }

    /// Key-exchange groups offered in preference order.
    pub fn offered_groups(self) -> Vec<&'static str> {
        match self {
            ProtectionMode::PurePq => alloc::vec![registry::ML_KEM_768],
            ProtectionMode::Hybrid => {
                alloc::vec![registry::X_WING, registry::ML_KEM_768, registry::X25519]
            }
            ProtectionMode::Classical => alloc::vec![registry::X25519],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteProfile {
    pub name: String,
    pub mode: ProtectionMode,
    pub kem: AlgorithmId,
    pub sig: AlgorithmId,
    pub aead: AlgorithmId,
    pub hash: AlgorithmId,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProfileOptions {
    /// Admits the TEST-ONLY size-class signatures.
    pub comparison_mode: bool,
}

impl SuiteProfile {
    pub fn new(
        name: &str,
        mode: ProtectionMode,
        kem: &str,
        sig_alg: &str,
        aead: &str,
        hash: &str,
    ) -> Result<Self> {
        Self::with_options(
            name,
            mode,
            kem,
            sig_alg,
            aead,
            hash,
            ProfileOptions::default(),
        )
    }

    pub fn with_options(
        name: &str,
        mode: ProtectionMode,
        kem: &str,
        sig_alg: &str,
        aead: &str,
        hash: &str,
        opts: ProfileOptions,
    ) -> Result<Self> {
        let kem = registry::lookup_kind(AlgorithmKind::Kem, kem)?.id;
        if sizeclass::is_test_only(sig_alg) && !opts.comparison_mode {
            return Err(CryptoError::TestOnly(sig_alg.to_string()));
        }
        let sig_id = sig::descriptor(sig_alg)?.id;
        let aead_d = registry::lookup_kind(AlgorithmKind::Aead, aead)?;
        let hash = registry::lookup_kind(AlgorithmKind::Hash, hash)?.id;
        let params = aead_d.aead_params().expect("AEAD descriptor");
        if mode.is_post_quantum() && params.key_bytes != 32 {
            return Err(CryptoError::WeakAead {
                profile: name.to_string(),
                key_bits: params.key_bytes * 8,
            });
        }
        Ok(SuiteProfile {
            name: name.to_string(),
            mode,
            kem,
            sig: sig_id,
            aead: aead_d.id,
            hash,
        })
    }

    /// The fixed AES-256-GCM + SHA-384 suite for `mode`.
    pub fn standard(mode: ProtectionMode) -> Self {
        let (kem, sig_alg) = match mode {
            ProtectionMode::PurePq => (registry::ML_KEM_768, registry::ML_DSA_65),
            ProtectionMode::Hybrid => (registry::X_WING, registry::ED448_ML_DSA_65),
            ProtectionMode::Classical => (registry::X25519, registry::ED448),
        };
        Self::new(
            mode.as_str(),
            mode,
            kem,
            sig_alg,
            registry::AES_256_GCM,
            registry::SHA_384,
        )
        .expect("standard suite")
    }
}
