//! AES-256-GCM, the only AEAD admitted by post-quantum profiles.

use alloc::vec::Vec;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};

use super::registry::AeadParams;
use super::{CryptoError, Result};

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

pub const AES_256_GCM_PARAMS: AeadParams = AeadParams {
    key_bytes: KEY_LEN,
    nonce_bytes: NONCE_LEN,
    tag_bytes: TAG_LEN,
    max_records_per_key: 1 << 24,
};

fn nonce(n: &[u8]) -> Result<Nonce<aes_gcm::aead::consts::U12>> {
    let n: [u8; NONCE_LEN] = n.try_into().map_err(|_| CryptoError::BadNonceLength)?;
    Ok(n.into())
}

fn cipher(key: &[u8]) -> Result<Aes256Gcm> {
    Aes256Gcm::new_from_slice(key).map_err(|_| CryptoError::BadKeyLength {
        alg: "AES-256-GCM",
        expected: KEY_LEN,
        got: key.len(),
    })
}

/// One-shot seal; returns ciphertext with the 16-byte tag appended.
pub fn seal(key: &[u8], nonce: &[u8], aad: &[u8], plaintext: &[u8]) -> Result<Vec<u8>> {
    cipher(key)?
        .encrypt(
            &self::nonce(nonce)?,
            Payload {
                msg: plaintext,
                aad,
            },
        )
        .map_err(|_| CryptoError::AuthenticationFailure)
}

pub fn open(key: &[u8], nonce: &[u8], aad: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>> {
    cipher(key)?
        .decrypt(
            &self::nonce(nonce)?,
            Payload {
                msg: ciphertext,
                aad,
            },
        )
        .map_err(|_| CryptoError::AuthenticationFailure)
}

/// A key that counts how many records it has sealed.
pub struct AeadKey {
    cipher: Aes256Gcm,
    sealed: u64,
    budget: u64,
}

impl core::fmt::Debug for AeadKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("AeadKey")
            .field("sealed", &self.sealed)
            .field("budget", &self.budget)
            .finish()
    }
}

impl AeadKey {
    pub fn new(key: &[u8]) -> Result<Self> {
        Self::with_budget(key, AES_256_GCM_PARAMS.max_records_per_key)
    }

    pub fn with_budget(key: &[u8], budget: u64) -> Result<Self> {
        Ok(AeadKey {
            cipher: cipher(key)?,
            sealed: 0,
            budget,
        })
    }

    pub fn sealed(&self) -> u64 {
        self.sealed
    }

    pub fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.sealed)
    }

    pub fn seal(&mut self, nonce: &[u8], aad: &[u8], plaintext: &[u8]) -> Result<Vec<u8>> {
        if self.sealed >= self.budget {
            return Err(CryptoError::NonceBudgetExceeded);
        }
        let nonce = self::nonce(nonce)?;
        let out = self
            .cipher
            .encrypt(
                &nonce,
                Payload {
                    msg: plaintext,
                    aad,
                },
            )
            .map_err(|_| CryptoError::AuthenticationFailure)?;
        self.sealed += 1;
        Ok(out)
    }

    pub fn open(&self, nonce: &[u8], aad: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>> {
        self.cipher
            .decrypt(
                &self::nonce(nonce)?,
                Payload {
                    msg: ciphertext,
                    aad,
                },
            )
            .map_err(|_| CryptoError::AuthenticationFailure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_empty_aad() {
        let key = [7u8; 32];
        let nonce = [1u8; 12];
        let ct = seal(&key, &nonce, b"", b"hello").unwrap();
        assert_eq!(ct.len(), 5 + TAG_LEN);
        assert_eq!(open(&key, &nonce, b"", &ct).unwrap(), b"hello");
    }

    #[test]
    fn tag_and_aad_tamper() {
        let key = [7u8; 32];
        let nonce = [1u8; 12];
        let mut ct = seal(&key, &nonce, b"hdr", b"payload").unwrap();
        assert_eq!(
            open(&key, &nonce, b"hdx", &ct),
            Err(CryptoError::AuthenticationFailure)
        );
        let last = ct.len() - 1;
        ct[last] ^= 1;
        assert_eq!(
            open(&key, &nonce, b"hdr", &ct),
            Err(CryptoError::AuthenticationFailure)
        );
    }

    #[test]
    fn budget_enforced() {
        let mut k = AeadKey::with_budget(&[0u8; 32], 2).unwrap();
        k.seal(&[0; 12], b"", b"a").unwrap();
        k.seal(&[1; 12], b"", b"b").unwrap();
        assert_eq!(
            k.seal(&[2; 12], b"", b"c"),
            Err(CryptoError::NonceBudgetExceeded)
        );
    }

    #[test]
    fn short_key_rejected() {
        assert!(matches!(
            seal(&[0u8; 16], &[0; 12], b"", b""),
            Err(CryptoError::BadKeyLength { .. })
        ));
    }
}
