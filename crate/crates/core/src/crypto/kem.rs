//! Seed-driven KEM interface over ML-KEM, X25519, ECP-384 and X-Wing.
//!
//! Diffie-Hellman groups are presented as KEMs: the keygen seed is the static
//! secret, the encaps seed is the ephemeral secret and the ciphertext is the
//! ephemeral public key.

use alloc::vec::Vec;

use zeroize::Zeroizing;

use super::classical::{ecp384, x25519};
use super::registry::{self, AlgorithmDescriptor, AlgorithmId, AlgorithmKind};
use super::{mlkem, CryptoError, Result};
use crate::hybrid::xwing;

pub struct KemKeyPair {
    pub algorithm: AlgorithmId,
    pub public_key: Vec<u8>,
    secret_key: Zeroizing<Vec<u8>>,
    pub origin_seed_len: usize,
}

impl KemKeyPair {
    pub fn secret_key(&self) -> &[u8] {
        &self.secret_key
    }
}

impl core::fmt::Debug for KemKeyPair {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("KemKeyPair")
            .field("algorithm", &self.algorithm.name)
            .field("public_key_len", &self.public_key.len())
            .finish_non_exhaustive()
    }
}

fn descriptor(alg: &str) -> Result<&'static AlgorithmDescriptor> {
    let d = registry::lookup_kind(AlgorithmKind::Kem, alg)?;
    if !d.available {
        return Err(CryptoError::Unavailable(d.id.name));
    }
    Ok(d)
}

fn fixed<const N: usize>(alg: &'static str, seed: &[u8]) -> Result<[u8; N]> {
    seed.try_into().map_err(|_| CryptoError::BadSeedLength {
        alg,
        expected: N,
        got: seed.len(),
    })
}

fn check_len(alg: &'static str, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() == expected {
        Ok(())
    } else {
        Err(CryptoError::BadKeyLength {
            alg,
            expected,
            got: bytes.len(),
        })
    }
}

fn check_ct(alg: &'static str, ct: &[u8], expected: usize) -> Result<()> {
    if ct.len() == expected {
        Ok(())
    } else {
        Err(CryptoError::BadCiphertextLength {
            alg,
            expected,
            got: ct.len(),
        })
    }
}

fn nonzero(alg: &'static str, ss: [u8; 32]) -> Result<Vec<u8>> {
    if ss.iter().all(|&b| b == 0) {
        return Err(CryptoError::InvalidKey(alg));
    }
    Ok(ss.to_vec())
}

pub fn kem_keygen(alg: &str, seed: &[u8]) -> Result<KemKeyPair> {
    let d = descriptor(alg)?;
    let name = d.id.name;
    let (pk, sk) = match name {
        registry::X25519 => {
            let s: [u8; 32] = fixed(name, seed)?;
            (x25519::public_key(&s).to_vec(), s.to_vec())
        }
        registry::ECP_384 => {
            let s: [u8; 48] = fixed(name, seed)?;
            (ecp384::public_key(&s)?, s.to_vec())
        }
        registry::X_WING => {
            let s: [u8; 32] = fixed(name, seed)?;
            xwing::keygen(&s)
        }
        _ => {
            let p = mlkem::Params::by_name(name).ok_or(CryptoError::Unavailable(name))?;
            let s: [u8; 64] = fixed(name, seed)?;
            mlkem::keygen(&p, &s)
        }
    };
    Ok(KemKeyPair {
        algorithm: d.id,
        public_key: pk,
        secret_key: Zeroizing::new(sk),
        origin_seed_len: seed.len(),
    })
}

/// Returns `(ciphertext, shared_secret)`.
pub fn kem_encaps(alg: &str, public_key: &[u8], seed: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    let d = descriptor(alg)?;
    let name = d.id.name;
    let sizes = d.kem_sizes().expect("KEM descriptor");
    check_len(name, public_key, sizes.public_key_bytes)?;
    match name {
        registry::X25519 => {
            let e: [u8; 32] = fixed(name, seed)?;
            let ss = x25519::diffie_hellman(&e, public_key)?;
            Ok((x25519::public_key(&e).to_vec(), nonzero(name, ss)?))
        }
        registry::ECP_384 => {
            let e: [u8; 48] = fixed(name, seed)?;
            let ss = ecp384::diffie_hellman(&e, public_key)?;
            Ok((ecp384::public_key(&e)?, ss.to_vec()))
        }
        registry::X_WING => {
            let e: [u8; 32] = fixed(name, seed)?;
            let (ct, ss) = xwing::encaps(public_key, &e)?;
            Ok((ct, ss.to_vec()))
        }
        _ => {
            let p = mlkem::Params::by_name(name).ok_or(CryptoError::Unavailable(name))?;
            let m: [u8; 32] = fixed(name, seed)?;
            let (ct, ss) = mlkem::encaps(&p, public_key, &m)?;
            Ok((ct, ss.to_vec()))
        }
    }
}

pub fn kem_decaps(alg: &str, secret_key: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>> {
    let d = descriptor(alg)?;
    let name = d.id.name;
    let sizes = d.kem_sizes().expect("KEM descriptor");
    check_len(name, secret_key, sizes.secret_key_bytes)?;
    check_ct(name, ciphertext, sizes.ciphertext_bytes)?;
    match name {
        registry::X25519 => {
            let s: [u8; 32] = secret_key.try_into().expect("checked");
            nonzero(name, x25519::diffie_hellman(&s, ciphertext)?)
        }
        registry::ECP_384 => {
            let s: [u8; 48] = secret_key.try_into().expect("checked");
            Ok(ecp384::diffie_hellman(&s, ciphertext)?.to_vec())
        }
        registry::X_WING => Ok(xwing::decaps(secret_key, ciphertext)?.to_vec()),
        _ => {
            let p = mlkem::Params::by_name(name).ok_or(CryptoError::Unavailable(name))?;
            Ok(mlkem::decaps(&p, secret_key, ciphertext)?.to_vec())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ml_kem_768_keygen_sizes_and_determinism() {
        let a = kem_keygen(registry::ML_KEM_768, &[1u8; 64]).unwrap();
        let b = kem_keygen(registry::ML_KEM_768, &[1u8; 64]).unwrap();
        assert_eq!(a.public_key.len(), 1184);
        assert_eq!(a.secret_key().len(), 2400);
        assert_eq!(a.public_key, b.public_key);
        assert_eq!(a.secret_key(), b.secret_key());
    }

    #[test]
    fn wrong_seed_length() {
        assert!(matches!(
            kem_keygen(registry::ML_KEM_768, &[0u8; 32]),
            Err(CryptoError::BadSeedLength {
                expected: 64,
                got: 32,
                ..
            })
        ));
    }

    #[test]
    fn distinct_encaps_seeds_give_distinct_ciphertexts() {
        let kp = kem_keygen(registry::ML_KEM_768, &[2u8; 64]).unwrap();
        let (c1, s1) = kem_encaps(registry::ML_KEM_768, &kp.public_key, &[3u8; 32]).unwrap();
        let (c2, _) = kem_encaps(registry::ML_KEM_768, &kp.public_key, &[4u8; 32]).unwrap();
        assert_eq!((c1.len(), s1.len()), (1088, 32));
        assert_ne!(c1, c2);
    }

    #[test]
    fn tamper_and_truncation() {
        let kp = kem_keygen(registry::ML_KEM_768, &[5u8; 64]).unwrap();
        let (mut ct, ss) = kem_encaps(registry::ML_KEM_768, &kp.public_key, &[6u8; 32]).unwrap();
        ct[17] ^= 4;
        assert_ne!(
            kem_decaps(registry::ML_KEM_768, kp.secret_key(), &ct).unwrap(),
            ss
        );
        assert!(matches!(
            kem_decaps(registry::ML_KEM_768, kp.secret_key(), &ct[..1000]),
            Err(CryptoError::BadCiphertextLength { .. })
        ));
    }

    #[test]
    fn dh_groups_round_trip() {
        for (alg, ks, es) in [(registry::X25519, 32, 32), (registry::ECP_384, 48, 48)] {
            let kp = kem_keygen(alg, &alloc::vec![7u8; ks]).unwrap();
            let (ct, ss) = kem_encaps(alg, &kp.public_key, &alloc::vec![8u8; es]).unwrap();
            assert_eq!(kem_decaps(alg, kp.secret_key(), &ct).unwrap(), ss);
        }
    }

    #[test]
    fn unavailable_group() {
        assert_eq!(
            kem_keygen(registry::MODP_2048, &[0u8; 256]).unwrap_err(),
            CryptoError::Unavailable("MODP-2048")
        );
    }
}
