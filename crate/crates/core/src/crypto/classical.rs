//! Classical components: X25519, ECDH P-384, Ed448, Ed25519, ECDSA P-384.
//!
//! Thin adapters over the dalek / goldilocks / RustCrypto curve crates, all
//! driven from explicit seeds.

use alloc::vec::Vec;

use super::{CryptoError, Result};

pub mod x25519 {
    use super::*;
    use x25519_dalek::{PublicKey, StaticSecret};

    pub fn public_key(secret: &[u8; 32]) -> [u8; 32] {
        PublicKey::from(&StaticSecret::from(*secret)).to_bytes()
    }

    pub fn diffie_hellman(secret: &[u8; 32], peer: &[u8]) -> Result<[u8; 32]> {
        let peer: [u8; 32] = peer.try_into().map_err(|_| CryptoError::BadKeyLength {
            alg: "X25519",
            expected: 32,
            got: peer.len(),
        })?;
        Ok(StaticSecret::from(*secret)
            .diffie_hellman(&PublicKey::from(peer))
            .to_bytes())
    }
}

pub mod ecp384 {
    use super::*;
    use p384::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
    use p384::{AffinePoint, EncodedPoint, NonZeroScalar, PublicKey, SecretKey};

    fn secret(seed: &[u8]) -> Result<SecretKey> {
        SecretKey::from_slice(seed).map_err(|_| CryptoError::InvalidKey("ECP-384"))
    }

    /// Compressed SEC1 public key (49 bytes).
    pub fn public_key(seed: &[u8; 48]) -> Result<Vec<u8>> {
        Ok(secret(seed)?
            .public_key()
            .to_encoded_point(true)
            .as_bytes()
            .to_vec())
    }

    fn parse_point(bytes: &[u8]) -> Result<PublicKey> {
        let ep = EncodedPoint::from_bytes(bytes).map_err(|_| CryptoError::InvalidKey("ECP-384"))?;
        Option::<AffinePoint>::from(AffinePoint::from_encoded_point(&ep))
            .and_then(|p| PublicKey::from_affine(p).ok())
            .ok_or(CryptoError::InvalidKey("ECP-384"))
    }

    pub fn diffie_hellman(seed: &[u8; 48], peer: &[u8]) -> Result<[u8; 48]> {
        let sk = secret(seed)?;
        let scalar: NonZeroScalar = sk.to_nonzero_scalar();
        let shared = p384::ecdh::diffie_hellman(scalar, parse_point(peer)?.as_affine());
        let mut out = [0u8; 48];
        out.copy_from_slice(shared.raw_secret_bytes());
        Ok(out)
    }

    pub mod ecdsa {
        use super::*;
        use p384::ecdsa::signature::{Signer, Verifier};
        use p384::ecdsa::{Signature, SigningKey, VerifyingKey};

        pub fn public_key(seed: &[u8; 48]) -> Result<Vec<u8>> {
            super::public_key(seed)
        }

        /// Deterministic (RFC 6979) ECDSA with SHA-384; fixed 96-byte `r || s`.
        pub fn sign(seed: &[u8; 48], msg: &[u8]) -> Result<Vec<u8>> {
            let key =
                SigningKey::from_slice(seed).map_err(|_| CryptoError::InvalidKey("ECDSA-P384"))?;
            let sig: Signature = key.sign(msg);
            Ok(sig.to_bytes().to_vec())
        }

        pub fn verify(pk: &[u8], msg: &[u8], sig: &[u8]) -> bool {
            let Ok(vk) = VerifyingKey::from_sec1_bytes(pk) else {
                return false;
            };
            let Ok(sig) = Signature::from_slice(sig) else {
                return false;
            };
            vk.verify(msg, &sig).is_ok()
        }
    }
}

pub mod ed448 {
    use super::*;
    use ed448_goldilocks_plus::{Signature, SigningKey, VerifyingKey};

    pub fn public_key(seed: &[u8; 57]) -> [u8; 57] {
        let sk = SigningKey::try_from(&seed[..]).expect("57-byte seed");
        sk.verifying_key().to_bytes()
    }

    pub fn sign(seed: &[u8; 57], ctx: &[u8], msg: &[u8]) -> Result<[u8; 114]> {
        if ctx.len() > 255 {
            return Err(CryptoError::ContextTooLong(ctx.len()));
        }
        let sk = SigningKey::try_from(&seed[..]).expect("57-byte seed");
        sk.sign_ctx(ctx, msg)
            .map(|s| s.to_bytes())
            .map_err(|_| CryptoError::ContextTooLong(ctx.len()))
    }

    pub fn verify(pk: &[u8], ctx: &[u8], msg: &[u8], sig: &[u8]) -> bool {
        let Ok(pk): core::result::Result<[u8; 57], _> = pk.try_into() else {
            return false;
        };
        let Ok(sig): core::result::Result<[u8; 114], _> = sig.try_into() else {
            return false;
        };
        let Ok(vk) = VerifyingKey::from_bytes(&pk) else {
            return false;
        };
        let Ok(sig) = Signature::from_bytes(&sig) else {
            return false;
        };
        vk.verify_ctx(&sig, ctx, msg).is_ok()
    }
}

pub mod ed25519 {
    use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};

    pub fn public_key(seed: &[u8; 32]) -> [u8; 32] {
        SigningKey::from_bytes(seed).verifying_key().to_bytes()
    }

    pub fn sign(seed: &[u8; 32], msg: &[u8]) -> [u8; 64] {
        SigningKey::from_bytes(seed).sign(msg).to_bytes()
    }

    pub fn verify(pk: &[u8], msg: &[u8], sig: &[u8]) -> bool {
        let Ok(pk): Result<[u8; 32], _> = pk.try_into() else {
            return false;
        };
        let Ok(sig): Result<[u8; 64], _> = sig.try_into() else {
            return false;
        };
        let Ok(vk) = VerifyingKey::from_bytes(&pk) else {
            return false;
        };
        vk.verify_strict(msg, &Signature::from_bytes(&sig)).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x25519_agreement() {
        let a = [1u8; 32];
        let b = [2u8; 32];
        let ab = x25519::diffie_hellman(&a, &x25519::public_key(&b)).unwrap();
        let ba = x25519::diffie_hellman(&b, &x25519::public_key(&a)).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn ecp384_agreement() {
        let a = [3u8; 48];
        let b = [4u8; 48];
        let pa = ecp384::public_key(&a).unwrap();
        assert_eq!(pa.len(), 49);
        let ab = ecp384::diffie_hellman(&a, &ecp384::public_key(&b).unwrap()).unwrap();
        let ba = ecp384::diffie_hellman(&b, &pa).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn ecdsa_round_trip() {
        let seed = [5u8; 48];
        let pk = ecp384::ecdsa::public_key(&seed).unwrap();
        let sig = ecp384::ecdsa::sign(&seed, b"m").unwrap();
        assert_eq!(sig.len(), 96);
        assert!(ecp384::ecdsa::verify(&pk, b"m", &sig));
        assert!(!ecp384::ecdsa::verify(&pk, b"n", &sig));
    }

    #[test]
    fn ed448_context_separates() {
        let seed = [6u8; 57];
        let pk = ed448::public_key(&seed);
        let sig = ed448::sign(&seed, b"A", b"m").unwrap();
        assert!(ed448::verify(&pk, b"A", b"m", &sig));
        assert!(!ed448::verify(&pk, b"B", b"m", &sig));
    }
}
