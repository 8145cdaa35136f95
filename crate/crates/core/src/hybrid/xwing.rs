//! X-Wing: X25519 and ML-KEM-768 under a SHA3-256 combiner.
//!
//! The ML-KEM ciphertext is not hashed into the combiner; the classical
//! ciphertext and public key are.

use alloc::vec::Vec;

use sha3::digest::XofReader;

use crate::crypto::classical::x25519;
use crate::crypto::hash::{sha3_256, shake256, shake256_reader};
use crate::crypto::{mlkem, CryptoError, Result};

pub const LABEL: [u8; 6] = *b"\\.//^\\";

const ML: mlkem::Params = mlkem::ML_KEM_768;
const PK_M: usize = ML.encaps_key_len();
const SK_M: usize = ML.decaps_key_len();
const CT_M: usize = ML.ciphertext_len();

pub const PUBLIC_KEY_LEN: usize = PK_M + 32;
pub const SECRET_KEY_LEN: usize = SK_M + 32 + 32;
pub const CIPHERTEXT_LEN: usize = CT_M + 32;
pub const SEED_LEN: usize = 32;

/// Component values behind one encapsulation, for transcript replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncapsTrace {
    pub ss_pq: [u8; 32],
    pub ss_classical: [u8; 32],
    pub ct_classical: [u8; 32],
    pub pk_classical: [u8; 32],
}

pub fn combiner(
    ss_pq: &[u8; 32],
    ss_classical: &[u8; 32],
    ct_classical: &[u8; 32],
    pk_classical: &[u8; 32],
) -> [u8; 32] {
    sha3_256(&[&LABEL, ss_pq, ss_classical, ct_classical, pk_classical])
}

/// `sk = sk_M || sk_X || pk_X`, `pk = pk_M || pk_X`.
pub fn keygen(seed: &[u8; 32]) -> (Vec<u8>, Vec<u8>) {
    let expanded = shake256(&[seed], 96);
    let mut d_z = [0u8; 64];
    d_z.copy_from_slice(&expanded[..64]);
    let (pk_m, sk_m) = mlkem::keygen(&ML, &d_z);
    let mut sk_x = [0u8; 32];
    sk_x.copy_from_slice(&expanded[64..]);
    let pk_x = x25519::public_key(&sk_x);

    let mut pk = pk_m;
    pk.extend_from_slice(&pk_x);
    let mut sk = sk_m;
    sk.extend_from_slice(&sk_x);
    sk.extend_from_slice(&pk_x);
    (pk, sk)
}

fn split32(b: &[u8]) -> [u8; 32] {
    b.try_into().expect("32-byte slice")
}

pub fn encaps_traced(pk: &[u8], seed: &[u8; 32]) -> Result<(Vec<u8>, [u8; 32], EncapsTrace)> {
    if pk.len() != PUBLIC_KEY_LEN {
        return Err(CryptoError::BadKeyLength {
            alg: "X-Wing",
            expected: PUBLIC_KEY_LEN,
            got: pk.len(),
        });
    }
    let (pk_m, pk_x) = pk.split_at(PK_M);
    let mut xof = shake256_reader(&[b"X-Wing encaps", seed]);
    let mut m = [0u8; 32];
    let mut ek_x = [0u8; 32];
    xof.read(&mut m);
    xof.read(&mut ek_x);

    let (ct_m, ss_m) = mlkem::encaps(&ML, pk_m, &m)?;
    let ct_x = x25519::public_key(&ek_x);
    let ss_x = x25519::diffie_hellman(&ek_x, pk_x)?;
    let trace = EncapsTrace {
        ss_pq: ss_m,
        ss_classical: ss_x,
        ct_classical: ct_x,
        pk_classical: split32(pk_x),
    };
    let ss = combiner(
        &trace.ss_pq,
        &trace.ss_classical,
        &trace.ct_classical,
        &trace.pk_classical,
    );
    let mut ct = ct_m;
    ct.extend_from_slice(&ct_x);
    Ok((ct, ss, trace))
}

pub fn encaps(pk: &[u8], seed: &[u8; 32]) -> Result<(Vec<u8>, [u8; 32])> {
    encaps_traced(pk, seed).map(|(ct, ss, _)| (ct, ss))
}

pub fn decaps(sk: &[u8], ct: &[u8]) -> Result<[u8; 32]> {
    if sk.len() != SECRET_KEY_LEN {
        return Err(CryptoError::BadKeyLength {
            alg: "X-Wing",
            expected: SECRET_KEY_LEN,
            got: sk.len(),
        });
    }
    if ct.len() != CIPHERTEXT_LEN {
        return Err(CryptoError::BadCiphertextLength {
            alg: "X-Wing",
            expected: CIPHERTEXT_LEN,
            got: ct.len(),
        });
    }
    let (sk_m, rest) = sk.split_at(SK_M);
    let sk_x = split32(&rest[..32]);
    let pk_x = split32(&rest[32..]);
    let (ct_m, ct_x) = ct.split_at(CT_M);
    let ss_m = mlkem::decaps(&ML, sk_m, ct_m)?;
    let ss_x = x25519::diffie_hellman(&sk_x, ct_x)?;
    Ok(combiner(&ss_m, &ss_x, &split32(ct_x), &pk_x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let (pk, sk) = keygen(&[1u8; 32]);
        assert_eq!((pk.len(), sk.len()), (1216, 2464));
        let (ct, _) = encaps(&pk, &[2u8; 32]).unwrap();
        assert_eq!(ct.len(), 1120);
    }

    #[test]
    fn tamper_either_half() {
        let (pk, sk) = keygen(&[3u8; 32]);
        let (ct, ss) = encaps(&pk, &[4u8; 32]).unwrap();
        assert_eq!(decaps(&sk, &ct).unwrap(), ss);
        for idx in [5, CT_M + 5] {
            let mut bad = ct.clone();
            bad[idx] ^= 1;
            assert_ne!(decaps(&sk, &bad).unwrap(), ss);
        }
    }
}
