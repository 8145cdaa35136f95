//! HKDF-SHA-384 key schedule.

use alloc::vec::Vec;
use zeroize::Zeroizing;

use crate::crypto::aead::{KEY_LEN, NONCE_LEN};
use crate::crypto::hash::{self, HashAlg, SHA384_LEN};
use crate::wire::Writer;

pub const SECRET_LEN: usize = SHA384_LEN;
const LABEL_PREFIX: &[u8] = b"qran ";

pub type Secret = Zeroizing<[u8; SECRET_LEN]>;

fn secret_from(v: Vec<u8>) -> Secret {
    let mut s = Zeroizing::new([0u8; SECRET_LEN]);
    s.copy_from_slice(&v);
    s
}

pub fn expand_label(secret: &[u8], label: &str, context: &[u8], len: usize) -> Vec<u8> {
    let mut full = Vec::with_capacity(LABEL_PREFIX.len() + label.len());
    full.extend_from_slice(LABEL_PREFIX);
    full.extend_from_slice(label.as_bytes());
    let mut info = Writer::new();
    info.u16(len as u16).vec8(&full).vec8(context);
    hash::hkdf_expand(HashAlg::Sha384, secret, &info.finish(), len)
        .expect("length within HKDF bound")
}

fn derive_secret(secret: &[u8], label: &str, transcript_hash: &[u8]) -> Secret {
    secret_from(expand_label(secret, label, transcript_hash, SECRET_LEN))
}

#[derive(Clone)]
pub struct TrafficSecrets {
    pub client: Secret,
    pub server: Secret,
}

impl core::fmt::Debug for TrafficSecrets {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("TrafficSecrets(..)")
    }
}

/// AEAD key and static IV for one direction and epoch.
#[derive(Clone)]
pub struct TrafficKeys {
    pub key: Zeroizing<[u8; KEY_LEN]>,
    pub iv: [u8; NONCE_LEN],
}

impl core::fmt::Debug for TrafficKeys {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("TrafficKeys(..)")
    }
}

impl TrafficKeys {
    pub fn from_secret(secret: &[u8]) -> Self {
        let mut key = Zeroizing::new([0u8; KEY_LEN]);
        key.copy_from_slice(&expand_label(secret, "key", &[], KEY_LEN));
        let mut iv = [0u8; NONCE_LEN];
        iv.copy_from_slice(&expand_label(secret, "iv", &[], NONCE_LEN));
        TrafficKeys { key, iv }
    }

    /// `iv XOR (epoch || sequence)`, the 8-byte record number right-aligned.
    pub fn nonce(&self, epoch: u16, seq: u64) -> [u8; NONCE_LEN] {
        let mut n = self.iv;
        let rn = ((epoch as u64) << 48) | (seq & 0xffff_ffff_ffff);
        for (b, x) in n[4..].iter_mut().zip(rn.to_be_bytes()) {
            *b ^= x;
        }
        n
    }
}

pub struct KeySchedule {
    handshake: Secret,
    master: Secret,
}

impl KeySchedule {
    pub fn new(shared_secret: &[u8]) -> Self {
        let hs = secret_from(hash::hkdf_extract(
            HashAlg::Sha384,
            &[0u8; SECRET_LEN],
            shared_secret,
        ));
        let empty = hash::sha384(&[]);
        let derived = derive_secret(&hs[..], "derived", &empty);
        let master = secret_from(hash::hkdf_extract(
            HashAlg::Sha384,
            &derived[..],
            &[0u8; SECRET_LEN],
        ));
        KeySchedule {
            handshake: hs,
            master,
        }
    }

    /// Bound to the transcript through ServerHello.
    pub fn handshake_traffic(&self, transcript_hash: &[u8]) -> TrafficSecrets {
        TrafficSecrets {
            client: derive_secret(&self.handshake[..], "hs client", transcript_hash),
            server: derive_secret(&self.handshake[..], "hs server", transcript_hash),
        }
    }

    /// Bound to the transcript through the server Finished.
    pub fn application_traffic(&self, transcript_hash: &[u8]) -> TrafficSecrets {
        TrafficSecrets {
            client: derive_secret(&self.master[..], "app client", transcript_hash),
            server: derive_secret(&self.master[..], "app server", transcript_hash),
        }
    }
}

impl core::fmt::Debug for KeySchedule {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("KeySchedule(..)")
    }
}

pub fn finished_key(secret: &[u8]) -> Secret {
    secret_from(expand_label(secret, "finished", &[], SECRET_LEN))
}

pub fn finished_mac(secret: &[u8], transcript_hash: &[u8]) -> [u8; SECRET_LEN] {
    hash::hmac_sha384(&finished_key(secret)[..], &[transcript_hash])
}

pub fn next_secret(secret: &[u8]) -> Secret {
    secret_from(expand_label(secret, "update", &[], SECRET_LEN))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(ks: &KeySchedule, th: &[u8]) -> Vec<Vec<u8>> {
        let h = ks.handshake_traffic(th);
        let a = ks.application_traffic(th);
        alloc::vec![
            h.client.to_vec(),
            h.server.to_vec(),
            a.client.to_vec(),
            a.server.to_vec(),
            finished_mac(&h.client[..], th).to_vec(),
            finished_mac(&h.server[..], th).to_vec(),
        ]
    }

    #[test]
    fn agreement_and_label_separation() {
        let th = hash::sha384(&[b"transcript"]);
        let a = all(&KeySchedule::new(&[1; 32]), &th);
        let b = all(&KeySchedule::new(&[1; 32]), &th);
        assert_eq!(a, b);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert_ne!(a[i], a[j]);
            }
        }
    }

    #[test]
    fn transcript_flip_changes_everything() {
        let ks = KeySchedule::new(&[9; 64]);
        let th = hash::sha384(&[b"transcript"]);
        let base = all(&ks, &th);
        for pos in [0, 17, 47] {
            let mut t = th;
            t[pos] ^= 0x80;
            for (x, y) in base.iter().zip(all(&ks, &t)) {
                assert_ne!(x, &y);
            }
        }
    }

    #[test]
    fn frozen_vector() {
        let ks = KeySchedule::new(&[0x42; 32]);
        let th = hash::sha384(&[]);
        let app = ks.application_traffic(&th);
        let hs = ks.handshake_traffic(&th);
        assert_eq!(
            hex::encode(&app.client[..]),
            "ee113b9957d49e9b5c3324a3773853bb4c5c429931f33a3a649d2327c22829757b0153107c2c1d4e8912e79c5a0691c9"
        );
        assert_eq!(
            hex::encode(&hs.client[..]),
            "f13e978b0715368a564029a5202bbc7b45f46f5173f5a3d09f628165815f558587f24eac3a68b7415dad32ab1d8f826b"
        );
        assert_eq!(
            hex::encode(finished_mac(&hs.client[..], &th)),
            "2cb49c56ac3bd251b3c3b2ea352696dc75f4cfd2fbfbadf44ce8d164c37519bf2c7545782a438075d7300a948d457c56"
        );
        let keys = TrafficKeys::from_secret(&app.client[..]);
        assert_eq!(
            hex::encode(&keys.key[..]),
            "374a1aed6316af80fd4362784a6a420785c5db54c4fa58f05a96526fa650af09"
        );
        assert_eq!(hex::encode(keys.iv), "c6b6189f7e6d953fc6d97a24");
        assert_eq!(
            hex::encode(&next_secret(&app.client[..])[..]),
            "00f6f65a4b48642d08dd6b0c944517f6dce8a7ff92a06c1fc442149134b0c2add55b51a713f0cd8070c051a04a47ca76"
        );
    }

    #[test]
    fn nonce_xor() {
        let k = TrafficKeys {
            key: Zeroizing::new([0; 32]),
            iv: [0; 12],
        };
        assert_eq!(k.nonce(1, 2), [0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 2]);
        let k = TrafficKeys {
            key: Zeroizing::new([0; 32]),
            iv: [0xff; 12],
        };
        assert_eq!(k.nonce(0, 0), [0xff; 12]);
    }
}
