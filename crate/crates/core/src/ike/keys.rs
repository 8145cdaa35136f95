//! Key schedule. The PRF is HMAC-SHA-384 throughout.

use alloc::vec::Vec;
use zeroize::Zeroizing;

use crate::crypto::hash::{hmac_sha384, SHA384_LEN};

pub const SK_E_LEN: usize = 36;
const SALT_LEN: usize = 4;
const KEY_LEN: usize = 32;

pub fn prf(key: &[u8], parts: &[&[u8]]) -> [u8; SHA384_LEN] {
    hmac_sha384(key, parts)
}

/// `T1 | T2 | ...` with `Tn = prf(K, Tn-1 | S | n)`.
pub fn prf_plus(key: &[u8], seed: &[u8], len: usize) -> Vec<u8> {
    assert!(len <= 255 * SHA384_LEN, "prf+ output too long");
    let mut out = Vec::with_capacity(len + SHA384_LEN);
    let mut t: Vec<u8> = Vec::new();
    let mut n = 1u8;
    while out.len() < len {
        let block = prf(key, &[&t, seed, &[n]]);
        t = block.to_vec();
        out.extend_from_slice(&block);
        n = n.wrapping_add(1);
    }
    out.truncate(len);
    out
}

/// SK_d, encryption keys (32-byte AES-256-GCM key plus 4-byte salt) and the
/// AUTH keys. SK payloads are AEAD-protected, so there is no SK_a.
#[derive(Clone, PartialEq, Eq)]
pub struct IkeKeys {
    pub sk_d: Zeroizing<Vec<u8>>,
    pub sk_ei: Zeroizing<Vec<u8>>,
    pub sk_er: Zeroizing<Vec<u8>>,
    pub sk_pi: Zeroizing<Vec<u8>>,
    pub sk_pr: Zeroizing<Vec<u8>>,
}

impl core::fmt::Debug for IkeKeys {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("IkeKeys(..)")
    }
}

pub fn skeyseed(ni: &[u8], nr: &[u8], shared: &[u8]) -> [u8; SHA384_LEN] {
    let mut k = Vec::with_capacity(ni.len() + nr.len());
    k.extend_from_slice(ni);
    k.extend_from_slice(nr);
    prf(&k, &[shared])
}

pub fn derive_ike_keys(skeyseed: &[u8], ni: &[u8], nr: &[u8], spi_i: u64, spi_r: u64) -> IkeKeys {
    let mut seed = Vec::new();
    seed.extend_from_slice(ni);
    seed.extend_from_slice(nr);
    seed.extend_from_slice(&spi_i.to_be_bytes());
    seed.extend_from_slice(&spi_r.to_be_bytes());
    let total = SHA384_LEN * 3 + SK_E_LEN * 2;
    let km = Zeroizing::new(prf_plus(skeyseed, &seed, total));
    let mut at = 0;
    let mut take = |n: usize| {
        let v = Zeroizing::new(km[at..at + n].to_vec());
        at += n;
        v
    };
    let sk_d = take(SHA384_LEN);
    let sk_ei = take(SK_E_LEN);
    let sk_er = take(SK_E_LEN);
    let sk_pi = take(SHA384_LEN);
    let sk_pr = take(SHA384_LEN);
    IkeKeys {
        sk_d,
        sk_ei,
        sk_er,
        sk_pi,
        sk_pr,
    }
}

/// Folds an IKE_INTERMEDIATE KEM secret: `SKEYSEED' = prf(SK_d, ss | Ni | Nr)`.
pub fn fold_intermediate(
    prev: &IkeKeys,
    ss_kem: &[u8],
    ni: &[u8],
    nr: &[u8],
    spi_i: u64,
    spi_r: u64,
) -> IkeKeys {
    let seed = prf(&prev.sk_d, &[ss_kem, ni, nr]);
    derive_ike_keys(&seed, ni, nr, spi_i, spi_r)
}

/// Mixes a PPK into SK_d and both AUTH keys.
pub fn apply_ppk(keys: &IkeKeys, ppk: &[u8]) -> IkeKeys {
    IkeKeys {
        sk_d: Zeroizing::new(prf_plus(ppk, &keys.sk_d, SHA384_LEN)),
        sk_ei: keys.sk_ei.clone(),
        sk_er: keys.sk_er.clone(),
        sk_pi: Zeroizing::new(prf_plus(ppk, &keys.sk_pi, SHA384_LEN)),
        sk_pr: Zeroizing::new(prf_plus(ppk, &keys.sk_pr, SHA384_LEN)),
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct DirectionKeys {
    pub key: Zeroizing<[u8; KEY_LEN]>,
    pub salt: [u8; SALT_LEN],
}

impl DirectionKeys {
    pub fn from_bytes(b: &[u8]) -> Self {
        let mut key = Zeroizing::new([0u8; KEY_LEN]);
        key.copy_from_slice(&b[..KEY_LEN]);
        let mut salt = [0u8; SALT_LEN];
        salt.copy_from_slice(&b[KEY_LEN..KEY_LEN + SALT_LEN]);
        DirectionKeys { key, salt }
    }

    pub fn nonce(&self, iv: u64) -> [u8; 12] {
        let mut n = [0u8; 12];
        n[..4].copy_from_slice(&self.salt);
        n[4..].copy_from_slice(&iv.to_be_bytes());
        n
    }
}

impl core::fmt::Debug for DirectionKeys {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("DirectionKeys(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildKeys {
    pub i_to_r: DirectionKeys,
    pub r_to_i: DirectionKeys,
}

/// `KEYMAT = prf+(SK_d, [ss |] Ni | Nr)`, initiator-to-responder keys first.
pub fn child_keymat(sk_d: &[u8], ss: Option<&[u8]>, ni: &[u8], nr: &[u8]) -> ChildKeys {
    let mut seed = Vec::new();
    if let Some(ss) = ss {
        seed.extend_from_slice(ss);
    }
    seed.extend_from_slice(ni);
    seed.extend_from_slice(nr);
    let km = Zeroizing::new(prf_plus(sk_d, &seed, 2 * SK_E_LEN));
    ChildKeys {
        i_to_r: DirectionKeys::from_bytes(&km[..SK_E_LEN]),
        r_to_i: DirectionKeys::from_bytes(&km[SK_E_LEN..]),
    }
}

/// Everything needed to recompute the first child SA: the public transcript
/// values plus the asymmetric shared secrets. The PPK is not included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyInputs {
    pub ni: Vec<u8>,
    pub nr: Vec<u8>,
    pub spi_i: u64,
    pub spi_r: u64,
    pub dh_shared: Vec<u8>,
    pub kem_shared: Option<Vec<u8>>,
}

pub fn recompute_child_keys(inputs: &KeyInputs, ppk: Option<&[u8]>) -> ChildKeys {
    let seed = skeyseed(&inputs.ni, &inputs.nr, &inputs.dh_shared);
    let mut keys = derive_ike_keys(&seed, &inputs.ni, &inputs.nr, inputs.spi_i, inputs.spi_r);
    if let Some(ss) = &inputs.kem_shared {
        keys = fold_intermediate(
            &keys,
            ss,
            &inputs.ni,
            &inputs.nr,
            inputs.spi_i,
            inputs.spi_r,
        );
    }
    if let Some(ppk) = ppk {
        keys = apply_ppk(&keys, ppk);
    }
    child_keymat(&keys.sk_d, None, &inputs.ni, &inputs.nr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prf_plus_is_prefix_stable() {
        let a = prf_plus(b"k", b"seed", 100);
        let b = prf_plus(b"k", b"seed", 40);
        assert_eq!(&a[..40], &b[..]);
        assert_eq!(&a[..48], &prf(b"k", &[b"seed", &[1]])[..]);
    }

    #[test]
    fn frozen_vector() {
        // Independent HMAC-SHA-384 computation of the same construction.
        let ks = derive_ike_keys(
            &skeyseed(&[1; 32], &[2; 32], &[3; 32]),
            &[1; 32],
            &[2; 32],
            7,
            9,
        );
        assert_eq!(
            hex::encode(&ks.sk_d[..]),
            "444281138c2678a21c8b2ac0490d20704d2acee6e3c9276de30d9aaef6ebb17c9d84c1f128cf2f980960c5b84a11981e"
        );
        let c = child_keymat(&ks.sk_d, None, &[1; 32], &[2; 32]);
        assert_eq!(
            hex::encode(&c.i_to_r.key[..]),
            "159a0692b7052e5257440ebf74d6400eb296f74efa18caf0e45a8964ddca7f93"
        );
    }

    #[test]
    fn kem_folding_changes_sk_d() {
        let base = derive_ike_keys(&[5; 48], &[1; 32], &[2; 32], 1, 2);
        let a = fold_intermediate(&base, &[0xaa; 32], &[1; 32], &[2; 32], 1, 2);
        let b = fold_intermediate(&base, &[0xab; 32], &[1; 32], &[2; 32], 1, 2);
        assert_ne!(a.sk_d, b.sk_d);
        assert_ne!(a.sk_d, base.sk_d);
    }

    #[test]
    fn directions_differ() {
        let c = child_keymat(&[9; 48], None, &[1; 32], &[2; 32]);
        assert_ne!(c.i_to_r, c.r_to_i);
    }
}
