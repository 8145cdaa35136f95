//! Known-answer tests against vectors produced by an independent Python
//! implementation (see `kat/generate.py`).

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use qran_core::crypto::classical::{ed25519, ed448, x25519};
use qran_core::crypto::hash::{hkdf_expand, hkdf_extract, HashAlg};
use qran_core::crypto::{aead, mldsa, mlkem};

type Record = HashMap<String, Vec<u8>>;

fn load(name: &str) -> Vec<Record> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/kat")
        .join(name);
    let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut out = Vec::new();
    let mut cur = Record::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("alg=") {
            continue;
        }
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let (k, v) = line.split_once('=').expect("key=value");
        cur.insert(k.to_string(), hex::decode(v).expect("hex"));
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    assert!(!out.is_empty(), "{name} has no records");
    out
}

fn arr<const N: usize>(v: &[u8]) -> [u8; N] {
    v.try_into().expect("fixed-size field")
}

fn check_mlkem(p: &mlkem::Params) {
    for (i, r) in load(&format!("{}.kat", p.name)).iter().enumerate() {
        let (ek, dk) = mlkem::keygen(p, &arr(&r["seed"]));
        assert_eq!(ek, r["pk"], "{} #{i} pk", p.name);
        assert_eq!(dk, r["sk"], "{} #{i} sk", p.name);
        let (ct, ss) = mlkem::encaps(p, &ek, &arr(&r["eseed"])).unwrap();
        assert_eq!(ct, r["ct"], "{} #{i} ct", p.name);
        assert_eq!(ss.as_slice(), r["ss"].as_slice(), "{} #{i} ss", p.name);
        assert_eq!(mlkem::decaps(p, &dk, &ct).unwrap(), ss);
    }
    for (i, r) in load(&format!("{}-reject.kat", p.name)).iter().enumerate() {
        let ss = mlkem::decaps(p, &r["sk"], &r["ct"]).unwrap();
        assert_eq!(ss.as_slice(), r["ss"].as_slice(), "{} reject #{i}", p.name);
    }
}

#[test]
fn ml_kem_512() {
    check_mlkem(&mlkem::ML_KEM_512);
}

#[test]
fn ml_kem_768() {
    check_mlkem(&mlkem::ML_KEM_768);
}

#[test]
fn ml_kem_1024() {
    check_mlkem(&mlkem::ML_KEM_1024);
}

fn check_mldsa(p: &mldsa::Params) {
    for (i, r) in load(&format!("{}.kat", p.name)).iter().enumerate() {
        let (pk, sk) = mldsa::keygen(p, &arr(&r["seed"]));
        assert_eq!(pk, r["pk"], "{} #{i} pk", p.name);
        assert_eq!(sk, r["sk"], "{} #{i} sk", p.name);
        let rnd: Option<[u8; 32]> = r.get("rnd").map(|v| arr(v));
        let sig = mldsa::sign(p, &sk, &r["msg"], &r["ctx"], rnd.as_ref()).unwrap();
        assert_eq!(sig, r["sig"], "{} #{i} sig", p.name);
        assert!(mldsa::verify(p, &pk, &r["msg"], &r["ctx"], &sig));
        let mut bad = sig.clone();
        bad[i % 16] ^= 0x80;
        assert!(!mldsa::verify(p, &pk, &r["msg"], &r["ctx"], &bad));
    }
}

#[test]
fn ml_dsa_44() {
    check_mldsa(&mldsa::ML_DSA_44);
}

#[test]
fn ml_dsa_65() {
    check_mldsa(&mldsa::ML_DSA_65);
}

#[test]
fn ml_dsa_87() {
    check_mldsa(&mldsa::ML_DSA_87);
}

#[test]
fn ed448_vectors() {
    for r in load("Ed448.kat") {
        let seed: [u8; 57] = arr(&r["seed"]);
        assert_eq!(ed448::public_key(&seed).as_slice(), r["pk"].as_slice());
        let sig = ed448::sign(&seed, &r["ctx"], &r["msg"]).unwrap();
        assert_eq!(sig.as_slice(), r["sig"].as_slice());
        assert!(ed448::verify(&r["pk"], &r["ctx"], &r["msg"], &sig));
    }
}

#[test]
fn ed25519_vectors() {
    for r in load("Ed25519.kat") {
        let seed: [u8; 32] = arr(&r["seed"]);
        assert_eq!(ed25519::public_key(&seed).as_slice(), r["pk"].as_slice());
        let sig = ed25519::sign(&seed, &r["msg"]);
        assert_eq!(sig.as_slice(), r["sig"].as_slice());
        assert!(ed25519::verify(&r["pk"], &r["msg"], &sig));
    }
}

#[test]
fn x25519_vectors() {
    for r in load("X25519.kat") {
        let a: [u8; 32] = arr(&r["seed"]);
        let e: [u8; 32] = arr(&r["eseed"]);
        assert_eq!(x25519::public_key(&a).as_slice(), r["pk"].as_slice());
        assert_eq!(x25519::public_key(&e).as_slice(), r["ct"].as_slice());
        assert_eq!(
            x25519::diffie_hellman(&a, &r["ct"]).unwrap().as_slice(),
            r["ss"].as_slice()
        );
    }
}

#[test]
fn aes_256_gcm_vectors() {
    for r in load("AES-256-GCM.kat") {
        let ct = aead::seal(&r["key"], &r["nonce"], &r["aad"], &r["msg"]).unwrap();
        assert_eq!(ct, r["ct"]);
        assert_eq!(
            aead::open(&r["key"], &r["nonce"], &r["aad"], &ct).unwrap(),
            r["msg"]
        );
    }
}

#[test]
fn hkdf_vectors() {
    for (file, alg) in [
        ("HKDF-SHA-384.kat", HashAlg::Sha384),
        ("HKDF-SHA-256.kat", HashAlg::Sha256),
    ] {
        for r in load(file) {
            let prk = hkdf_extract(alg, &r["salt"], &r["ikm"]);
            assert_eq!(prk, r["prk"], "{file}");
            let okm = hkdf_expand(alg, &prk, &r["info"], r["okm"].len()).unwrap();
            assert_eq!(okm, r["okm"], "{file}");
        }
    }
}
