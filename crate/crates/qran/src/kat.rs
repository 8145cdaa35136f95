//! Known-answer replay for `.kat` suites.
//!
//! A suite file starts with `alg=NAME`, followed by blank-line separated
//! records of `field=hex` lines. Lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qran_core::crypto::classical::{ed25519, ed448, x25519};
use qran_core::crypto::hash::{hkdf_expand, hkdf_extract, HashAlg};
use qran_core::crypto::{aead, mldsa, mlkem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Record = BTreeMap<String, Vec<u8>>;

#[derive(Debug, Error)]
pub enum KatError {
    #[error("no .kat files under {0}")]
    MissingSuite(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KatFile {
    pub alg: String,
    pub records: Vec<Record>,
}

/// First point at which a vector disagrees with the implementation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KatMismatch {
    pub vector: usize,
    pub field: String,
}

impl std::fmt::Display for KatMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "vector {} diverges at field \"{}\"",
            self.vector, self.field
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KatFileResult {
    pub file: String,
    pub alg: String,
    pub vectors: usize,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<KatMismatch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KatSummary {
    pub files: Vec<KatFileResult>,
    pub vectors: usize,
    pub passed: bool,
}

impl KatSummary {
    pub fn file<'a>(&'a self, alg: &'a str) -> impl Iterator<Item = &'a KatFileResult> {
        self.files.iter().filter(move |f| f.alg == alg)
    }
}

pub fn parse(name: &str, text: &str) -> Result<KatFile, KatError> {
    let err = |line: usize, msg: &str| KatError::Parse {
        file: name.to_string(),
        line: line + 1,
        msg: msg.to_string(),
    };
    let mut alg = None;
    let mut records = Vec::new();
    let mut cur = Record::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !cur.is_empty() {
                records.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(n, "expected key=value"))?;
        if k == "alg" {
            if alg.is_some() {
                return Err(err(n, "duplicate alg line"));
            }
            alg = Some(v.to_string());
            continue;
        }
        let bytes = hex::decode(v).map_err(|_| err(n, "bad hex"))?;
        if cur.insert(k.to_string(), bytes).is_some() {
            return Err(err(n, "duplicate field"));
        }
    }
    if !cur.is_empty() {
        records.push(cur);
    }
    let alg = alg.ok_or_else(|| err(0, "missing alg line"))?;
    Ok(KatFile { alg, records })
}

type Check = Result<(), String>;

fn field<'a>(r: &'a Record, name: &str) -> Result<&'a [u8], String> {
    r.get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| name.to_string())
}

fn fixed<const N: usize>(r: &Record, name: &str) -> Result<[u8; N], String> {
    field(r, name)?.try_into().map_err(|_| name.to_string())
}

fn expect(got: &[u8], r: &Record, name: &str) -> Check {
    if field(r, name)? == got {
        Ok(())
    } else {
        Err(name.to_string())
    }
}

fn holds(ok: bool, name: &str) -> Check {
    if ok {
        Ok(())
    } else {
        Err(name.to_string())
    }
}

fn mlkem_record(p: &mlkem::Params, r: &Record) -> Check {
    if !r.contains_key("seed") {
        let ss = mlkem::decaps(p, field(r, "sk")?, field(r, "ct")?).map_err(|_| "ct")?;
        return expect(&ss[..], r, "ss");
    }
    let (ek, dk) = mlkem::keygen(p, &fixed(r, "seed")?);
    expect(&ek, r, "pk")?;
    expect(&dk, r, "sk")?;
    let (ct, ss) = mlkem::encaps(p, &ek, &fixed(r, "eseed")?).map_err(|_| "pk")?;
    expect(&ct, r, "ct")?;
    expect(&ss[..], r, "ss")?;
    let back = mlkem::decaps(p, &dk, field(r, "ct")?).map_err(|_| "ct")?;
    expect(&back[..], r, "ss")
}

fn mldsa_record(p: &mldsa::Params, r: &Record) -> Check {
    let (pk, sk) = mldsa::keygen(p, &fixed(r, "seed")?);
    expect(&pk, r, "pk")?;
    expect(&sk, r, "sk")?;
    let rnd: Option<[u8; 32]> = match r.get("rnd") {
        Some(_) => Some(fixed(r, "rnd")?),
        None => None,
    };
    let (msg, ctx) = (field(r, "msg")?, field(r, "ctx")?);
    let sig = mldsa::sign(p, &sk, msg, ctx, rnd.as_ref()).map_err(|_| "ctx")?;
    expect(&sig, r, "sig")?;
    holds(mldsa::verify(p, &pk, msg, ctx, field(r, "sig")?), "sig")
}

fn ed448_record(r: &Record) -> Check {
    let seed: [u8; 57] = fixed(r, "seed")?;
    expect(&ed448::public_key(&seed)[..], r, "pk")?;
    let (ctx, msg) = (field(r, "ctx")?, field(r, "msg")?);
    let sig = ed448::sign(&seed, ctx, msg).map_err(|_| "ctx")?;
    expect(&sig[..], r, "sig")?;
    holds(ed448::verify(field(r, "pk")?, ctx, msg, &sig), "sig")
}

fn ed25519_record(r: &Record) -> Check {
    let seed: [u8; 32] = fixed(r, "seed")?;
    expect(&ed25519::public_key(&seed)[..], r, "pk")?;
    let msg = field(r, "msg")?;
    let sig = ed25519::sign(&seed, msg);
    expect(&sig[..], r, "sig")?;
    holds(ed25519::verify(field(r, "pk")?, msg, &sig), "sig")
}

fn x25519_record(r: &Record) -> Check {
    let a: [u8; 32] = fixed(r, "seed")?;
    let e: [u8; 32] = fixed(r, "eseed")?;
    expect(&x25519::public_key(&a)[..], r, "pk")?;
    expect(&x25519::public_key(&e)[..], r, "ct")?;
    let ss = x25519::diffie_hellman(&a, field(r, "ct")?).map_err(|_| "ct")?;
    expect(&ss[..], r, "ss")
}

fn aes_gcm_record(r: &Record) -> Check {
    let (key, nonce, aad) = (field(r, "key")?, field(r, "nonce")?, field(r, "aad")?);
    let ct = aead::seal(key, nonce, aad, field(r, "msg")?).map_err(|_| "key")?;
    expect(&ct, r, "ct")?;
    let pt = aead::open(key, nonce, aad, field(r, "ct")?).map_err(|_| "ct")?;
    expect(&pt, r, "msg")
}

fn hkdf_record(alg: HashAlg, r: &Record) -> Check {
    let prk = hkdf_extract(alg, field(r, "salt")?, field(r, "ikm")?);
    expect(&prk, r, "prk")?;
    let want = field(r, "okm")?.len();
    let okm = hkdf_expand(alg, field(r, "prk")?, field(r, "info")?, want).map_err(|_| "okm")?;
    expect(&okm, r, "okm")
}

fn checker(alg: &str) -> Option<fn(&Record) -> Check> {
    let f: fn(&Record) -> Check = match alg {
        "ML-KEM-512" => |r| mlkem_record(&mlkem::ML_KEM_512, r),
        "ML-KEM-768" => |r| mlkem_record(&mlkem::ML_KEM_768, r),
        "ML-KEM-1024" => |r| mlkem_record(&mlkem::ML_KEM_1024, r),
        "ML-DSA-44" => |r| mldsa_record(&mldsa::ML_DSA_44, r),
        "ML-DSA-65" => |r| mldsa_record(&mldsa::ML_DSA_65, r),
        "ML-DSA-87" => |r| mldsa_record(&mldsa::ML_DSA_87, r),
        "Ed448" => ed448_record,
        "Ed25519" => ed25519_record,
        "X25519" => x25519_record,
        "AES-256-GCM" => aes_gcm_record,
        "HKDF-SHA-256" => |r| hkdf_record(HashAlg::Sha256, r),
        "HKDF-SHA-384" => |r| hkdf_record(HashAlg::Sha384, r),
        _ => return None,
    };
    Some(f)
}

/// Replays every record; stops at the first mismatch.
pub fn replay(name: &str, kat: &KatFile) -> KatFileResult {
    let mut out = KatFileResult {
        file: name.to_string(),
        alg: kat.alg.clone(),
        vectors: kat.records.len(),
        passed: false,
        mismatch: None,
        error: None,
    };
    let Some(check) = checker(&kat.alg) else {
        out.error = Some(format!("unsupported algorithm {}", kat.alg));
        return out;
    };
    if kat.records.is_empty() {
        out.error = Some("no vectors".to_string());
        return out;
    }
    for (i, r) in kat.records.iter().enumerate() {
        if let Err(field) = check(r) {
            out.mismatch = Some(KatMismatch { vector: i, field });
            return out;
        }
    }
    out.passed = true;
    out
}

/// Replays every `.kat` file in `dir`, in file-name order.
pub fn run_suite(dir: &Path) -> Result<KatSummary, KatError> {
    let io = |source| KatError::Io {
        path: dir.to_path_buf(),
        source,
    };
    if !dir.is_dir() {
        return Err(KatError::MissingSuite(dir.to_path_buf()));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "kat"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(KatError::MissingSuite(dir.to_path_buf()));
    }
    let mut files = Vec::with_capacity(paths.len());
    for p in &paths {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = fs::read_to_string(p).map_err(|source| KatError::Io {
            path: p.clone(),
            source,
        })?;
        files.push(replay(&name, &parse(&name, &text)?));
    }
    Ok(KatSummary {
        vectors: files.iter().map(|f| f.vectors).sum(),
        passed: files.iter().all(|f| f.passed),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records() {
        let k = parse("t", "# c\nalg=X25519\n\na=00ff\nb=\n\n\nc=01\n").unwrap();
        assert_eq!(k.alg, "X25519");
        assert_eq!(k.records.len(), 2);
        assert_eq!(k.records[0]["a"], [0, 255]);
        assert!(k.records[0]["b"].is_empty());
    }

    #[test]
    fn parse_errors() {
        assert!(parse("t", "a=00\n").is_err());
        assert!(parse("t", "alg=X\nzz\n").is_err());
        assert!(parse("t", "alg=X\na=0g\n").is_err());
    }

    #[test]
    fn unknown_alg_fails() {
        let k = parse("t", "alg=Nope\na=00\n").unwrap();
        let r = replay("t", &k);
        assert!(!r.passed);
        assert!(r.error.is_some());
    }
}
