//! Certificates, CRLs and status responses with a deterministic TLV encoding.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PkiError;
use crate::crypto::sig;
use crate::time::SimTime;
use crate::wire::{Reader, Truncated, Writer};

pub const SERIAL_LEN: usize = 16;
pub type Serial = [u8; SERIAL_LEN];

pub(crate) const CERT_CONTEXT: &[u8] = b"qran-pki certificate";
pub(crate) const CRL_CONTEXT: &[u8] = b"qran-pki crl";
pub(crate) const STATUS_CONTEXT: &[u8] = b"qran-pki status";

mod tag {
    pub const CERT: u8 = 0x30;
    pub const TBS: u8 = 0x31;
    pub const SERIAL: u8 = 0x01;
    pub const ISSUER: u8 = 0x02;
    pub const SUBJECT: u8 = 0x03;
    pub const NOT_BEFORE: u8 = 0x04;
    pub const NOT_AFTER: u8 = 0x05;
    pub const SPKI: u8 = 0x06;
    pub const USAGE: u8 = 0x07;
    pub const EXTENSIONS: u8 = 0x08;
    pub const SIG_ALG: u8 = 0x09;
    pub const SIGNATURE: u8 = 0x0a;
    pub const PROFILE: u8 = 0x10;
    pub const KEY: u8 = 0x11;
    pub const EXTENSION: u8 = 0x20;
    pub const OID: u8 = 0x21;
    pub const VALUE: u8 = 0x22;
    pub const CRL: u8 = 0x40;
    pub const CRL_TBS: u8 = 0x41;
    pub const CRL_NUMBER: u8 = 0x42;
    pub const ENTRY: u8 = 0x43;
    pub const REASON: u8 = 0x44;
    pub const TIME: u8 = 0x45;
    pub const STATUS: u8 = 0x50;
    pub const STATUS_TBS: u8 = 0x51;
    pub const STATUS_VALUE: u8 = 0x52;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KeyUsage {
    CaSign,
    CrlSign,
    TlsAuth,
    TokenSign,
}

impl KeyUsage {
    const ALL: [KeyUsage; 4] = [
        KeyUsage::CaSign,
        KeyUsage::CrlSign,
        KeyUsage::TlsAuth,
        KeyUsage::TokenSign,
    ];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyUsages(u8);

impl KeyUsages {
    pub fn of(usages: &[KeyUsage]) -> Self {
        KeyUsages(usages.iter().fold(0, |acc, u| acc | u.bit()))
    }

    pub fn contains(self, u: KeyUsage) -> bool {
        self.0 & u.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = KeyUsage> {
        KeyUsage::ALL.into_iter().filter(move |u| self.contains(*u))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits & !0x0f == 0).then_some(KeyUsages(bits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spki {
    pub profile_name: String,
    pub public_key: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub serial: Serial,
    pub issuer: String,
    pub subject: String,
    pub not_before: SimTime,
    pub not_after: SimTime,
    pub spki: Spki,
    pub key_usage: KeyUsages,
    pub extensions: Vec<(String, Vec<u8>)>,
    /// Algorithm of the issuer key that produced `signature`.
    pub signature_alg: String,
    pub signature: Vec<u8>,
}

fn tlv_string(r: &mut Reader<'_>, t: u8) -> Result<String, Truncated> {
    let v = r.expect_tlv(t)?;
    core::str::from_utf8(v)
        .map(ToString::to_string)
        .map_err(|_| Truncated)
}

fn tlv_u64(r: &mut Reader<'_>, t: u8) -> Result<u64, Truncated> {
    let v = r.expect_tlv(t)?;
    let arr: [u8; 8] = v.try_into().map_err(|_| Truncated)?;
    Ok(u64::from_be_bytes(arr))
}

fn tlv_serial(r: &mut Reader<'_>) -> Result<Serial, Truncated> {
    r.expect_tlv(tag::SERIAL)?.try_into().map_err(|_| Truncated)
}

fn finished<T>(r: &Reader<'_>, v: T) -> Result<T, Truncated> {
    if r.is_empty() {
        Ok(v)
    } else {
        Err(Truncated)
    }
}

impl Certificate {
    /// Deterministic encoding of every field covered by the signature.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        let mut spki = Writer::new();
        spki.tlv(tag::PROFILE, self.spki.profile_name.as_bytes())
            .tlv(tag::KEY, &self.spki.public_key);
        let mut exts = Writer::new();
        for (oid, value) in &self.extensions {
            let mut e = Writer::new();
            e.tlv(tag::OID, oid.as_bytes()).tlv(tag::VALUE, value);
            exts.tlv(tag::EXTENSION, &e.finish());
        }
        let mut body = Writer::new();
        body.tlv(tag::SERIAL, &self.serial)
            .tlv(tag::ISSUER, self.issuer.as_bytes())
            .tlv(tag::SUBJECT, self.subject.as_bytes())
            .tlv(tag::NOT_BEFORE, &self.not_before.0.to_be_bytes())
            .tlv(tag::NOT_AFTER, &self.not_after.0.to_be_bytes())
            .tlv(tag::SPKI, &spki.finish())
            .tlv(tag::USAGE, &[self.key_usage.bits()])
            .tlv(tag::EXTENSIONS, &exts.finish())
            .tlv(tag::SIG_ALG, self.signature_alg.as_bytes());
        let mut w = Writer::new();
        w.tlv(tag::TBS, &body.finish());
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut inner = Writer::new();
        inner
            .bytes(&self.tbs_bytes())
            .tlv(tag::SIGNATURE, &self.signature);
        let mut w = Writer::new();
        w.tlv(tag::CERT, &inner.finish());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PkiError> {
        let mut outer = Reader::new(bytes);
        let cert = Self::read(&mut outer).map_err(|_| PkiError::Malformed("certificate"))?;
        finished(&outer, cert).map_err(|_| PkiError::Malformed("trailing bytes after certificate"))
    }

    /// Reads one certificate from the front of `r`.
    pub fn read(r: &mut Reader<'_>) -> Result<Self, Truncated> {
        let mut c = Reader::new(r.expect_tlv(tag::CERT)?);
        let mut t = Reader::new(c.expect_tlv(tag::TBS)?);
        let serial = tlv_serial(&mut t)?;
        let issuer = tlv_string(&mut t, tag::ISSUER)?;
        let subject = tlv_string(&mut t, tag::SUBJECT)?;
        let not_before = SimTime(tlv_u64(&mut t, tag::NOT_BEFORE)?);
        let not_after = SimTime(tlv_u64(&mut t, tag::NOT_AFTER)?);
        let mut s = Reader::new(t.expect_tlv(tag::SPKI)?);
        let profile_name = tlv_string(&mut s, tag::PROFILE)?;
        let public_key = s.expect_tlv(tag::KEY)?.to_vec();
        finished(&s, ())?;
        let usage = t.expect_tlv(tag::USAGE)?;
        let key_usage = match usage {
            [b] => KeyUsages::from_bits(*b).ok_or(Truncated)?,
            _ => return Err(Truncated),
        };
        let mut e = Reader::new(t.expect_tlv(tag::EXTENSIONS)?);
        let mut extensions = Vec::new();
        while !e.is_empty() {
            let mut x = Reader::new(e.expect_tlv(tag::EXTENSION)?);
            let oid = tlv_string(&mut x, tag::OID)?;
            let value = x.expect_tlv(tag::VALUE)?.to_vec();
            finished(&x, ())?;
            extensions.push((oid, value));
        }
        let signature_alg = tlv_string(&mut t, tag::SIG_ALG)?;
        finished(&t, ())?;
        let signature = c.expect_tlv(tag::SIGNATURE)?.to_vec();
        finished(&c, ())?;
        Ok(Certificate {
            serial,
            issuer,
            subject,
            not_before,
            not_after,
            spki: Spki {
                profile_name,
                public_key,
            },
            key_usage,
            extensions,
            signature_alg,
            signature,
        })
    }

    pub fn is_ca(&self) -> bool {
        self.key_usage.contains(KeyUsage::CaSign)
    }

    pub fn is_self_issued(&self) -> bool {
        self.issuer == self.subject
    }

    /// Signature check under an explicit issuer key.
    pub fn verify_signature(&self, issuer: &Spki) -> bool {
        self.signature_alg == issuer.profile_name
            && sig::sig_verify(
                &issuer.profile_name,
                &issuer.public_key,
                &self.tbs_bytes(),
                CERT_CONTEXT,
                &self.signature,
            )
    }

    pub fn valid_at(&self, t: SimTime) -> bool {
        self.not_before <= t && t < self.not_after
    }
}

/// Leaf first, root (or the certificate issued by the anchor) last.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CertChain(pub Vec<Certificate>);

impl CertChain {
    pub fn leaf(&self) -> Option<&Certificate> {
        self.0.first()
    }

    pub fn encode(&self) -> Vec<u8> {
        self.0.iter().flat_map(|c| c.encode()).collect()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PkiError> {
        let mut r = Reader::new(bytes);
        let mut certs = Vec::new();
        while !r.is_empty() {
            certs.push(
                Certificate::read(&mut r).map_err(|_| PkiError::Malformed("certificate chain"))?,
            );
        }
        Ok(CertChain(certs))
    }

    pub fn encoded_len(&self) -> usize {
        self.encode().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RevocationReason {
    Unspecified,
    KeyCompromise,
    CaCompromise,
    Superseded,
    CessationOfOperation,
}

impl RevocationReason {
    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        use RevocationReason::*;
        [
            Unspecified,
            KeyCompromise,
            CaCompromise,
            Superseded,
            CessationOfOperation,
        ]
        .get(c as usize)
        .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RevokedEntry {
    pub serial: Serial,
    pub reason: RevocationReason,
    pub time: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationList {
    pub issuer: String,
    pub crl_number: u64,
    pub this_update: SimTime,
    pub next_update: SimTime,
    /// Sorted by serial.
    pub revoked: Vec<RevokedEntry>,
    pub signature_alg: String,
    pub signature: Vec<u8>,
}

impl RevocationList {
    pub fn tbs_bytes(&self) -> Vec<u8> {
        let mut body = Writer::new();
        body.tlv(tag::ISSUER, self.issuer.as_bytes())
            .tlv(tag::CRL_NUMBER, &self.crl_number.to_be_bytes())
            .tlv(tag::NOT_BEFORE, &self.this_update.0.to_be_bytes())
            .tlv(tag::NOT_AFTER, &self.next_update.0.to_be_bytes());
        for e in &self.revoked {
            let mut x = Writer::new();
            x.tlv(tag::SERIAL, &e.serial)
                .tlv(tag::REASON, &[e.reason.code()])
                .tlv(tag::TIME, &e.time.0.to_be_bytes());
            body.tlv(tag::ENTRY, &x.finish());
        }
        body.tlv(tag::SIG_ALG, self.signature_alg.as_bytes());
        let mut w = Writer::new();
        w.tlv(tag::CRL_TBS, &body.finish());
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut inner = Writer::new();
        inner
            .bytes(&self.tbs_bytes())
            .tlv(tag::SIGNATURE, &self.signature);
        let mut w = Writer::new();
        w.tlv(tag::CRL, &inner.finish());
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PkiError> {
        Self::read(bytes).map_err(|_| PkiError::Malformed("revocation list"))
    }

    fn read(bytes: &[u8]) -> Result<Self, Truncated> {
        let mut outer = Reader::new(bytes);
        let mut c = Reader::new(outer.expect_tlv(tag::CRL)?);
        finished(&outer, ())?;
        let mut t = Reader::new(c.expect_tlv(tag::CRL_TBS)?);
        let issuer = tlv_string(&mut t, tag::ISSUER)?;
        let crl_number = tlv_u64(&mut t, tag::CRL_NUMBER)?;
        let this_update = SimTime(tlv_u64(&mut t, tag::NOT_BEFORE)?);
        let next_update = SimTime(tlv_u64(&mut t, tag::NOT_AFTER)?);
        let mut revoked = Vec::new();
        let signature_alg = loop {
            match t.tlv()? {
                (tag::ENTRY, v) => {
                    let mut x = Reader::new(v);
                    let serial = tlv_serial(&mut x)?;
                    let reason = match x.expect_tlv(tag::REASON)? {
                        [b] => RevocationReason::from_code(*b).ok_or(Truncated)?,
                        _ => return Err(Truncated),
                    };
                    let time = SimTime(tlv_u64(&mut x, tag::TIME)?);
                    finished(&x, ())?;
                    revoked.push(RevokedEntry {
                        serial,
                        reason,
                        time,
                    });
                }
                (tag::SIG_ALG, v) => {
                    break core::str::from_utf8(v).map_err(|_| Truncated)?.to_string()
                }
                _ => return Err(Truncated),
            }
        };
        finished(&t, ())?;
        let signature = c.expect_tlv(tag::SIGNATURE)?.to_vec();
        finished(&c, ())?;
        Ok(RevocationList {
            issuer,
            crl_number,
            this_update,
            next_update,
            revoked,
            signature_alg,
            signature,
        })
    }

    pub fn verify_signature(&self, issuer: &Certificate) -> bool {
        issuer.subject == self.issuer
            && issuer.key_usage.contains(KeyUsage::CrlSign)
            && self.signature_alg == issuer.spki.profile_name
            && sig::sig_verify(
                &issuer.spki.profile_name,
                &issuer.spki.public_key,
                &self.tbs_bytes(),
                CRL_CONTEXT,
                &self.signature,
            )
    }

    pub fn contains(&self, serial: &Serial) -> bool {
        self.revoked
            .binary_search_by(|e| e.serial.cmp(serial))
            .is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertStatus {
    Good,
    Revoked,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusResponse {
    pub responder: String,
    pub serial: Serial,
    pub status: CertStatus,
    pub produced_at: SimTime,
    pub signature_alg: String,
    pub signature: Vec<u8>,
}

impl StatusResponse {
    pub fn tbs_bytes(&self) -> Vec<u8> {
        let code = match self.status {
            CertStatus::Good => 0,
            CertStatus::Revoked => 1,
            CertStatus::Unknown => 2,
        };
        let mut body = Writer::new();
        body.tlv(tag::ISSUER, self.responder.as_bytes())
            .tlv(tag::SERIAL, &self.serial)
            .tlv(tag::STATUS_VALUE, &[code])
            .tlv(tag::TIME, &self.produced_at.0.to_be_bytes())
            .tlv(tag::SIG_ALG, self.signature_alg.as_bytes());
        let mut w = Writer::new();
        w.tlv(tag::STATUS_TBS, &body.finish());
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut inner = Writer::new();
        inner
            .bytes(&self.tbs_bytes())
            .tlv(tag::SIGNATURE, &self.signature);
        let mut w = Writer::new();
        w.tlv(tag::STATUS, &inner.finish());
        w.finish()
    }

    pub fn verify_signature(&self, responder: &Certificate) -> bool {
        responder.subject == self.responder
            && responder.key_usage.contains(KeyUsage::CrlSign)
            && sig::sig_verify(
                &responder.spki.profile_name,
                &responder.spki.public_key,
                &self.tbs_bytes(),
                STATUS_CONTEXT,
                &self.signature,
            )
    }
}
