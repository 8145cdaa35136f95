//! Post-quantum certificate authority: composite-signed hierarchy, chain
//! verification, short-lived renewal, revocation and signed status answers.
//!
//! All validity decisions take the simulation clock as an argument.

mod cert;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cert::{
    CertChain, CertStatus, Certificate, KeyUsage, KeyUsages, RevocationList, RevocationReason,
    RevokedEntry, Serial, Spki, StatusResponse, SERIAL_LEN,
};
use cert::{CERT_CONTEXT, CRL_CONTEXT, STATUS_CONTEXT};

use crate::crypto::registry;
use crate::crypto::sig::{self, SigKeyPair};
use crate::crypto::CryptoError;
use crate::entropy::{EntropyError, EntropySource, SeedOperation};
use crate::time::{SimDuration, SimTime};

pub const MIN_LEAF_DAYS: u32 = 7;
pub const MAX_LEAF_DAYS: u32 = 90;
pub const ROOT_VALIDITY_DAYS: u32 = 3650;
pub const CRL_VALIDITY_DAYS: u64 = 7;
pub const DEFAULT_PROFILE: &str = registry::ED448_ML_DSA_65;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PkiError {
    #[error("leaf validity of {0} days is outside [7, 90]")]
    ValidityOutOfRange(u32),
    #[error("issuer {issuer} lacks {usage:?}")]
    UsageNotPermitted { issuer: String, usage: KeyUsage },
    #[error("serial {0} was not issued by this CA")]
    UnknownSerial(String),
    #[error("renewal requested before the window opens at {opens:?}")]
    RenewalTooEarly { opens: SimTime },
    #[error("{0} is not a signature profile usable for certificates")]
    UnsupportedProfile(String),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub type Result<T> = core::result::Result<T, PkiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    BadSignature,
    Expired,
    NotYetValid,
    Revoked,
    UsageViolation,
    UnknownAnchor,
    Malformed,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalPolicy {
    pub default_leaf_days: u32,
    pub renewal_window_fraction: f64,
}

impl Default for RenewalPolicy {
    fn default() -> Self {
        RenewalPolicy {
            default_leaf_days: 7,
            renewal_window_fraction: 0.2,
        }
    }
}

/// Revoked `(issuer, serial)` pairs gathered from CRLs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RevocationView {
    revoked: BTreeSet<(String, Serial)>,
}

impl RevocationView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_crls<'a>(crls: impl IntoIterator<Item = &'a RevocationList>) -> Self {
        let mut v = Self::new();
        for crl in crls {
            v.add(crl);
        }
        v
    }

    pub fn add(&mut self, crl: &RevocationList) {
        for e in &crl.revoked {
            self.revoked.insert((crl.issuer.clone(), e.serial));
        }
    }

    pub fn insert(&mut self, issuer: &str, serial: Serial) {
        self.revoked.insert((issuer.to_string(), serial));
    }

    pub fn is_revoked(&self, cert: &Certificate) -> bool {
        self.revoked.contains(&(cert.issuer.clone(), cert.serial))
    }

    pub fn len(&self) -> usize {
        self.revoked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revoked.is_empty()
    }
}

fn check_time(cert: &Certificate, at: SimTime) -> core::result::Result<(), RejectReason> {
    if at < cert.not_before {
        Err(RejectReason::NotYetValid)
    } else if at >= cert.not_after {
        Err(RejectReason::Expired)
    } else {
        Ok(())
    }
}

/// Verifies `chain` (leaf first) up to `anchor`.
///
/// The chain may end with the anchor itself or with a certificate the anchor
/// issued.
pub fn verify_chain(
    chain: &CertChain,
    anchor: &Certificate,
    at: SimTime,
    revocation: &RevocationView,
) -> core::result::Result<(), RejectReason> {
    let certs = match chain.0.last() {
        None => return Err(RejectReason::Missing),
        Some(last) if last.is_self_issued() => {
            if last != anchor {
                return Err(RejectReason::UnknownAnchor);
            }
            &chain.0[..chain.0.len() - 1]
        }
        Some(last) if last.issuer != anchor.subject => return Err(RejectReason::UnknownAnchor),
        Some(_) => &chain.0[..],
    };
    if !anchor.is_self_issued() || !anchor.verify_signature(&anchor.spki) {
        return Err(RejectReason::UnknownAnchor);
    }
    check_time(anchor, at)?;
    if !anchor.is_ca() {
        return Err(RejectReason::UsageViolation);
    }
    for (i, cert) in certs.iter().enumerate() {
        let issuer = certs.get(i + 1).unwrap_or(anchor);
        if cert.issuer != issuer.subject {
            return Err(RejectReason::UnknownAnchor);
        }
        if !issuer.is_ca() {
            return Err(RejectReason::UsageViolation);
        }
        if i > 0 && !cert.is_ca() {
            return Err(RejectReason::UsageViolation);
        }
        if !cert.verify_signature(&issuer.spki) {
            return Err(RejectReason::BadSignature);
        }
        check_time(cert, at)?;
        if revocation.is_revoked(cert) {
            return Err(RejectReason::Revoked);
        }
    }
    Ok(())
}

/// Generates a composite key pair for `profile` from the entropy source.
pub fn generate_key(entropy: &mut EntropySource, profile: &str) -> Result<SigKeyPair> {
    let seed = entropy.seed_for(profile, SeedOperation::Keygen)?;
    Ok(sig::sig_keygen(profile, &seed)?)
}

/// Issuing authority. Roots and intermediates share this type.
#[derive(Debug, Clone)]
pub struct CaState {
    pub keypair: SigKeyPair,
    pub certificate: Certificate,
    pub policy: RenewalPolicy,
    issued: BTreeMap<Serial, Certificate>,
    revoked: BTreeMap<Serial, RevokedEntry>,
    crl_number: u64,
}

fn sign_seed(entropy: &mut EntropySource, alg: &str) -> Result<Option<Vec<u8>>> {
    Ok(entropy.optional_seed(alg, SeedOperation::Sign)?)
}

impl CaState {
    /// Self-signed root valid for ten simulated years from `now`.
    pub fn init(
        entropy: &mut EntropySource,
        profile: &str,
        name: &str,
        now: SimTime,
    ) -> Result<CaState> {
        let keypair = generate_key(entropy, profile)?;
        let spki = Spki {
            profile_name: keypair.name().to_string(),
            public_key: keypair.public_key.clone(),
        };
        let mut ca = CaState {
            certificate: Certificate {
                serial: [0; SERIAL_LEN],
                issuer: name.to_string(),
                subject: name.to_string(),
                not_before: now,
                not_after: now + SimDuration::from_days(ROOT_VALIDITY_DAYS as u64),
                spki,
                key_usage: KeyUsages::of(&[KeyUsage::CaSign, KeyUsage::CrlSign]),
                extensions: Vec::new(),
                signature_alg: keypair.name().to_string(),
                signature: Vec::new(),
            },
            keypair,
            policy: RenewalPolicy::default(),
            issued: BTreeMap::new(),
            revoked: BTreeMap::new(),
            crl_number: 0,
        };
        ca.certificate.serial = ca.fresh_serial(entropy)?;
        let seed = sign_seed(entropy, ca.keypair.name())?;
        ca.certificate.signature =
            ca.keypair
                .sign(&ca.certificate.tbs_bytes(), CERT_CONTEXT, seed.as_deref())?;
        Ok(ca)
    }

    pub fn name(&self) -> &str {
        &self.certificate.subject
    }

    pub fn issued_serials(&self) -> impl Iterator<Item = &Serial> {
        self.issued.keys()
    }

    pub fn issued(&self, serial: &Serial) -> Option<&Certificate> {
        self.issued.get(serial)
    }

    fn fresh_serial(&self, entropy: &mut EntropySource) -> Result<Serial> {
        loop {
            let s: Serial = entropy.draw(SERIAL_LEN)?.try_into().expect("16 bytes");
            if !self.issued.contains_key(&s) && s != self.certificate.serial {
                return Ok(s);
            }
        }
    }

    fn sign_cert(
        &mut self,
        entropy: &mut EntropySource,
        mut cert: Certificate,
    ) -> Result<Certificate> {
        cert.signature_alg = self.keypair.name().to_string();
        let seed = sign_seed(entropy, self.keypair.name())?;
        cert.signature = self
            .keypair
            .sign(&cert.tbs_bytes(), CERT_CONTEXT, seed.as_deref())?;
        self.issued.insert(cert.serial, cert.clone());
        Ok(cert)
    }

    fn require(&self, usage: KeyUsage) -> Result<()> {
        if self.certificate.key_usage.contains(usage) {
            Ok(())
        } else {
            Err(PkiError::UsageNotPermitted {
                issuer: self.name().to_string(),
                usage,
            })
        }
    }

    fn check_spki(spki: &Spki) -> Result<()> {
        let d = sig::descriptor(&spki.profile_name)
            .map_err(|_| PkiError::UnsupportedProfile(spki.profile_name.clone()))?;
        let expected = d.sig_sizes().map(|s| s.public_key_bytes);
        if expected != Some(spki.public_key.len()) {
            return Err(PkiError::Malformed("subject public key length"));
        }
        Ok(())
    }

    /// Issues an end-entity certificate valid for `validity_days` from `now`.
    pub fn issue_cert(
        &mut self,
        entropy: &mut EntropySource,
        subject: &str,
        spki: Spki,
        usage: KeyUsages,
        validity_days: u32,
        now: SimTime,
    ) -> Result<Certificate> {
        self.require(KeyUsage::CaSign)?;
        if usage.contains(KeyUsage::CaSign) {
            return self.issue_ca_cert(entropy, subject, spki, usage, validity_days, now);
        }
        if !(MIN_LEAF_DAYS..=MAX_LEAF_DAYS).contains(&validity_days) {
            return Err(PkiError::ValidityOutOfRange(validity_days));
        }
        self.issue_ca_cert(entropy, subject, spki, usage, validity_days, now)
    }

    fn issue_ca_cert(
        &mut self,
        entropy: &mut EntropySource,
        subject: &str,
        spki: Spki,
        usage: KeyUsages,
        validity_days: u32,
        now: SimTime,
    ) -> Result<Certificate> {
        Self::check_spki(&spki)?;
        let cert = Certificate {
            serial: self.fresh_serial(entropy)?,
            issuer: self.name().to_string(),
            subject: subject.to_string(),
            not_before: now,
            not_after: now + SimDuration::from_days(validity_days as u64),
            spki,
            key_usage: usage,
            extensions: Vec::new(),
            signature_alg: String::new(),
            signature: Vec::new(),
        };
        self.sign_cert(entropy, cert)
    }

    /// Creates a subordinate CA with a fresh key and a certificate from this CA.
    pub fn issue_intermediate(
        &mut self,
        entropy: &mut EntropySource,
        profile: &str,
        name: &str,
        validity_days: u32,
        now: SimTime,
    ) -> Result<CaState> {
        self.require(KeyUsage::CaSign)?;
        let keypair = generate_key(entropy, profile)?;
        let spki = Spki {
            profile_name: keypair.name().to_string(),
            public_key: keypair.public_key.clone(),
        };
        let usage = KeyUsages::of(&[KeyUsage::CaSign, KeyUsage::CrlSign]);
        let certificate = self.issue_ca_cert(entropy, name, spki, usage, validity_days, now)?;
        Ok(CaState {
            keypair,
            certificate,
            policy: self.policy,
            issued: BTreeMap::new(),
            revoked: BTreeMap::new(),
            crl_number: 0,
        })
    }

    /// Generates a key and issues a leaf for it in one step.
    pub fn issue_leaf(
        &mut self,
        entropy: &mut EntropySource,
        profile: &str,
        subject: &str,
        usage: KeyUsages,
        validity_days: u32,
        now: SimTime,
    ) -> Result<(SigKeyPair, Certificate)> {
        let keypair = generate_key(entropy, profile)?;
        let spki = Spki {
            profile_name: keypair.name().to_string(),
            public_key: keypair.public_key.clone(),
        };
        let cert = self.issue_cert(entropy, subject, spki, usage, validity_days, now)?;
        Ok((keypair, cert))
    }

    /// Adds `serial` to the revocation set and returns a freshly signed CRL.
    /// Revoking twice keeps the original entry.
    pub fn revoke(
        &mut self,
        entropy: &mut EntropySource,
        serial: &Serial,
        reason: RevocationReason,
        now: SimTime,
    ) -> Result<RevocationList> {
        if !self.issued.contains_key(serial) {
            return Err(PkiError::UnknownSerial(hex::encode(serial)));
        }
        self.revoked.entry(*serial).or_insert(RevokedEntry {
            serial: *serial,
            reason,
            time: now,
        });
        self.current_crl(entropy, now)
    }

    pub fn current_crl(
        &mut self,
        entropy: &mut EntropySource,
        now: SimTime,
    ) -> Result<RevocationList> {
        self.require(KeyUsage::CrlSign)?;
        self.crl_number += 1;
        let mut crl = RevocationList {
            issuer: self.name().to_string(),
            crl_number: self.crl_number,
            this_update: now,
            next_update: now + SimDuration::from_days(CRL_VALIDITY_DAYS),
            revoked: self.revoked.values().copied().collect(),
            signature_alg: self.keypair.name().to_string(),
            signature: Vec::new(),
        };
        let seed = sign_seed(entropy, self.keypair.name())?;
        crl.signature = self
            .keypair
            .sign(&crl.tbs_bytes(), CRL_CONTEXT, seed.as_deref())?;
        Ok(crl)
    }

    /// Time at which `cert` becomes renewable.
    pub fn renewal_opens(&self, cert: &Certificate) -> SimTime {
        let span = cert.not_after.since(cert.not_before).as_micros();
        let open = (span as f64 * (1.0 - self.policy.renewal_window_fraction)) as u64;
        cert.not_before + SimDuration::from_micros(open)
    }

    /// Successor certificate with the same subject, key and usage and a fresh
    /// serial and validity window starting at `at`.
    pub fn renew(
        &mut self,
        entropy: &mut EntropySource,
        cert: &Certificate,
        at: SimTime,
    ) -> Result<Certificate> {
        if !self.issued.contains_key(&cert.serial) {
            return Err(PkiError::UnknownSerial(hex::encode(cert.serial)));
        }
        let opens = self.renewal_opens(cert);
        if at < opens {
            return Err(PkiError::RenewalTooEarly { opens });
        }
        let span = cert.not_after.since(cert.not_before);
        let successor = Certificate {
            serial: self.fresh_serial(entropy)?,
            not_before: at,
            not_after: at + span,
            signature_alg: String::new(),
            signature: Vec::new(),
            ..cert.clone()
        };
        self.sign_cert(entropy, successor)
    }

    /// Signed status answer consistent with the current revocation set.
    pub fn status_query(
        &self,
        entropy: &mut EntropySource,
        serial: &Serial,
        at: SimTime,
    ) -> Result<StatusResponse> {
        self.require(KeyUsage::CrlSign)?;
        let status = if self.revoked.contains_key(serial) {
            CertStatus::Revoked
        } else if self.issued.contains_key(serial) {
            CertStatus::Good
        } else {
            CertStatus::Unknown
        };
        let mut resp = StatusResponse {
            responder: self.name().to_string(),
            serial: *serial,
            status,
            produced_at: at,
            signature_alg: self.keypair.name().to_string(),
            signature: Vec::new(),
        };
        let seed = sign_seed(entropy, self.keypair.name())?;
        resp.signature = self
            .keypair
            .sign(&resp.tbs_bytes(), STATUS_CONTEXT, seed.as_deref())?;
        Ok(resp)
    }
}
