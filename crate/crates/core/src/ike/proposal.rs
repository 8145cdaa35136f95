//! Proposal strings in the `aes256-sha384-ecp384-ke1_mlkem768!` style.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{IkeError, Result};
use crate::crypto::registry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProposalError {
    #[error("empty proposal")]
    Empty,
    #[error("unknown transform {0:?}")]
    UnknownTransform(String),
    #[error("duplicate {0} transform")]
    Duplicate(&'static str),
    #[error("proposal has no encryption transform")]
    MissingEncryption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encr {
    Aes128Cbc,
    Aes256Cbc,
    Aes128Gcm,
    Aes256Gcm,
}

impl Encr {
    pub fn key_bits(self) -> usize {
        match self {
            Encr::Aes128Cbc | Encr::Aes128Gcm => 128,
            Encr::Aes256Cbc | Encr::Aes256Gcm => 256,
        }
    }

    pub fn is_aead(self) -> bool {
        matches!(self, Encr::Aes128Gcm | Encr::Aes256Gcm)
    }

    fn token(self) -> &'static str {
        match self {
            Encr::Aes128Cbc => "aes128",
            Encr::Aes256Cbc => "aes256",
            Encr::Aes128Gcm => "aes128gcm16",
            Encr::Aes256Gcm => "aes256gcm16",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrfHash {
    Sha256,
    Sha384,
}

impl PrfHash {
    fn token(self) -> &'static str {
        match self {
            PrfHash::Sha256 => "sha256",
            PrfHash::Sha384 => "sha384",
        }
    }

    pub fn prf_name(self) -> &'static str {
        match self {
            PrfHash::Sha256 => registry::PRF_HMAC_SHA2_256,
            PrfHash::Sha384 => registry::PRF_HMAC_SHA2_384,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Proposal {
    pub encr: Encr,
    pub hash: Option<PrfHash>,
    /// Classical group for IKE_SA_INIT, or the PFS group of an ESP proposal.
    pub dh: Option<&'static str>,
    /// KEM run in the first IKE_INTERMEDIATE exchange.
    pub ke1: Option<&'static str>,
    pub strict: bool,
}

fn group_token(g: &str) -> Option<&'static str> {
    Some(match g {
        "x25519" | "curve25519" => registry::X25519,
        "ecp384" => registry::ECP_384,
        "modp2048" => registry::MODP_2048,
        _ => return None,
    })
}

fn group_name_token(g: &str) -> &'static str {
    match g {
        registry::X25519 => "x25519",
        registry::ECP_384 => "ecp384",
        registry::MODP_2048 => "modp2048",
        registry::ML_KEM_512 => "mlkem512",
        registry::ML_KEM_768 => "mlkem768",
        _ => "mlkem1024",
    }
}

fn kem_token(k: &str) -> Option<&'static str> {
    Some(match k {
        "mlkem512" => registry::ML_KEM_512,
        "mlkem768" => registry::ML_KEM_768,
        "mlkem1024" => registry::ML_KEM_1024,
        _ => return None,
    })
}

impl FromStr for Proposal {
    type Err = ProposalError;

    fn from_str(s: &str) -> core::result::Result<Self, ProposalError> {
        let s = s.trim();
        let (body, strict) = match s.strip_suffix('!') {
            Some(b) => (b, true),
            None => (s, false),
        };
        if body.is_empty() {
            return Err(ProposalError::Empty);
        }
        let mut encr = None;
        let mut hash = None;
        let mut dh = None;
        let mut ke1 = None;
        fn set<T>(
            slot: &mut Option<T>,
            v: T,
            what: &'static str,
        ) -> core::result::Result<(), ProposalError> {
            if slot.is_some() {
                return Err(ProposalError::Duplicate(what));
            }
            *slot = Some(v);
            Ok(())
        }
        for tok in body.split('-') {
            let t = tok.to_ascii_lowercase();
            match t.as_str() {
                "aes128" => set(&mut encr, Encr::Aes128Cbc, "encryption")?,
                "aes256" => set(&mut encr, Encr::Aes256Cbc, "encryption")?,
                "aes128gcm" | "aes128gcm16" | "aes128gcm128" => {
                    set(&mut encr, Encr::Aes128Gcm, "encryption")?
                }
                "aes256gcm" | "aes256gcm16" | "aes256gcm128" => {
                    set(&mut encr, Encr::Aes256Gcm, "encryption")?
                }
                "sha256" | "prfsha256" => set(&mut hash, PrfHash::Sha256, "hash")?,
                "sha384" | "prfsha384" => set(&mut hash, PrfHash::Sha384, "hash")?,
                other => {
                    if let Some(g) = group_token(other) {
                        set(&mut dh, g, "group")?
                    } else if let Some(k) = other.strip_prefix("ke1_").and_then(kem_token) {
                        set(&mut ke1, k, "ke1")?
                    } else {
                        return Err(ProposalError::UnknownTransform(tok.to_string()));
                    }
                }
            }
        }
        Ok(Proposal {
            encr: encr.ok_or(ProposalError::MissingEncryption)?,
            hash,
            dh,
            ke1,
            strict,
        })
    }
}

impl fmt::Display for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.encr.token())?;
        if let Some(h) = self.hash {
            write!(f, "-{}", h.token())?;
        }
        if let Some(g) = self.dh {
            write!(f, "-{}", group_name_token(g))?;
        }
        if let Some(k) = self.ke1 {
            write!(f, "-ke1_{}", group_name_token(k))?;
        }
        if self.strict {
            f.write_str("!")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for Proposal {
    type Error = ProposalError;
    fn try_from(s: String) -> core::result::Result<Self, ProposalError> {
        s.parse()
    }
}

impl From<Proposal> for String {
    fn from(p: Proposal) -> String {
        p.to_string()
    }
}

impl Proposal {
    pub fn parse_list(s: &str) -> core::result::Result<Vec<Proposal>, ProposalError> {
        s.split(',').map(str::parse).collect()
    }

    fn same_base(&self, other: &Proposal) -> bool {
        self.encr == other.encr && self.hash == other.hash && self.dh == other.dh
    }

    /// Whether `chosen`, returned by a responder, is an acceptable answer to
    /// this offer.
    pub fn accepts_selection(&self, chosen: &Proposal) -> bool {
        self.same_base(chosen) && (self.ke1 == chosen.ke1 || (!self.strict && chosen.ke1.is_none()))
    }
}

/// Responder-side selection. The first offer matching an acceptable
/// proposal wins. Offers below 256-bit encryption are never selected.
/// A responder without IKE_INTERMEDIATE support ignores `ke1` transforms.
pub fn negotiate(
    offered: &[Proposal],
    acceptable: &[Proposal],
    intermediate: bool,
) -> Result<Proposal> {
    for o in offered.iter().filter(|o| o.encr.key_bits() >= 256) {
        let view = if intermediate { o.ke1 } else { None };
        for a in acceptable {
            if !o.same_base(a) {
                continue;
            }
            let ke1 = if view == a.ke1 {
                view
            } else if !a.strict && (view.is_none() || a.ke1.is_none()) {
                None
            } else {
                continue;
            };
            return Ok(Proposal {
                ke1,
                strict: false,
                ..o.clone()
            });
        }
    }
    Err(IkeError::NoProposalChosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config_strings() {
        let ike: Proposal = "aes256-sha384-ecp384-ke1_mlkem768!".parse().unwrap();
        assert_eq!(ike.encr, Encr::Aes256Cbc);
        assert_eq!(ike.hash, Some(PrfHash::Sha384));
        assert_eq!(ike.dh, Some(registry::ECP_384));
        assert_eq!(ike.ke1, Some(registry::ML_KEM_768));
        assert!(ike.strict);
        let esp: Proposal = "aes256gcm128-sha384-ecp384!".parse().unwrap();
        assert_eq!(esp.encr, Encr::Aes256Gcm);
        assert_eq!(esp.ke1, None);
        assert!(matches!(
            "aes256-md5".parse::<Proposal>(),
            Err(ProposalError::UnknownTransform(_))
        ));
        assert_eq!(
            "sha384-x25519".parse::<Proposal>(),
            Err(ProposalError::MissingEncryption)
        );
        assert_eq!(
            "aes256-sha256-sha384".parse::<Proposal>(),
            Err(ProposalError::Duplicate("hash"))
        );
    }

    #[test]
    fn selection() {
        let pq: Proposal = "aes256gcm16-sha384-x25519-ke1_mlkem768".parse().unwrap();
        let strict: Proposal = "aes256gcm16-sha384-x25519-ke1_mlkem768!".parse().unwrap();
        let classical: Proposal = "aes256gcm16-sha384-x25519".parse().unwrap();
        assert_eq!(
            negotiate(&[pq.clone()], &[pq.clone()], true).unwrap().ke1,
            Some(registry::ML_KEM_768)
        );
        let downgraded = negotiate(&[pq.clone()], &[pq.clone()], false).unwrap();
        assert_eq!(downgraded.ke1, None);
        assert!(pq.accepts_selection(&downgraded));
        assert!(!strict.accepts_selection(&downgraded));
        assert_eq!(
            negotiate(&[classical.clone()], &[strict], true),
            Err(IkeError::NoProposalChosen)
        );
        let weak: Proposal = "aes128gcm16-sha384-x25519".parse().unwrap();
        assert_eq!(
            negotiate(&[weak.clone()], &[weak], true),
            Err(IkeError::NoProposalChosen)
        );
        let other: Proposal = "aes256gcm16-sha384-ecp384".parse().unwrap();
        assert_eq!(
            negotiate(&[other], &[classical], true),
            Err(IkeError::NoProposalChosen)
        );
    }

    proptest::proptest! {
        #[test]
        fn display_round_trips(e in 0usize..4, h in 0usize..3, g in 0usize..4, k in 0usize..4, strict: bool) {
            let encr = [Encr::Aes128Cbc, Encr::Aes256Cbc, Encr::Aes128Gcm, Encr::Aes256Gcm][e];
            let hash = [None, Some(PrfHash::Sha256), Some(PrfHash::Sha384)][h];
            let dh = [None, Some(registry::X25519), Some(registry::ECP_384), Some(registry::MODP_2048)][g];
            let ke1 = [None, Some(registry::ML_KEM_512), Some(registry::ML_KEM_768), Some(registry::ML_KEM_1024)][k];
            let p = Proposal { encr, hash, dh, ke1, strict };
            proptest::prop_assert_eq!(p.to_string().parse::<Proposal>().unwrap(), p);
        }
    }
}
