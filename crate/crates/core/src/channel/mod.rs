//! PQ-DTLS-style handshake and record protocol. The same state machine runs
//! over reliable streams as PQ-mTLS, with fragmentation and retransmission
//! switched off.

pub mod compress;
pub mod fragment;
mod handshake;
pub mod keysched;
pub mod record;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compress::{compress_chain, decompress_chain, CertCompression};
pub use handshake::{
    group_codepoint, start_handshake, Direction, DriverStats, DriverStatus, HandshakeDriver,
    HandshakeLogEntry, Outgoing, ACK_DELAY, INITIAL_RTO, MAX_RETRANSMITS, MAX_RTO,
};
pub use record::{Session, DATAGRAM_OVERHEAD, DEFAULT_RECORD_BUDGET, RECORD_HEADER_LEN};

use crate::crypto::registry::{self, AlgorithmKind};
use crate::crypto::sig::SigKeyPair;
use crate::crypto::suite::ProtectionMode;
use crate::crypto::CryptoError;
use crate::entropy::EntropyError;
use crate::pki::{CertChain, Certificate, RejectReason, RevocationView};

pub const CIPHER_SUITE: &str = "AES-256-GCM + SHA-384";
pub const MIN_MTU: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("inconsistent configuration: {0}")]
    ConfigInconsistent(&'static str),
    #[error("no common key-exchange group")]
    NegotiationFailure,
    #[error("certificate rejected: {0:?}")]
    CertificateRejected(RejectReason),
    #[error("Finished MAC mismatch")]
    FinishedMismatch,
    #[error("retransmission budget exhausted")]
    Timeout,
    #[error("malformed handshake fragment")]
    MalformedFragment,
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("unexpected handshake message type {0}")]
    UnexpectedMessage(u8),
    #[error("record authentication failed")]
    AuthenticationFailure,
    #[error("record from a retired epoch")]
    EpochTooOld,
    #[error("record budget for this epoch exhausted")]
    NonceBudgetExceeded,
    #[error("replayed record")]
    ReplayDetected,
    #[error("channel not established")]
    NotEstablished,
    #[error("certificate compression codec {0} unavailable")]
    CodecUnavailable(u8),
    #[error("payload of {len} bytes exceeds {max}")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("peer aborted with alert {0}")]
    PeerAborted(u8),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub type Result<T> = core::result::Result<T, ChannelError>;

const REJECT_REASONS: [RejectReason; 8] = [
    RejectReason::BadSignature,
    RejectReason::Expired,
    RejectReason::NotYetValid,
    RejectReason::Revoked,
    RejectReason::UsageViolation,
    RejectReason::UnknownAnchor,
    RejectReason::Malformed,
    RejectReason::Missing,
];

impl ChannelError {
    /// Alert code and detail byte sent to the peer when this error aborts a
    /// handshake.
    pub fn alert(&self) -> (u8, u8) {
        match self {
            ChannelError::NegotiationFailure => (1, 0),
            ChannelError::CertificateRejected(r) => (
                2,
                REJECT_REASONS.iter().position(|x| x == r).expect("listed") as u8,
            ),
            ChannelError::FinishedMismatch => (3, 0),
            ChannelError::MalformedFragment => (4, 0),
            ChannelError::Malformed(_) => (5, 0),
            ChannelError::AuthenticationFailure => (6, 0),
            ChannelError::UnexpectedMessage(t) => (7, *t),
            ChannelError::CodecUnavailable(c) => (8, *c),
            _ => (0, 0),
        }
    }

    pub fn from_alert(code: u8, detail: u8) -> ChannelError {
        match code {
            1 => ChannelError::NegotiationFailure,
            2 => match REJECT_REASONS.get(detail as usize) {
                Some(r) => ChannelError::CertificateRejected(*r),
                None => ChannelError::PeerAborted(code),
            },
            3 => ChannelError::FinishedMismatch,
            4 => ChannelError::MalformedFragment,
            5 => ChannelError::Malformed("peer alert"),
            6 => ChannelError::AuthenticationFailure,
            7 => ChannelError::UnexpectedMessage(detail),
            8 => ChannelError::CodecUnavailable(detail),
            other => ChannelError::PeerAborted(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Client,
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Datagram { mtu: usize },
    Stream,
}

impl Transport {
    /// Largest fragment body that fits one datagram with its headers.
    pub fn max_fragment_body(self) -> Option<usize> {
        match self {
            Transport::Datagram { mtu } => Some(mtu.saturating_sub(
                record::DATAGRAM_OVERHEAD
                    + record::RECORD_HEADER_LEN
                    + fragment::FRAGMENT_HEADER_LEN,
            )),
            Transport::Stream => None,
        }
    }

    /// Record bytes that fit one datagram.
    pub fn datagram_budget(self) -> Option<usize> {
        match self {
            Transport::Datagram { mtu } => Some(mtu.saturating_sub(record::DATAGRAM_OVERHEAD)),
            Transport::Stream => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HandshakeConfig {
    pub role: Role,
    pub mode: ProtectionMode,
    /// Preference order for a client; the supported set for a server.
    pub offered_groups: Vec<&'static str>,
    pub chain: CertChain,
    pub private_key: SigKeyPair,
    pub trust_anchor: Certificate,
    pub revocation: RevocationView,
    pub require_client_cert: bool,
    pub cert_compression: CertCompression,
    pub key_update_record_budget: u64,
}

fn is_classical_group(g: &str) -> bool {
    matches!(
        g,
        registry::X25519 | registry::ECP_384 | registry::MODP_2048
    )
}

fn is_hybrid_group(g: &str) -> bool {
    g == registry::X_WING
}

impl HandshakeConfig {
    pub fn new(
        role: Role,
        mode: ProtectionMode,
        chain: CertChain,
        private_key: SigKeyPair,
        trust_anchor: Certificate,
    ) -> Self {
        HandshakeConfig {
            role,
            mode,
            offered_groups: mode.offered_groups(),
            chain,
            private_key,
            trust_anchor,
            revocation: RevocationView::new(),
            require_client_cert: false,
            cert_compression: CertCompression::None,
            key_update_record_budget: DEFAULT_RECORD_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let groups = &self.offered_groups;
        if groups.is_empty() {
            return Err(ChannelError::ConfigInconsistent("no groups offered"));
        }
        for g in groups {
            let d = registry::require_available(g)
                .map_err(|_| ChannelError::ConfigInconsistent("unavailable group"))?;
            if d.id.kind != AlgorithmKind::Kem {
                return Err(ChannelError::ConfigInconsistent("group is not a KEM"));
            }
        }
        let classical = groups.iter().any(|g| is_classical_group(g));
        let pq = groups.iter().any(|g| !is_classical_group(g));
        match self.mode {
            ProtectionMode::Hybrid if !(classical && groups.iter().any(|g| is_hybrid_group(g))) => {
                return Err(ChannelError::ConfigInconsistent(
                    "HYBRID needs a hybrid and a classical group",
                ))
            }
            ProtectionMode::PurePq if classical => {
                return Err(ChannelError::ConfigInconsistent(
                    "PURE_PQ offers a classical group",
                ))
            }
            ProtectionMode::Classical if pq => {
                return Err(ChannelError::ConfigInconsistent(
                    "CLASSICAL offers a post-quantum group",
                ))
            }
            _ => {}
        }
        match self.chain.leaf() {
            Some(leaf) => {
                if leaf.spki.public_key != self.private_key.public_key
                    || leaf.spki.profile_name != self.private_key.name()
                {
                    return Err(ChannelError::ConfigInconsistent(
                        "leaf key does not match private key",
                    ));
                }
            }
            None if self.role == Role::Server => {
                return Err(ChannelError::ConfigInconsistent("server without chain"))
            }
            None => {}
        }
        if self.key_update_record_budget == 0 {
            return Err(ChannelError::ConfigInconsistent("zero record budget"));
        }
        Ok(())
    }
}
