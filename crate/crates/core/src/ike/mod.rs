//! IKEv2-style control protocol for PQ-IPsec: classical IKE_SA_INIT, an
//! encrypted IKE_INTERMEDIATE exchange carrying ML-KEM, certificate AUTH with
//! optional post-quantum preshared keys, child-SA rekeying and deletion.

mod keys;
pub mod message;
mod proposal;
mod sa;

use alloc::string::String;
use thiserror::Error;

use crate::crypto::CryptoError;
use crate::entropy::EntropyError;
use crate::pki::RejectReason;

pub use keys::{
    apply_ppk, child_keymat, derive_ike_keys, fold_intermediate, prf, prf_plus,
    recompute_child_keys, skeyseed, ChildKeys, DirectionKeys, IkeKeys, KeyInputs,
};
pub use message::{
    fragment_encrypted, ExchangeType, Header, Message, Payload, TrafficSelector, IKE_HEADER_LEN,
    NON_ESP_MARKER,
};
pub use proposal::{negotiate, Encr, Proposal, ProposalError};
pub use sa::{
    ChildSa, IkeConfig, IkeLogEntry, IkeSa, IkeStats, Phase, PpkEntry, EXCHANGE_ORDER, INITIAL_RTO,
    MAX_RETRANSMITS, MAX_RTO,
};

pub const INTERMEDIATE_EXCHANGE_SUPPORTED: u16 = 16438;
pub const USE_PPK: u16 = 16435;
pub const PPK_IDENTITY: u16 = 16436;
pub const NO_PROPOSAL_CHOSEN: u16 = 14;
pub const AUTHENTICATION_FAILED: u16 = 24;
pub const INVALID_SYNTAX: u16 = 7;
pub const NAT_DETECTION_SOURCE_IP: u16 = 16388;
/// Private-use notify carried when the responder has no PPK for the offered id.
pub const UNKNOWN_PPK_ID: u16 = 40960;

pub const PPK_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IkeError {
    #[error("no proposal chosen")]
    NoProposalChosen,
    #[error("malformed KEM payload")]
    DecapsulationStructureError,
    #[error("SK payload failed authentication")]
    AuthenticationFailure,
    #[error("peer authentication failed")]
    AuthenticationFailed,
    #[error("unknown PPK id")]
    UnknownPpkId,
    #[error("fragmentation is not allowed for IKE_SA_INIT")]
    FragmentationNotAllowed,
    #[error("malformed fragment")]
    MalformedFragment,
    #[error("certificate rejected: {0:?}")]
    CertificateRejected(RejectReason),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("unexpected {0} message")]
    UnexpectedMessage(&'static str),
    #[error("operation not valid in phase {0}")]
    InvalidState(&'static str),
    #[error("security association closed")]
    SaClosed,
    #[error("request retransmission budget exhausted")]
    Timeout,
    #[error("ESP sequence number replayed")]
    ReplayDetected,
    #[error("PPK must be {PPK_LEN} bytes")]
    BadPpkLength,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("peer error notify {0}")]
    PeerError(u16),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

impl IkeError {
    /// Error notify reported to the peer.
    pub fn notify(&self) -> u16 {
        match self {
            IkeError::NoProposalChosen => NO_PROPOSAL_CHOSEN,
            IkeError::UnknownPpkId => UNKNOWN_PPK_ID,
            IkeError::AuthenticationFailed | IkeError::CertificateRejected(_) => {
                AUTHENTICATION_FAILED
            }
            _ => INVALID_SYNTAX,
        }
    }

    pub fn from_notify(ty: u16) -> Option<IkeError> {
        Some(match ty {
            NO_PROPOSAL_CHOSEN => IkeError::NoProposalChosen,
            UNKNOWN_PPK_ID => IkeError::UnknownPpkId,
            AUTHENTICATION_FAILED => IkeError::AuthenticationFailed,
            t if t < 16384 => IkeError::PeerError(t),
            _ => return None,
        })
    }
}

pub type Result<T> = core::result::Result<T, IkeError>;
