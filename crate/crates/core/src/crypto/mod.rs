//! Primitive interfaces: KEMs, signatures, AEAD, hashing/XOF and KDF.
//!
//! All randomness enters through explicit seed parameters; nothing in this
//! module touches an RNG. The [`entropy`](crate::entropy) module is the only
//! place seeds come from.

pub mod aead;
pub mod classical;
pub mod hash;
pub mod kem;
pub mod mldsa;
pub mod mlkem;
pub mod registry;
pub mod sig;
pub mod sizeclass;
pub mod suite;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(alloc::string::String),
    #[error("algorithm {0} is registered but not available in this build")]
    Unavailable(&'static str),
    #[error("{alg}: seed must be {expected} bytes, got {got}")]
    BadSeedLength {
        alg: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{alg}: key must be {expected} bytes, got {got}")]
    BadKeyLength {
        alg: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{alg}: ciphertext must be {expected} bytes, got {got}")]
    BadCiphertextLength {
        alg: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0}: key material failed validation")]
    InvalidKey(&'static str),
    #[error("context string is {0} bytes, limit is 255")]
    ContextTooLong(usize),
    #[error("{0} does not take a context string")]
    ContextUnsupported(&'static str),
    #[error("operation {op} is not defined for {alg}")]
    UnsupportedOperation { alg: &'static str, op: &'static str },
    #[error("AEAD authentication failed")]
    AuthenticationFailure,
    #[error("AEAD record budget exhausted for this key")]
    NonceBudgetExceeded,
    #[error("nonce must be 12 bytes")]
    BadNonceLength,
    #[error("requested {requested} bytes of output, limit is {limit}")]
    LengthTooLarge { requested: usize, limit: usize },
    #[error("profile {profile} uses a {key_bits}-bit AEAD key; 256-bit keys are required")]
    WeakAead {
        profile: alloc::string::String,
        key_bits: usize,
    },
    #[error("test-only algorithm {0} outside comparison mode")]
    TestOnly(alloc::string::String),
    #[error("{0} keys are composite-only and cannot be used by a single component")]
    CompositeOnly(&'static str),
    #[error("malformed encoding: {0}")]
    MalformedEncoding(&'static str),
}

pub type Result<T> = core::result::Result<T, CryptoError>;
