//! Post-quantum secure channels for a simulated O-RAN deployment.
//!
//! Everything here is `no_std` with `alloc`: lattice primitives, hybrid and
//! composite constructions, the certificate authority, the datagram handshake,
//! the IKEv2-style control protocol, composite-signed tokens, and the
//! discrete-event network model. File formats, the CLI and OS entropy live in
//! the `qran` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod authz;
pub mod channel;
pub mod crypto;
pub mod entropy;
pub mod hybrid;
pub mod ike;
pub mod netsim;
pub mod pki;
pub mod time;
pub mod wire;

pub use crypto::registry::{AlgorithmDescriptor, AlgorithmId, AlgorithmKind};
