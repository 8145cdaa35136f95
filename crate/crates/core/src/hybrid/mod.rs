//! Hybrid constructions: the X-Wing KEM and composite ML-DSA signatures.

pub mod composite;
pub mod xwing;

pub use composite::{CompositeProfile, CompositeSignature};
