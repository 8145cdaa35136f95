//! Certificate-chain compression carried in the Certificate message.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{ChannelError, Result};
use crate::pki::CertChain;
use crate::wire::{Reader, Writer};

const DEFLATE_LEVEL: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertCompression {
    #[default]
    None,
    Deflate,
}

impl CertCompression {
    pub fn id(self) -> u8 {
        match self {
            CertCompression::None => 0,
            CertCompression::Deflate => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(CertCompression::None),
            1 => Ok(CertCompression::Deflate),
            _ => Err(ChannelError::CodecUnavailable(id)),
        }
    }
}

pub fn compress(raw: &[u8], codec: CertCompression) -> Vec<u8> {
    match codec {
        CertCompression::None => raw.to_vec(),
        CertCompression::Deflate => miniz_oxide::deflate::compress_to_vec(raw, DEFLATE_LEVEL),
    }
}

pub fn decompress(data: &[u8], codec: CertCompression, expected_len: usize) -> Result<Vec<u8>> {
    let out = match codec {
        CertCompression::None => data.to_vec(),
        CertCompression::Deflate => {
            miniz_oxide::inflate::decompress_to_vec_with_limit(data, expected_len)
                .map_err(|_| ChannelError::Malformed("compressed certificate"))?
        }
    };
    if out.len() != expected_len {
        return Err(ChannelError::Malformed("compressed certificate"));
    }
    Ok(out)
}

/// Encodes the Certificate message body: codec, uncompressed length, payload.
pub fn compress_chain(chain: &CertChain, codec: CertCompression) -> Vec<u8> {
    let raw = chain.encode();
    let mut w = Writer::new();
    w.u8(codec.id())
        .u24(raw.len())
        .vec24(&compress(&raw, codec));
    w.finish()
}

pub fn decompress_chain(body: &[u8]) -> Result<CertChain> {
    let mut r = Reader::new(body);
    let bad = |_| ChannelError::Malformed("certificate message");
    let codec = CertCompression::from_id(r.u8().map_err(bad)?)?;
    let raw_len = r.u24().map_err(bad)?;
    let payload = r.vec24().map_err(bad)?;
    if !r.is_empty() {
        return Err(ChannelError::Malformed("certificate message"));
    }
    let raw = decompress(payload, codec, raw_len)?;
    CertChain::decode(&raw).map_err(|_| ChannelError::Malformed("certificate chain"))
}

/// Compressed payload length, for measurements.
pub fn compressed_len(chain: &CertChain, codec: CertCompression) -> usize {
    compress(&chain.encode(), codec).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::registry;
    use crate::entropy::EntropySource;
    use crate::pki::{CaState, KeyUsage, KeyUsages};
    use crate::time::SimTime;

    fn chain() -> CertChain {
        let mut e = EntropySource::qrng_sim("compress", [3; 32]);
        let mut root = CaState::init(
            &mut e,
            registry::ED25519_ML_DSA_65,
            "CN=Operator Root CA, O=Example",
            SimTime::ZERO,
        )
        .unwrap();
        let mut inter = root
            .issue_intermediate(
                &mut e,
                registry::ED25519_ML_DSA_65,
                "CN=Operator Issuing CA, O=Example",
                365,
                SimTime::ZERO,
            )
            .unwrap();
        let usage = KeyUsages::of(&[KeyUsage::TlsAuth]);
        let (_, leaf) = inter
            .issue_leaf(
                &mut e,
                registry::ED25519_ML_DSA_65,
                "CN=o-du-1, O=Example",
                usage,
                30,
                SimTime::ZERO,
            )
            .unwrap();
        CertChain(alloc::vec![
            leaf,
            inter.certificate.clone(),
            root.certificate.clone()
        ])
    }

    #[test]
    fn none_is_identity() {
        let c = chain();
        assert_eq!(compress(&c.encode(), CertCompression::None), c.encode());
        assert_eq!(
            decompress_chain(&compress_chain(&c, CertCompression::None)).unwrap(),
            c
        );
    }

    #[test]
    fn deflate_shrinks_and_round_trips() {
        let c = chain();
        assert!(compressed_len(&c, CertCompression::Deflate) < c.encoded_len());
        assert_eq!(
            decompress_chain(&compress_chain(&c, CertCompression::Deflate)).unwrap(),
            c
        );
    }

    #[test]
    fn corrupt_stream_rejected() {
        let c = chain();
        let mut body = compress_chain(&c, CertCompression::Deflate);
        // reserved block type in the first deflate header
        body[7] = 0x07;
        assert!(matches!(
            decompress_chain(&body),
            Err(ChannelError::Malformed(_))
        ));
        body[0] = 7;
        assert_eq!(
            decompress_chain(&body),
            Err(ChannelError::CodecUnavailable(7))
        );
    }
}
