//! Message header, payload codec, SK/SKF encryption and reassembly.
//!
//! Layout: the 4-byte non-ESP marker, a 28-byte header, then payloads as
//! `type u8 | length u24 | body`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::keys::DirectionKeys;
use super::proposal::Proposal;
use super::{IkeError, Result};
use crate::crypto::aead::{self, TAG_LEN};
use crate::crypto::registry;
use crate::wire::{Reader, Writer};

pub const NON_ESP_MARKER: [u8; 4] = [0; 4];
pub const IKE_HEADER_LEN: usize = 28;
pub const FLAG_INITIATOR: u8 = 0x08;
pub const FLAG_RESPONSE: u8 = 0x20;
const VERSION: u8 = 0x20;
const PAYLOAD_HEADER_LEN: usize = 4;
const IV_LEN: usize = 8;
/// Fixed bytes around an SKF payload's plaintext.
pub const SKF_OVERHEAD: usize =
    NON_ESP_MARKER.len() + IKE_HEADER_LEN + PAYLOAD_HEADER_LEN + 4 + IV_LEN + TAG_LEN;

mod ptype {
    pub const SA: u8 = 33;
    pub const KE: u8 = 34;
    pub const IDI: u8 = 35;
    pub const IDR: u8 = 36;
    pub const CERT: u8 = 37;
    pub const CERTREQ: u8 = 38;
    pub const AUTH: u8 = 39;
    pub const NONCE: u8 = 40;
    pub const NOTIFY: u8 = 41;
    pub const DELETE: u8 = 42;
    pub const TSI: u8 = 44;
    pub const TSR: u8 = 45;
    pub const SK: u8 = 46;
    pub const SKF: u8 = 53;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExchangeType {
    IkeSaInit,
    IkeIntermediate,
    IkeAuth,
    CreateChildSa,
    Informational,
}

impl ExchangeType {
    pub fn code(self) -> u8 {
        match self {
            ExchangeType::IkeSaInit => 34,
            ExchangeType::IkeAuth => 35,
            ExchangeType::CreateChildSa => 36,
            ExchangeType::Informational => 37,
            ExchangeType::IkeIntermediate => 43,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            34 => ExchangeType::IkeSaInit,
            35 => ExchangeType::IkeAuth,
            36 => ExchangeType::CreateChildSa,
            37 => ExchangeType::Informational,
            43 => ExchangeType::IkeIntermediate,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ExchangeType::IkeSaInit => "IKE_SA_INIT",
            ExchangeType::IkeIntermediate => "IKE_INTERMEDIATE",
            ExchangeType::IkeAuth => "IKE_AUTH",
            ExchangeType::CreateChildSa => "CREATE_CHILD_SA",
            ExchangeType::Informational => "INFORMATIONAL",
        }
    }

    pub fn is_encrypted(self) -> bool {
        self != ExchangeType::IkeSaInit
    }
}

pub fn group_id(name: &str) -> Option<u16> {
    Some(match name {
        registry::MODP_2048 => 14,
        registry::ECP_384 => 20,
        registry::X25519 => 31,
        registry::ML_KEM_512 => 35,
        registry::ML_KEM_768 => 36,
        registry::ML_KEM_1024 => 37,
        _ => return None,
    })
}

pub fn group_by_id(id: u16) -> Option<&'static str> {
    Some(match id {
        14 => registry::MODP_2048,
        20 => registry::ECP_384,
        31 => registry::X25519,
        35 => registry::ML_KEM_512,
        36 => registry::ML_KEM_768,
        37 => registry::ML_KEM_1024,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub spi_i: u64,
    pub spi_r: u64,
    pub next_payload: u8,
    pub exchange: ExchangeType,
    pub flags: u8,
    pub message_id: u32,
    pub length: u32,
}

impl Header {
    pub fn is_response(&self) -> bool {
        self.flags & FLAG_RESPONSE != 0
    }

    pub fn from_initiator(&self) -> bool {
        self.flags & FLAG_INITIATOR != 0
    }

    fn encode(&self) -> [u8; IKE_HEADER_LEN] {
        let mut w = Writer::new();
        w.u64(self.spi_i)
            .u64(self.spi_r)
            .u8(self.next_payload)
            .u8(VERSION)
            .u8(self.exchange.code())
            .u8(self.flags)
            .u32(self.message_id)
            .u32(self.length);
        w.finish().try_into().expect("fixed header")
    }

    fn read(r: &mut Reader<'_>) -> Result<Header> {
        let bad = |_| IkeError::Malformed("header");
        let spi_i = r.u64().map_err(bad)?;
        let spi_r = r.u64().map_err(bad)?;
        let next_payload = r.u8().map_err(bad)?;
        if r.u8().map_err(bad)? != VERSION {
            return Err(IkeError::Malformed("version"));
        }
        let exchange = ExchangeType::from_code(r.u8().map_err(bad)?)
            .ok_or(IkeError::Malformed("exchange type"))?;
        let flags = r.u8().map_err(bad)?;
        let message_id = r.u32().map_err(bad)?;
        let length = r.u32().map_err(bad)?;
        Ok(Header {
            spi_i,
            spi_r,
            next_payload,
            exchange,
            flags,
            message_id,
            length,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSelector {
    pub start: [u8; 4],
    pub end: [u8; 4],
    pub start_port: u16,
    pub end_port: u16,
    pub protocol: u8,
}

impl TrafficSelector {
    pub fn subnet(a: u8, b: u8, c: u8) -> Self {
        TrafficSelector {
            start: [a, b, c, 0],
            end: [a, b, c, 255],
            start_port: 0,
            end_port: 65535,
            protocol: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Sa {
        spi: Option<u32>,
        proposals: Vec<Proposal>,
    },
    Ke {
        group: u16,
        data: Vec<u8>,
    },
    Nonce(Vec<u8>),
    Notify {
        ty: u16,
        data: Vec<u8>,
    },
    IdI(String),
    IdR(String),
    Cert(Vec<u8>),
    CertReq(Vec<u8>),
    Auth {
        method: u8,
        data: Vec<u8>,
    },
    TsI(Vec<TrafficSelector>),
    TsR(Vec<TrafficSelector>),
    Delete {
        protocol: u8,
        spis: Vec<u64>,
    },
}

pub fn notify_name(ty: u16) -> String {
    match ty {
        super::INTERMEDIATE_EXCHANGE_SUPPORTED => "INTERMEDIATE_EXCHANGE_SUPPORTED".into(),
        super::PPK_IDENTITY => "PPK_IDENTITY".into(),
        super::USE_PPK => "USE_PPK".into(),
        super::NO_PROPOSAL_CHOSEN => "NO_PROPOSAL_CHOSEN".into(),
        super::AUTHENTICATION_FAILED => "AUTHENTICATION_FAILED".into(),
        super::INVALID_SYNTAX => "INVALID_SYNTAX".into(),
        super::NAT_DETECTION_SOURCE_IP => "NAT_DETECTION_SOURCE_IP".into(),
        super::UNKNOWN_PPK_ID => "UNKNOWN_PPK_ID".into(),
        t => format!("{t}"),
    }
}

impl Payload {
    fn type_code(&self) -> u8 {
        match self {
            Payload::Sa { .. } => ptype::SA,
            Payload::Ke { .. } => ptype::KE,
            Payload::Nonce(_) => ptype::NONCE,
            Payload::Notify { .. } => ptype::NOTIFY,
            Payload::IdI(_) => ptype::IDI,
            Payload::IdR(_) => ptype::IDR,
            Payload::Cert(_) => ptype::CERT,
            Payload::CertReq(_) => ptype::CERTREQ,
            Payload::Auth { .. } => ptype::AUTH,
            Payload::TsI(_) => ptype::TSI,
            Payload::TsR(_) => ptype::TSR,
            Payload::Delete { .. } => ptype::DELETE,
        }
    }

    /// Short label used in transcripts, e.g. `KE` or `N(PPK_IDENTITY)`.
    pub fn label(&self) -> String {
        match self {
            Payload::Sa { .. } => "SA".into(),
            Payload::Ke { .. } => "KE".into(),
            Payload::Nonce(_) => "Nonce".into(),
            Payload::Notify { ty, .. } => format!("N({})", notify_name(*ty)),
            Payload::IdI(_) => "IDi".into(),
            Payload::IdR(_) => "IDr".into(),
            Payload::Cert(_) => "CERT".into(),
            Payload::CertReq(_) => "CERTREQ".into(),
            Payload::Auth { .. } => "AUTH".into(),
            Payload::TsI(_) => "TSi".into(),
            Payload::TsR(_) => "TSr".into(),
            Payload::Delete { .. } => "DELETE".into(),
        }
    }

    fn body(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Payload::Sa { spi, proposals } => {
                match spi {
                    Some(s) => w.u8(1).u32(*s),
                    None => w.u8(0),
                };
                w.u8(proposals.len() as u8);
                for p in proposals {
                    w.vec8(p.to_string().as_bytes());
                }
            }
            Payload::Ke { group, data } => {
                w.u16(*group).bytes(data);
            }
            Payload::Nonce(n) | Payload::Cert(n) | Payload::CertReq(n) => {
                w.bytes(n);
            }
            Payload::Notify { ty, data } => {
                w.u16(*ty).bytes(data);
            }
            Payload::IdI(s) | Payload::IdR(s) => {
                w.bytes(s.as_bytes());
            }
            Payload::Auth { method, data } => {
                w.u8(*method).bytes(data);
            }
            Payload::TsI(ts) | Payload::TsR(ts) => {
                w.u8(ts.len() as u8);
                for t in ts {
                    w.bytes(&t.start)
                        .bytes(&t.end)
                        .u16(t.start_port)
                        .u16(t.end_port)
                        .u8(t.protocol);
                }
            }
            Payload::Delete { protocol, spis } => {
                w.u8(*protocol).u8(spis.len() as u8);
                for s in spis {
                    w.u64(*s);
                }
            }
        }
        w.finish()
    }

    fn decode(t: u8, body: &[u8]) -> Result<Payload> {
        let bad = |_| IkeError::Malformed("payload");
        let mut r = Reader::new(body);
        let p = match t {
            ptype::SA => {
                let spi = match r.u8().map_err(bad)? {
                    0 => None,
                    1 => Some(r.u32().map_err(bad)?),
                    _ => return Err(IkeError::Malformed("SA")),
                };
                let n = r.u8().map_err(bad)?;
                let mut proposals = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    let s = core::str::from_utf8(r.vec8().map_err(bad)?)
                        .map_err(|_| IkeError::Malformed("SA"))?;
                    proposals.push(s.parse().map_err(|_| IkeError::Malformed("SA"))?);
                }
                Payload::Sa { spi, proposals }
            }
            ptype::KE => Payload::Ke {
                group: r.u16().map_err(bad)?,
                data: r.rest().to_vec(),
            },
            ptype::NONCE => Payload::Nonce(r.rest().to_vec()),
            ptype::CERT => Payload::Cert(r.rest().to_vec()),
            ptype::CERTREQ => Payload::CertReq(r.rest().to_vec()),
            ptype::NOTIFY => Payload::Notify {
                ty: r.u16().map_err(bad)?,
                data: r.rest().to_vec(),
            },
            ptype::IDI | ptype::IDR => {
                let s = core::str::from_utf8(r.rest())
                    .map_err(|_| IkeError::Malformed("ID"))?
                    .to_string();
                if t == ptype::IDI {
                    Payload::IdI(s)
                } else {
                    Payload::IdR(s)
                }
            }
            ptype::AUTH => Payload::Auth {
                method: r.u8().map_err(bad)?,
                data: r.rest().to_vec(),
            },
            ptype::TSI | ptype::TSR => {
                let n = r.u8().map_err(bad)?;
                let mut ts = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    let start = r.take(4).map_err(bad)?.try_into().expect("4 bytes");
                    let end = r.take(4).map_err(bad)?.try_into().expect("4 bytes");
                    let start_port = r.u16().map_err(bad)?;
                    let end_port = r.u16().map_err(bad)?;
                    let protocol = r.u8().map_err(bad)?;
                    ts.push(TrafficSelector {
                        start,
                        end,
                        start_port,
                        end_port,
                        protocol,
                    });
                }
                if t == ptype::TSI {
                    Payload::TsI(ts)
                } else {
                    Payload::TsR(ts)
                }
            }
            ptype::DELETE => {
                let protocol = r.u8().map_err(bad)?;
                let n = r.u8().map_err(bad)?;
                let spis = (0..n)
                    .map(|_| r.u64().map_err(bad))
                    .collect::<Result<Vec<_>>>()?;
                Payload::Delete { protocol, spis }
            }
            _ => return Err(IkeError::Malformed("payload type")),
        };
        if !r.is_empty() {
            return Err(IkeError::Malformed("payload"));
        }
        Ok(p)
    }
}

pub fn encode_payloads(payloads: &[Payload]) -> Vec<u8> {
    let mut w = Writer::new();
    for p in payloads {
        w.u8(p.type_code()).vec24(&p.body());
    }
    w.finish()
}

pub fn decode_payloads(bytes: &[u8]) -> Result<Vec<Payload>> {
    let mut r = Reader::new(bytes);
    let mut out = Vec::new();
    while !r.is_empty() {
        let t = r.u8().map_err(|_| IkeError::Malformed("payload"))?;
        let body = r.vec24().map_err(|_| IkeError::Malformed("payload"))?;
        out.push(Payload::decode(t, body)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub header: Header,
    pub payloads: Vec<Payload>,
}

impl Message {
    pub fn new(
        exchange: ExchangeType,
        spi_i: u64,
        spi_r: u64,
        message_id: u32,
        flags: u8,
        payloads: Vec<Payload>,
    ) -> Self {
        Message {
            header: Header {
                spi_i,
                spi_r,
                next_payload: 0,
                exchange,
                flags,
                message_id,
                length: 0,
            },
            payloads,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.payloads.iter().map(Payload::label).collect()
    }

    /// Unencrypted datagram; only IKE_SA_INIT travels this way.
    pub fn encode_plain(&self) -> Vec<u8> {
        let body = encode_payloads(&self.payloads);
        let mut h = self.header;
        h.next_payload = self.payloads.first().map_or(0, Payload::type_code);
        h.length = (IKE_HEADER_LEN + body.len()) as u32;
        let mut out = Vec::with_capacity(4 + h.length as usize);
        out.extend_from_slice(&NON_ESP_MARKER);
        out.extend_from_slice(&h.encode());
        out.extend_from_slice(&body);
        out
    }
}

fn iv_for(h: &Header, frag: u16) -> u64 {
    ((h.message_id as u64) << 32) | ((h.is_response() as u64) << 16) | frag as u64
}

fn seal_one(
    h: &Header,
    key: &DirectionKeys,
    frag: Option<(u16, u16)>,
    pt: &[u8],
) -> Result<Vec<u8>> {
    let mut h = *h;
    let extra = if frag.is_some() { 4 } else { 0 };
    let payload_len = PAYLOAD_HEADER_LEN + extra + IV_LEN + pt.len() + TAG_LEN;
    h.next_payload = if frag.is_some() {
        ptype::SKF
    } else {
        ptype::SK
    };
    h.length = (IKE_HEADER_LEN + payload_len) as u32;
    let mut aad = Writer::new();
    aad.bytes(&h.encode())
        .u8(h.next_payload)
        .u24(payload_len - PAYLOAD_HEADER_LEN);
    if let Some((n, total)) = frag {
        aad.u16(n).u16(total);
    }
    let aad = aad.finish();
    let iv = iv_for(&h, frag.map_or(0, |f| f.0));
    let ct = aead::seal(&key.key[..], &key.nonce(iv), &aad, pt)?;
    let mut out = Vec::with_capacity(4 + h.length as usize);
    out.extend_from_slice(&NON_ESP_MARKER);
    out.extend_from_slice(&aad);
    out.extend_from_slice(&iv.to_be_bytes());
    out.extend_from_slice(&ct);
    Ok(out)
}

/// Seals an encrypted-exchange message, splitting the plaintext into SKF
/// fragments of at most `max_len` bytes when it does not fit in one.
pub fn seal_message(
    msg: &Message,
    key: &DirectionKeys,
    max_len: Option<usize>,
) -> Result<Vec<Vec<u8>>> {
    if !msg.header.exchange.is_encrypted() {
        return Err(IkeError::UnexpectedMessage("unencrypted"));
    }
    let pt = encode_payloads(&msg.payloads);
    match max_len {
        Some(m) if pt.len() > m => fragment_encrypted(msg, key, m),
        _ => Ok(alloc::vec![seal_one(&msg.header, key, None, &pt)?]),
    }
}

/// Splits `msg` into individually encrypted SKF fragments carrying at most
/// `max_len` plaintext bytes each.
pub fn fragment_encrypted(
    msg: &Message,
    key: &DirectionKeys,
    max_len: usize,
) -> Result<Vec<Vec<u8>>> {
    if !msg.header.exchange.is_encrypted() {
        return Err(IkeError::FragmentationNotAllowed);
    }
    if max_len == 0 {
        return Err(IkeError::MalformedFragment);
    }
    let pt = encode_payloads(&msg.payloads);
    let chunks: Vec<&[u8]> = pt.chunks(max_len).collect();
    let total = u16::try_from(chunks.len()).map_err(|_| IkeError::MalformedFragment)?;
    chunks
        .iter()
        .enumerate()
        .map(|(i, c)| seal_one(&msg.header, key, Some((i as u16 + 1, total)), c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body<'a> {
    Plain(Vec<Payload>),
    Sealed {
        frag: Option<(u16, u16)>,
        aad: &'a [u8],
        iv: u64,
        ct: &'a [u8],
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<'a> {
    pub header: Header,
    pub body: Body<'a>,
}

/// Parses a datagram without decrypting it.
pub fn parse(datagram: &[u8]) -> Result<Parsed<'_>> {
    let data = datagram
        .strip_prefix(&NON_ESP_MARKER[..])
        .ok_or(IkeError::Malformed("marker"))?;
    let mut r = Reader::new(data);
    let header = Header::read(&mut r)?;
    if header.length as usize != data.len() {
        return Err(IkeError::Malformed("length"));
    }
    let rest = r.rest();
    let body = match header.next_payload {
        ptype::SK | ptype::SKF => {
            let mut r = Reader::new(rest);
            let bad = |_| IkeError::Malformed("SK payload");
            let t = r.u8().map_err(bad)?;
            let len = r.u24().map_err(bad)?;
            let frag = if t == ptype::SKF {
                let n = r.u16().map_err(bad)?;
                let total = r.u16().map_err(bad)?;
                if n == 0 || n > total {
                    return Err(IkeError::MalformedFragment);
                }
                Some((n, total))
            } else {
                None
            };
            let hdr_len = rest.len() - r.remaining();
            if len + PAYLOAD_HEADER_LEN != rest.len() {
                return Err(IkeError::Malformed("SK payload"));
            }
            let iv = r.u64().map_err(bad)?;
            let ct = r.rest();
            if ct.len() < TAG_LEN || iv != iv_for(&header, frag.map_or(0, |f| f.0)) {
                return Err(IkeError::Malformed("SK payload"));
            }
            Body::Sealed {
                frag,
                aad: &data[..IKE_HEADER_LEN + hdr_len],
                iv,
                ct,
            }
        }
        _ => {
            if header.exchange.is_encrypted() {
                return Err(IkeError::UnexpectedMessage("unencrypted"));
            }
            Body::Plain(decode_payloads(rest)?)
        }
    };
    Ok(Parsed { header, body })
}

pub fn open_sealed(body: &Body<'_>, key: &DirectionKeys) -> Result<Vec<u8>> {
    match body {
        Body::Sealed { aad, iv, ct, .. } => aead::open(&key.key[..], &key.nonce(*iv), aad, ct)
            .map_err(|_| IkeError::AuthenticationFailure),
        Body::Plain(_) => Err(IkeError::UnexpectedMessage("unencrypted")),
    }
}

/// Collects verified SKF plaintexts for one message.
#[derive(Debug, Default)]
pub struct FragmentBuffer {
    key: Option<(u32, bool)>,
    total: u16,
    parts: BTreeMap<u16, Vec<u8>>,
}

impl FragmentBuffer {
    pub fn add(&mut self, h: &Header, frag: (u16, u16), pt: Vec<u8>) -> Result<Option<Vec<u8>>> {
        let id = (h.message_id, h.is_response());
        if self.key != Some(id) {
            self.key = Some(id);
            self.total = frag.1;
            self.parts.clear();
        }
        if frag.1 != self.total {
            return Err(IkeError::MalformedFragment);
        }
        if let Some(prev) = self.parts.get(&frag.0) {
            if *prev != pt {
                return Err(IkeError::MalformedFragment);
            }
        }
        self.parts.insert(frag.0, pt);
        if self.parts.len() == self.total as usize {
            let out = self.parts.values().flatten().copied().collect();
            self.parts.clear();
            self.key = None;
            return Ok(Some(out));
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn key() -> DirectionKeys {
        DirectionKeys::from_bytes(&[7u8; 36])
    }

    fn auth_message(cert_len: usize) -> Message {
        Message::new(
            ExchangeType::IkeAuth,
            1,
            2,
            2,
            FLAG_INITIATOR,
            vec![Payload::Cert(vec![0xc3; cert_len])],
        )
    }

    #[test]
    fn payload_round_trip() {
        let ps = vec![
            Payload::Sa {
                spi: Some(9),
                proposals: vec!["aes256gcm16-sha384-x25519-ke1_mlkem768".parse().unwrap()],
            },
            Payload::Ke {
                group: 31,
                data: vec![1; 32],
            },
            Payload::Nonce(vec![2; 32]),
            Payload::Notify {
                ty: super::super::PPK_IDENTITY,
                data: b"id".to_vec(),
            },
            Payload::IdI("CN=a".into()),
            Payload::Auth {
                method: 14,
                data: vec![3; 10],
            },
            Payload::TsI(vec![TrafficSelector::subnet(10, 0, 0)]),
            Payload::Delete {
                protocol: 1,
                spis: vec![],
            },
        ];
        assert_eq!(decode_payloads(&encode_payloads(&ps)).unwrap(), ps);
    }

    #[test]
    fn nine_kb_auth_is_eight_fragments() {
        let m = auth_message(9216 - PAYLOAD_HEADER_LEN);
        assert_eq!(encode_payloads(&m.payloads).len(), 9216);
        let frags = fragment_encrypted(&m, &key(), 1200).unwrap();
        assert_eq!(frags.len(), 8);
        let mut buf = FragmentBuffer::default();
        let mut done = None;
        for f in frags.iter().rev() {
            let p = parse(f).unwrap();
            let pt = open_sealed(&p.body, &key()).unwrap();
            let Body::Sealed { frag: Some(fr), .. } = p.body else {
                panic!()
            };
            done = buf.add(&p.header, fr, pt).unwrap();
        }
        assert_eq!(decode_payloads(&done.unwrap()).unwrap(), m.payloads);
    }

    #[test]
    fn sa_init_cannot_fragment() {
        let m = Message::new(
            ExchangeType::IkeSaInit,
            1,
            0,
            0,
            FLAG_INITIATOR,
            vec![Payload::Nonce(vec![0; 32])],
        );
        assert_eq!(
            fragment_encrypted(&m, &key(), 100).unwrap_err(),
            IkeError::FragmentationNotAllowed
        );
    }

    #[test]
    fn each_fragment_is_authenticated() {
        let frags = fragment_encrypted(&auth_message(3000), &key(), 1000).unwrap();
        let mut bad = frags[1].clone();
        let n = bad.len();
        bad[n - 20] ^= 1;
        let p = parse(&bad).unwrap();
        assert_eq!(
            open_sealed(&p.body, &key()).unwrap_err(),
            IkeError::AuthenticationFailure
        );
        let other = DirectionKeys::from_bytes(&[8u8; 36]);
        let p = parse(&frags[0]).unwrap();
        assert_eq!(
            open_sealed(&p.body, &other).unwrap_err(),
            IkeError::AuthenticationFailure
        );
    }

    #[test]
    fn encrypted_exchange_must_be_sealed() {
        let plain = auth_message(10).encode_plain();
        assert!(matches!(parse(&plain), Err(IkeError::UnexpectedMessage(_))));
    }
}
