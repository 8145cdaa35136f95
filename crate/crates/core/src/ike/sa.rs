//! Sans-IO IKE SA state machine with one child SA.

use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::any::Any;
use serde::Serialize;
use zeroize::Zeroizing;

use super::keys::{self, ChildKeys, DirectionKeys, IkeKeys, KeyInputs};
use super::message::{
    self, group_by_id, group_id, Body, ExchangeType, FragmentBuffer, Header, Message, Payload,
    TrafficSelector, FLAG_INITIATOR, FLAG_RESPONSE, SKF_OVERHEAD,
};
use super::proposal::{negotiate, Proposal};
use super::{
    IkeError, Result, INTERMEDIATE_EXCHANGE_SUPPORTED, NAT_DETECTION_SOURCE_IP, PPK_IDENTITY,
    PPK_LEN,
};
use crate::channel::{Direction, Outgoing, Role, DATAGRAM_OVERHEAD};
use crate::crypto::aead;
use crate::crypto::hash::sha256;
use crate::crypto::kem::{self, KemKeyPair};
use crate::crypto::sig::{self, SigKeyPair};
use crate::crypto::suite::ProtectionMode;
use crate::entropy::{EntropySource, SeedOperation};
use crate::netsim::{Endpoint, EndpointStatus};
use crate::pki::{self, CertChain, Certificate, KeyUsage, RejectReason, RevocationView};
use crate::time::{SimDuration, SimTime};

pub const INITIAL_RTO: SimDuration = SimDuration::from_millis(400);
pub const MAX_RTO: SimDuration = SimDuration::from_secs(3);
pub const MAX_RETRANSMITS: u32 = 8;
pub const EXCHANGE_ORDER: [ExchangeType; 5] = [
    ExchangeType::IkeSaInit,
    ExchangeType::IkeIntermediate,
    ExchangeType::IkeAuth,
    ExchangeType::CreateChildSa,
    ExchangeType::Informational,
];

const AUTH_CONTEXT: &[u8] = b"qran IKE AUTH";
const AUTH_DIGITAL_SIGNATURE: u8 = 14;
const NONCE_LEN: usize = 32;
const PROTO_IKE: u8 = 1;
const ESP_REPLAY_WINDOW: u64 = 64;

#[derive(Clone)]
pub struct PpkEntry {
    pub ppk_id: String,
    ppk: Zeroizing<[u8; PPK_LEN]>,
}

impl core::fmt::Debug for PpkEntry {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PpkEntry")
            .field("ppk_id", &self.ppk_id)
            .finish_non_exhaustive()
    }
}

impl PpkEntry {
    pub fn new(ppk_id: &str, ppk: &[u8]) -> Result<Self> {
        let arr: [u8; PPK_LEN] = ppk.try_into().map_err(|_| IkeError::BadPpkLength)?;
        Ok(PpkEntry {
            ppk_id: ppk_id.to_string(),
            ppk: Zeroizing::new(arr),
        })
    }

    pub fn generate(ppk_id: &str, entropy: &mut EntropySource) -> Result<Self> {
        Self::new(ppk_id, &entropy.draw(PPK_LEN)?)
    }

    pub fn secret(&self) -> &[u8] {
        &self.ppk[..]
    }
}

#[derive(Debug, Clone)]
pub struct IkeConfig {
    pub role: Role,
    pub ike_proposals: Vec<Proposal>,
    pub esp_proposals: Vec<Proposal>,
    pub chain: CertChain,
    pub private_key: SigKeyPair,
    pub trust_anchor: Certificate,
    pub revocation: RevocationView,
    pub intermediate_supported: bool,
    /// PPK the initiator offers.
    pub ppk: Option<PpkEntry>,
    /// PPKs a responder can resolve by id.
    pub ppk_store: Vec<PpkEntry>,
    pub require_ppk: bool,
    pub ts_i: Vec<TrafficSelector>,
    pub ts_r: Vec<TrafficSelector>,
    pub mtu: usize,
    pub child_lifetime: SimDuration,
}

impl IkeConfig {
    pub fn new(
        role: Role,
        mode: ProtectionMode,
        chain: CertChain,
        private_key: SigKeyPair,
        anchor: Certificate,
    ) -> Self {
        let ike = match mode {
            ProtectionMode::Classical => "aes256gcm16-sha384-x25519",
            _ => "aes256gcm16-sha384-x25519-ke1_mlkem768",
        };
        IkeConfig {
            role,
            ike_proposals: alloc::vec![ike.parse().expect("static proposal")],
            esp_proposals: alloc::vec!["aes256gcm16-sha384".parse().expect("static proposal")],
            chain,
            private_key,
            trust_anchor: anchor,
            revocation: RevocationView::new(),
            intermediate_supported: mode != ProtectionMode::Classical,
            ppk: None,
            ppk_store: Vec::new(),
            require_ppk: false,
            ts_i: alloc::vec![TrafficSelector::subnet(10, 0, 1)],
            ts_r: alloc::vec![TrafficSelector::subnet(10, 0, 2)],
            mtu: 1500,
            child_lifetime: SimDuration::from_secs(3600),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ike_proposals.is_empty() || self.esp_proposals.is_empty() {
            return Err(IkeError::Config("empty proposal list".into()));
        }
        if self.ike_proposals.iter().any(|p| p.dh.is_none()) {
            return Err(IkeError::Config(
                "IKE proposal without a classical group".into(),
            ));
        }
        let leaf = self
            .chain
            .leaf()
            .ok_or_else(|| IkeError::Config("empty certificate chain".into()))?;
        if leaf.spki.public_key != self.private_key.public_key
            || leaf.spki.profile_name != self.private_key.name()
        {
            return Err(IkeError::Config(
                "leaf certificate does not match private key".into(),
            ));
        }
        if self.mtu < crate::channel::MIN_MTU {
            return Err(IkeError::Config("mtu below 256".into()));
        }
        Ok(())
    }

    fn max_fragment(&self) -> usize {
        self.mtu - DATAGRAM_OVERHEAD - SKF_OVERHEAD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Init,
    Intermediate,
    Auth,
    Established,
    Closed,
    Failed,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Init => "INIT",
            Phase::Intermediate => "INTERMEDIATE",
            Phase::Auth => "AUTH",
            Phase::Established => "ESTABLISHED",
            Phase::Closed => "CLOSED",
            Phase::Failed => "FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IkeLogEntry {
    pub exchange: ExchangeType,
    pub direction: Direction,
    pub response: bool,
    pub message_id: u32,
    pub payloads: Vec<String>,
    /// Length of the KE payload's key-exchange data, if present.
    pub ke_len: Option<usize>,
    pub bytes: usize,
    pub fragments: usize,
    pub encrypted: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IkeStats {
    pub datagrams_sent: u64,
    pub bytes_sent: u64,
    pub retransmitted_datagrams: u64,
    pub esp_dropped: u64,
    /// SK payloads that failed AEAD verification and were discarded.
    pub sk_dropped: u64,
}

#[derive(Debug, Clone)]
pub struct ChildSa {
    pub spi_i: u32,
    pub spi_r: u32,
    pub proposal: Proposal,
    pub ts_i: Vec<TrafficSelector>,
    pub ts_r: Vec<TrafficSelector>,
    pub rekey_deadline: SimTime,
    role: Role,
    keys: Option<ChildKeys>,
    send_seq: u32,
    highest: u64,
    bitmap: u64,
}

impl ChildSa {
    fn new(
        role: Role,
        spi_i: u32,
        spi_r: u32,
        proposal: Proposal,
        keys: ChildKeys,
        cfg: &IkeConfig,
        now: SimTime,
    ) -> Self {
        ChildSa {
            spi_i,
            spi_r,
            proposal,
            ts_i: cfg.ts_i.clone(),
            ts_r: cfg.ts_r.clone(),
            rekey_deadline: now + cfg.child_lifetime,
            role,
            keys: Some(keys),
            send_seq: 0,
            highest: 0,
            bitmap: 0,
        }
    }

    pub fn keys(&self) -> Option<&ChildKeys> {
        self.keys.as_ref()
    }

    fn inbound_spi(&self) -> u32 {
        match self.role {
            Role::Client => self.spi_i,
            Role::Server => self.spi_r,
        }
    }

    fn directions(&self) -> Result<(&DirectionKeys, &DirectionKeys)> {
        let k = self.keys.as_ref().ok_or(IkeError::SaClosed)?;
        Ok(match self.role {
            Role::Client => (&k.i_to_r, &k.r_to_i),
            Role::Server => (&k.r_to_i, &k.i_to_r),
        })
    }

    /// `SPI | seq | AES-256-GCM(payload)` addressed to the peer's inbound SPI.
    pub fn seal(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        let spi = match self.role {
            Role::Client => self.spi_r,
            Role::Server => self.spi_i,
        };
        self.send_seq = self.send_seq.checked_add(1).ok_or(IkeError::Crypto(
            crate::crypto::CryptoError::NonceBudgetExceeded,
        ))?;
        let seq = self.send_seq;
        let (out, _) = self.directions()?;
        let mut hdr = [0u8; 8];
        hdr[..4].copy_from_slice(&spi.to_be_bytes());
        hdr[4..].copy_from_slice(&seq.to_be_bytes());
        let ct = aead::seal(&out.key[..], &out.nonce(seq as u64), &hdr, payload)?;
        let mut pkt = hdr.to_vec();
        pkt.extend_from_slice(&ct);
        Ok(pkt)
    }

    pub fn open(&mut self, packet: &[u8]) -> Result<Vec<u8>> {
        if packet.len() < 8 + aead::TAG_LEN {
            return Err(IkeError::Malformed("ESP packet"));
        }
        let spi = u32::from_be_bytes(packet[..4].try_into().expect("4 bytes"));
        let seq = u32::from_be_bytes(packet[4..8].try_into().expect("4 bytes")) as u64;
        if spi != self.inbound_spi() {
            return Err(IkeError::Malformed("unknown SPI"));
        }
        let (_, inb) = self.directions()?;
        if seq == 0
            || (seq <= self.highest
                && (self.highest - seq >= ESP_REPLAY_WINDOW
                    || self.bitmap >> (self.highest - seq) & 1 == 1))
        {
            return Err(IkeError::ReplayDetected);
        }
        let pt = aead::open(&inb.key[..], &inb.nonce(seq), &packet[..8], &packet[8..])
            .map_err(|_| IkeError::AuthenticationFailure)?;
        if seq > self.highest {
            let shift = seq - self.highest;
            self.bitmap = if shift >= 64 { 0 } else { self.bitmap << shift };
            self.bitmap |= 1;
            self.highest = seq;
        } else {
            self.bitmap |= 1 << (self.highest - seq);
        }
        Ok(pt)
    }

    fn close(&mut self) {
        self.keys = None;
    }
}

#[derive(Debug)]
struct Outstanding {
    message_id: u32,
    exchange: ExchangeType,
    datagrams: Vec<Vec<u8>>,
    rto: SimDuration,
    deadline: SimTime,
    retransmits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Queued {
    Rekey(Option<Vec<Proposal>>, Option<&'static str>),
    Delete,
}

struct PendingRekey {
    nonce: Vec<u8>,
    spi: u32,
    kem: Option<KemKeyPair>,
    proposals: Vec<Proposal>,
}

pub struct IkeSa {
    cfg: IkeConfig,
    entropy: EntropySource,
    phase: Phase,
    error: Option<IkeError>,
    last_error: Option<IkeError>,
    now: SimTime,
    started: bool,
    spi_i: u64,
    spi_r: u64,
    ni: Vec<u8>,
    nr: Vec<u8>,
    dh: Option<KemKeyPair>,
    kem: Option<KemKeyPair>,
    dh_shared: Zeroizing<Vec<u8>>,
    kem_shared: Option<Zeroizing<Vec<u8>>>,
    chosen: Option<Proposal>,
    peer_intermediate: bool,
    intermediate_used: bool,
    ppk_used: bool,
    keys: Option<IkeKeys>,
    first_msg_i: Vec<u8>,
    first_msg_r: Vec<u8>,
    int_auth_i: Vec<u8>,
    int_auth_r: Vec<u8>,
    next_msg_id: u32,
    expected_msg_id: u32,
    outstanding: Option<Outstanding>,
    cached: Option<(u32, Vec<Vec<u8>>)>,
    frags: FragmentBuffer,
    rx_bytes: usize,
    rx_frags: usize,
    child: Option<ChildSa>,
    rekey: Option<PendingRekey>,
    queue: VecDeque<Queued>,
    pending: Vec<Outgoing>,
    inbox: VecDeque<Vec<u8>>,
    log: Vec<IkeLogEntry>,
    peer_identity: Option<String>,
    stats: IkeStats,
}

impl core::fmt::Debug for IkeSa {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("IkeSa")
            .field("role", &self.cfg.role)
            .field("phase", &self.phase)
            .finish_non_exhaustive()
    }
}

fn u64_nonzero(b: &[u8]) -> u64 {
    u64::from_be_bytes(b[..8].try_into().expect("8 bytes")).max(1)
}

fn u32_nonzero(b: &[u8]) -> u32 {
    u32::from_be_bytes(b[..4].try_into().expect("4 bytes")).max(1)
}

fn exchange_flight(x: ExchangeType) -> u8 {
    EXCHANGE_ORDER.iter().position(|e| *e == x).expect("listed") as u8 + 1
}

fn find_notify(ps: &[Payload], ty: u16) -> Option<&[u8]> {
    ps.iter().find_map(|p| match p {
        Payload::Notify { ty: t, data } if *t == ty => Some(&data[..]),
        _ => None,
    })
}

fn error_notify(ps: &[Payload]) -> Option<IkeError> {
    ps.iter().find_map(|p| match p {
        Payload::Notify { ty, .. } => IkeError::from_notify(*ty),
        _ => None,
    })
}

fn ke_payload(ps: &[Payload]) -> Option<(u16, &[u8])> {
    ps.iter().find_map(|p| match p {
        Payload::Ke { group, data } => Some((*group, &data[..])),
        _ => None,
    })
}

fn nonce_payload(ps: &[Payload]) -> Result<&[u8]> {
    ps.iter()
        .find_map(|p| match p {
            Payload::Nonce(n) => Some(&n[..]),
            _ => None,
        })
        .ok_or(IkeError::Malformed("missing nonce"))
}

fn sa_payload(ps: &[Payload]) -> Result<(Option<u32>, &[Proposal])> {
    ps.iter()
        .find_map(|p| match p {
            Payload::Sa { spi, proposals } => Some((*spi, &proposals[..])),
            _ => None,
        })
        .ok_or(IkeError::Malformed("missing SA"))
}

fn signed_octets(
    first_msg: &[u8],
    peer_nonce: &[u8],
    sk_p: &[u8],
    id: &str,
    int_auth: &[u8],
) -> Vec<u8> {
    let mut v = first_msg.to_vec();
    v.extend_from_slice(peer_nonce);
    v.extend_from_slice(&keys::prf(sk_p, &[id.as_bytes()]));
    v.extend_from_slice(&keys::prf(sk_p, &[int_auth]));
    v
}

impl IkeSa {
    pub fn new(cfg: IkeConfig, entropy: EntropySource) -> Result<Self> {
        cfg.validate()?;
        Ok(IkeSa {
            cfg,
            entropy,
            phase: Phase::Init,
            error: None,
            last_error: None,
            now: SimTime::ZERO,
            started: false,
            spi_i: 0,
            spi_r: 0,
            ni: Vec::new(),
            nr: Vec::new(),
            dh: None,
            kem: None,
            dh_shared: Zeroizing::new(Vec::new()),
            kem_shared: None,
            chosen: None,
            peer_intermediate: false,
            intermediate_used: false,
            ppk_used: false,
            keys: None,
            first_msg_i: Vec::new(),
            first_msg_r: Vec::new(),
            int_auth_i: Vec::new(),
            int_auth_r: Vec::new(),
            next_msg_id: 0,
            expected_msg_id: 0,
            outstanding: None,
            cached: None,
            frags: FragmentBuffer::default(),
            rx_bytes: 0,
            rx_frags: 0,
            child: None,
            rekey: None,
            queue: VecDeque::new(),
            pending: Vec::new(),
            inbox: VecDeque::new(),
            log: Vec::new(),
            peer_identity: None,
            stats: IkeStats::default(),
        })
    }

    pub fn role(&self) -> Role {
        self.cfg.role
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn error(&self) -> Option<&IkeError> {
        self.error.as_ref()
    }

    /// Error from the most recent post-AUTH exchange that left the SA up.
    pub fn last_error(&self) -> Option<&IkeError> {
        self.last_error.as_ref()
    }

    pub fn message_id(&self) -> u32 {
        self.next_msg_id.max(self.expected_msg_id)
    }

    pub fn peer_supports_intermediate(&self) -> bool {
        self.peer_intermediate
    }

    /// True when an IKE_INTERMEDIATE KEM secret was folded into the keys.
    pub fn pq_key_exchange(&self) -> bool {
        self.intermediate_used
    }

    pub fn ppk_used(&self) -> bool {
        self.ppk_used
    }

    pub fn negotiated(&self) -> Option<&Proposal> {
        self.chosen.as_ref()
    }

    pub fn ike_keys(&self) -> Option<&IkeKeys> {
        self.keys.as_ref()
    }

    pub fn child(&self) -> Option<&ChildSa> {
        self.child.as_ref()
    }

    pub fn child_mut(&mut self) -> Option<&mut ChildSa> {
        self.child.as_mut()
    }

    pub fn log(&self) -> &[IkeLogEntry] {
        &self.log
    }

    pub fn stats(&self) -> IkeStats {
        self.stats
    }

    /// Transcript values and asymmetric secrets, for offline recomputation.
    pub fn key_inputs(&self) -> KeyInputs {
        KeyInputs {
            ni: self.ni.clone(),
            nr: self.nr.clone(),
            spi_i: self.spi_i,
            spi_r: self.spi_r,
            dh_shared: self.dh_shared.to_vec(),
            kem_shared: self.kem_shared.as_ref().map(|s| s.to_vec()),
        }
    }

    fn is_initiator(&self) -> bool {
        self.cfg.role == Role::Client
    }

    fn own_id(&self) -> String {
        self.cfg
            .chain
            .leaf()
            .map(|c| c.subject.clone())
            .unwrap_or_default()
    }

    fn send_key(&self) -> Result<DirectionKeys> {
        let k = self
            .keys
            .as_ref()
            .ok_or(IkeError::InvalidState("no keys"))?;
        Ok(DirectionKeys::from_bytes(if self.is_initiator() {
            &k.sk_ei
        } else {
            &k.sk_er
        }))
    }

    fn recv_key(&self) -> Result<DirectionKeys> {
        let k = self
            .keys
            .as_ref()
            .ok_or(IkeError::InvalidState("no keys"))?;
        Ok(DirectionKeys::from_bytes(if self.is_initiator() {
            &k.sk_er
        } else {
            &k.sk_ei
        }))
    }

    fn encode(&mut self, msg: &Message) -> Result<Vec<Vec<u8>>> {
        if msg.header.exchange.is_encrypted() {
            message::seal_message(msg, &self.send_key()?, Some(self.cfg.max_fragment()))
        } else {
            Ok(alloc::vec![msg.encode_plain()])
        }
    }

    fn record(&mut self, msg: &Message, direction: Direction, bytes: usize, fragments: usize) {
        self.log.push(IkeLogEntry {
            exchange: msg.header.exchange,
            direction,
            response: msg.header.is_response(),
            message_id: msg.header.message_id,
            payloads: msg.labels(),
            ke_len: ke_payload(&msg.payloads).map(|(_, d)| d.len()),
            bytes,
            fragments,
            encrypted: msg.header.exchange.is_encrypted(),
        });
    }

    fn emit(&mut self, exchange: ExchangeType, datagrams: &[Vec<u8>], retransmission: bool) {
        for d in datagrams {
            self.stats.datagrams_sent += 1;
            self.stats.bytes_sent += d.len() as u64;
            if retransmission {
                self.stats.retransmitted_datagrams += 1;
            }
            self.pending.push(Outgoing {
                bytes: d.clone(),
                retransmission,
                flight: exchange_flight(exchange),
            });
        }
    }

    fn send_request(&mut self, exchange: ExchangeType, payloads: Vec<Payload>) -> Result<Vec<u8>> {
        let id = self.next_msg_id;
        self.next_msg_id += 1;
        let msg = Message::new(
            exchange,
            self.spi_i,
            self.spi_r,
            id,
            FLAG_INITIATOR,
            payloads,
        );
        let datagrams = self.encode(&msg)?;
        let bytes = datagrams.iter().map(Vec::len).sum();
        self.record(&msg, Direction::Sent, bytes, datagrams.len());
        self.emit(exchange, &datagrams, false);
        let first = datagrams[0].clone();
        self.outstanding = Some(Outstanding {
            message_id: id,
            exchange,
            datagrams,
            rto: INITIAL_RTO,
            deadline: self.now + INITIAL_RTO,
            retransmits: 0,
        });
        Ok(first)
    }

    fn send_response(&mut self, req: &Header, payloads: Vec<Payload>) -> Result<Vec<u8>> {
        let msg = Message::new(
            req.exchange,
            self.spi_i,
            self.spi_r,
            req.message_id,
            FLAG_RESPONSE,
            payloads,
        );
        let datagrams = self.encode(&msg)?;
        let bytes = datagrams.iter().map(Vec::len).sum();
        self.record(&msg, Direction::Sent, bytes, datagrams.len());
        self.emit(req.exchange, &datagrams, false);
        let first = datagrams[0].clone();
        self.cached = Some((req.message_id, datagrams));
        self.expected_msg_id = req.message_id + 1;
        Ok(first)
    }

    fn fail(&mut self, e: IkeError) {
        self.phase = Phase::Failed;
        self.error = Some(e);
        self.outstanding = None;
        self.queue.clear();
        self.keys = None;
        if let Some(c) = self.child.as_mut() {
            c.close();
        }
    }

    /// Queues a CREATE_CHILD_SA rekey. `esp` overrides the configured ESP
    /// proposals; `kem` adds a key exchange whose secret enters the keymat.
    pub fn rekey_child(
        &mut self,
        esp: Option<Vec<Proposal>>,
        kem: Option<&'static str>,
    ) -> Result<()> {
        if !self.is_initiator() {
            return Err(IkeError::InvalidState("responder"));
        }
        match self.phase {
            Phase::Established => {
                self.queue.push_back(Queued::Rekey(esp, kem));
                Ok(())
            }
            Phase::Closed => Err(IkeError::SaClosed),
            p => Err(IkeError::InvalidState(p.name())),
        }
    }

    /// Queues an INFORMATIONAL delete. Repeated calls have no further effect.
    pub fn delete(&mut self) -> Result<()> {
        if !self.is_initiator() {
            return Err(IkeError::InvalidState("responder"));
        }
        match self.phase {
            Phase::Established => {
                if !self.queue.contains(&Queued::Delete)
                    && self.outstanding.as_ref().map(|o| o.exchange)
                        != Some(ExchangeType::Informational)
                {
                    self.queue.push_back(Queued::Delete);
                }
                Ok(())
            }
            Phase::Closed => Ok(()),
            p => Err(IkeError::InvalidState(p.name())),
        }
    }

    pub fn send_esp(&mut self, data: &[u8]) -> Result<()> {
        if self.phase == Phase::Closed {
            return Err(IkeError::SaClosed);
        }
        if self.phase != Phase::Established {
            return Err(IkeError::InvalidState(self.phase.name()));
        }
        let pkt = self.child.as_mut().ok_or(IkeError::SaClosed)?.seal(data)?;
        self.pending.push(Outgoing {
            bytes: pkt,
            retransmission: false,
            flight: 0,
        });
        Ok(())
    }

    pub fn recv_esp(&mut self) -> Option<Vec<u8>> {
        self.inbox.pop_front()
    }

    pub fn next_timer(&self) -> Option<SimTime> {
        self.outstanding.as_ref().map(|o| o.deadline)
    }

    pub fn wants_drive(&self) -> bool {
        !self.pending.is_empty()
            || (!self.queue.is_empty()
                && self.outstanding.is_none()
                && self.phase == Phase::Established)
    }

    pub fn drive(&mut self, incoming: &[Vec<u8>], now: SimTime) -> Vec<Outgoing> {
        self.now = now;
        if let Err(e) = self.step(incoming) {
            self.fail(e);
        }
        core::mem::take(&mut self.pending)
    }

    fn step(&mut self, incoming: &[Vec<u8>]) -> Result<()> {
        if self.is_initiator() && !self.started {
            self.started = true;
            self.start()?;
        }
        for d in incoming {
            if matches!(self.phase, Phase::Failed) {
                break;
            }
            if d.len() >= 4 && d[..4] == message::NON_ESP_MARKER {
                self.on_datagram(d)?;
            } else if let Some(c) = self.child.as_mut() {
                match c.open(d) {
                    Ok(pt) => self.inbox.push_back(pt),
                    Err(_) => self.stats.esp_dropped += 1,
                }
            } else {
                self.stats.esp_dropped += 1;
            }
        }
        if let Some(o) = self.outstanding.as_mut() {
            if o.deadline <= self.now {
                if o.retransmits >= MAX_RETRANSMITS {
                    return Err(IkeError::Timeout);
                }
                o.retransmits += 1;
                o.rto = (o.rto + o.rto).min(MAX_RTO);
                o.deadline = self.now + o.rto;
                let (x, ds) = (o.exchange, o.datagrams.clone());
                self.emit(x, &ds, true);
            }
        }
        if self.outstanding.is_none() && self.phase == Phase::Established {
            if let Some(q) = self.queue.pop_front() {
                match q {
                    Queued::Rekey(esp, kem) => {
                        self.send_rekey(esp.unwrap_or_else(|| self.cfg.esp_proposals.clone()), kem)?
                    }
                    Queued::Delete => self.send_delete()?,
                }
            }
        }
        Ok(())
    }

    fn start(&mut self) -> Result<()> {
        let group = self.cfg.ike_proposals[0].dh.expect("validated");
        self.spi_i = u64_nonzero(&self.entropy.draw(8)?);
        self.ni = self.entropy.draw(NONCE_LEN)?;
        let seed = self.entropy.seed_for(group, SeedOperation::Keygen)?;
        let kp = kem::kem_keygen(group, &seed)?;
        let mut payloads = alloc::vec![
            Payload::Sa {
                spi: None,
                proposals: self.cfg.ike_proposals.clone()
            },
            Payload::Ke {
                group: group_id(group).expect("known group"),
                data: kp.public_key.clone()
            },
            Payload::Nonce(self.ni.clone()),
        ];
        if self.cfg.intermediate_supported {
            payloads.push(Payload::Notify {
                ty: INTERMEDIATE_EXCHANGE_SUPPORTED,
                data: Vec::new(),
            });
        }
        self.dh = Some(kp);
        let first = self.send_request(ExchangeType::IkeSaInit, payloads)?;
        self.first_msg_i = first[4..].to_vec();
        Ok(())
    }

    fn on_datagram(&mut self, d: &[u8]) -> Result<()> {
        let parsed = message::parse(d)?;
        let h = parsed.header;
        if h.is_response() {
            match &self.outstanding {
                Some(o)
                    if o.message_id == h.message_id
                        && o.exchange == h.exchange
                        && self.is_initiator() => {}
                _ => return Ok(()),
            }
        } else {
            if self.is_initiator() {
                return Ok(());
            }
            if let Some((id, ds)) = &self.cached {
                if *id == h.message_id {
                    let first_frag =
                        !matches!(parsed.body, Body::Sealed { frag: Some((n, _)), .. } if n != 1);
                    if first_frag {
                        let ds = ds.clone();
                        self.emit(h.exchange, &ds, true);
                    }
                    return Ok(());
                }
            }
            if h.message_id != self.expected_msg_id
                || matches!(self.phase, Phase::Closed | Phase::Failed)
            {
                return Ok(());
            }
        }
        if h.exchange != ExchangeType::IkeSaInit && (h.spi_i != self.spi_i || h.spi_r != self.spi_r)
        {
            return Ok(());
        }
        let (payloads, bytes, fragments) = match &parsed.body {
            Body::Plain(ps) => (ps.clone(), d.len(), 1),
            Body::Sealed { frag, .. } => {
                let Ok(key) = self.recv_key() else {
                    return Ok(());
                };
                let pt = match message::open_sealed(&parsed.body, &key) {
                    Ok(pt) => pt,
                    Err(_) => {
                        self.stats.sk_dropped += 1;
                        return Ok(());
                    }
                };
                match frag {
                    None => (message::decode_payloads(&pt)?, d.len(), 1),
                    Some(fr) => {
                        self.rx_bytes += d.len();
                        self.rx_frags += 1;
                        match self.frags.add(&h, *fr, pt)? {
                            Some(full) => {
                                let r = (
                                    message::decode_payloads(&full)?,
                                    self.rx_bytes,
                                    self.rx_frags,
                                );
                                self.rx_bytes = 0;
                                self.rx_frags = 0;
                                r
                            }
                            None => return Ok(()),
                        }
                    }
                }
            }
        };
        let msg = Message {
            header: h,
            payloads,
        };
        self.record(&msg, Direction::Received, bytes, fragments);
        if h.is_response() {
            self.outstanding = None;
            self.on_response(&msg, &d[4..])
        } else {
            self.on_request(&msg, &d[4..])
        }
    }

    fn on_request(&mut self, msg: &Message, raw: &[u8]) -> Result<()> {
        let h = &msg.header;
        let res = match (h.exchange, self.phase) {
            (ExchangeType::IkeSaInit, Phase::Init) => self.respond_sa_init(msg, raw),
            (ExchangeType::IkeIntermediate, Phase::Intermediate) => self.respond_intermediate(msg),
            (ExchangeType::IkeAuth, Phase::Auth) => self.respond_auth(msg),
            (ExchangeType::CreateChildSa, Phase::Established) => self.respond_rekey(msg),
            (ExchangeType::Informational, Phase::Established) => self.respond_delete(msg),
            (x, _) => Err(IkeError::UnexpectedMessage(x.name())),
        };
        match res {
            Err(IkeError::NoProposalChosen) if h.exchange == ExchangeType::CreateChildSa => {
                self.send_response(
                    h,
                    alloc::vec![Payload::Notify {
                        ty: super::NO_PROPOSAL_CHOSEN,
                        data: Vec::new()
                    }],
                )?;
                self.last_error = Some(IkeError::NoProposalChosen);
                Ok(())
            }
            Err(e)
                if !matches!(
                    e,
                    IkeError::AuthenticationFailure | IkeError::Crypto(_) | IkeError::Entropy(_)
                ) =>
            {
                if h.exchange == ExchangeType::IkeSaInit || self.keys.is_some() {
                    let _ = self.send_response(
                        h,
                        alloc::vec![Payload::Notify {
                            ty: e.notify(),
                            data: Vec::new()
                        }],
                    );
                }
                Err(e)
            }
            other => other,
        }
    }

    fn on_response(&mut self, msg: &Message, raw: &[u8]) -> Result<()> {
        if let Some(e) = error_notify(&msg.payloads) {
            if msg.header.exchange == ExchangeType::CreateChildSa && e == IkeError::NoProposalChosen
            {
                self.rekey = None;
                self.last_error = Some(e);
                return Ok(());
            }
            return Err(e);
        }
        match (msg.header.exchange, self.phase) {
            (ExchangeType::IkeSaInit, Phase::Init) => self.on_sa_init_response(msg, raw),
            (ExchangeType::IkeIntermediate, Phase::Intermediate) => {
                self.on_intermediate_response(msg)
            }
            (ExchangeType::IkeAuth, Phase::Auth) => self.on_auth_response(msg),
            (ExchangeType::CreateChildSa, Phase::Established) => self.on_rekey_response(msg),
            (ExchangeType::Informational, Phase::Established) => {
                self.close();
                Ok(())
            }
            (x, _) => Err(IkeError::UnexpectedMessage(x.name())),
        }
    }

    fn install_keys(&mut self) {
        let seed = keys::skeyseed(&self.ni, &self.nr, &self.dh_shared);
        self.keys = Some(keys::derive_ike_keys(
            &seed, &self.ni, &self.nr, self.spi_i, self.spi_r,
        ));
    }

    fn respond_sa_init(&mut self, msg: &Message, raw: &[u8]) -> Result<()> {
        let ps = &msg.payloads;
        self.spi_i = msg.header.spi_i;
        let (_, offered) = sa_payload(ps)?;
        self.peer_intermediate = find_notify(ps, INTERMEDIATE_EXCHANGE_SUPPORTED).is_some();
        let both = self.peer_intermediate && self.cfg.intermediate_supported;
        let chosen = negotiate(offered, &self.cfg.ike_proposals, both)?;
        let (gid, pk_i) = ke_payload(ps).ok_or(IkeError::Malformed("missing KE"))?;
        let group = chosen.dh.expect("validated");
        if group_by_id(gid) != Some(group) {
            return Err(IkeError::NoProposalChosen);
        }
        self.ni = nonce_payload(ps)?.to_vec();
        self.first_msg_i = raw.to_vec();
        let seed = self.entropy.seed_for(group, SeedOperation::Encaps)?;
        let (ct, ss) =
            kem::kem_encaps(group, pk_i, &seed).map_err(|_| IkeError::Malformed("KE"))?;
        self.dh_shared = Zeroizing::new(ss);
        self.nr = self.entropy.draw(NONCE_LEN)?;
        self.spi_r = u64_nonzero(&self.entropy.draw(8)?);
        let mut out = alloc::vec![
            Payload::Sa {
                spi: None,
                proposals: alloc::vec![chosen.clone()]
            },
            Payload::Ke {
                group: gid,
                data: ct
            },
            Payload::Nonce(self.nr.clone()),
            Payload::CertReq(self.cfg.trust_anchor.subject.as_bytes().to_vec()),
        ];
        if self.cfg.intermediate_supported {
            out.push(Payload::Notify {
                ty: INTERMEDIATE_EXCHANGE_SUPPORTED,
                data: Vec::new(),
            });
        }
        let first = self.send_response(&msg.header, out)?;
        self.first_msg_r = first[4..].to_vec();
        self.install_keys();
        self.phase = if chosen.ke1.is_some() {
            Phase::Intermediate
        } else {
            Phase::Auth
        };
        self.chosen = Some(chosen);
        Ok(())
    }

    fn on_sa_init_response(&mut self, msg: &Message, raw: &[u8]) -> Result<()> {
        let ps = &msg.payloads;
        let (_, sel) = sa_payload(ps)?;
        let chosen = sel.first().ok_or(IkeError::Malformed("empty SA"))?.clone();
        if !self
            .cfg
            .ike_proposals
            .iter()
            .any(|o| o.accepts_selection(&chosen))
        {
            return Err(IkeError::NoProposalChosen);
        }
        self.peer_intermediate = find_notify(ps, INTERMEDIATE_EXCHANGE_SUPPORTED).is_some();
        if chosen.ke1.is_some() && !(self.peer_intermediate && self.cfg.intermediate_supported) {
            return Err(IkeError::Malformed(
                "ke1 selected without IKE_INTERMEDIATE support",
            ));
        }
        let (gid, ct) = ke_payload(ps).ok_or(IkeError::Malformed("missing KE"))?;
        let group = chosen.dh.ok_or(IkeError::Malformed("SA"))?;
        if group_by_id(gid) != Some(group) {
            return Err(IkeError::NoProposalChosen);
        }
        let dh = self.dh.take().ok_or(IkeError::InvalidState("no KE"))?;
        if dh.algorithm.name != group {
            return Err(IkeError::NoProposalChosen);
        }
        let ss =
            kem::kem_decaps(group, dh.secret_key(), ct).map_err(|_| IkeError::Malformed("KE"))?;
        self.dh_shared = Zeroizing::new(ss);
        self.nr = nonce_payload(ps)?.to_vec();
        self.spi_r = msg.header.spi_r;
        self.first_msg_r = raw.to_vec();
        self.install_keys();
        let ke1 = chosen.ke1;
        self.chosen = Some(chosen);
        match ke1 {
            Some(k) => {
                let seed = self.entropy.seed_for(k, SeedOperation::Keygen)?;
                let kp = kem::kem_keygen(k, &seed)?;
                let ke = Payload::Ke {
                    group: group_id(k).expect("known KEM"),
                    data: kp.public_key.clone(),
                };
                self.int_auth_i
                    .extend(message::encode_payloads(core::slice::from_ref(&ke)));
                self.kem = Some(kp);
                self.phase = Phase::Intermediate;
                self.send_request(ExchangeType::IkeIntermediate, alloc::vec![ke])?;
                Ok(())
            }
            None => {
                self.phase = Phase::Auth;
                self.send_auth()
            }
        }
    }

    fn respond_intermediate(&mut self, msg: &Message) -> Result<()> {
        let kem_alg = self
            .chosen
            .as_ref()
            .and_then(|c| c.ke1)
            .ok_or(IkeError::InvalidState("no ke1"))?;
        let (gid, pk) = ke_payload(&msg.payloads).ok_or(IkeError::DecapsulationStructureError)?;
        if group_by_id(gid) != Some(kem_alg) {
            return Err(IkeError::DecapsulationStructureError);
        }
        let seed = self.entropy.seed_for(kem_alg, SeedOperation::Encaps)?;
        let (ct, ss) = kem::kem_encaps(kem_alg, pk, &seed)
            .map_err(|_| IkeError::DecapsulationStructureError)?;
        self.int_auth_i
            .extend(message::encode_payloads(&msg.payloads));
        let ke = Payload::Ke {
            group: gid,
            data: ct,
        };
        self.int_auth_r
            .extend(message::encode_payloads(core::slice::from_ref(&ke)));
        self.send_response(&msg.header, alloc::vec![ke])?;
        self.fold(ss);
        self.phase = Phase::Auth;
        Ok(())
    }

    fn fold(&mut self, ss: Vec<u8>) {
        let prev = self.keys.take().expect("keys installed");
        self.keys = Some(keys::fold_intermediate(
            &prev, &ss, &self.ni, &self.nr, self.spi_i, self.spi_r,
        ));
        self.kem_shared = Some(Zeroizing::new(ss));
        self.intermediate_used = true;
    }

    fn on_intermediate_response(&mut self, msg: &Message) -> Result<()> {
        let kp = self
            .kem
            .take()
            .ok_or(IkeError::InvalidState("no KEM key"))?;
        let (gid, ct) = ke_payload(&msg.payloads).ok_or(IkeError::DecapsulationStructureError)?;
        if group_by_id(gid) != Some(kp.algorithm.name) {
            return Err(IkeError::DecapsulationStructureError);
        }
        let ss = kem::kem_decaps(kp.algorithm.name, kp.secret_key(), ct)
            .map_err(|_| IkeError::DecapsulationStructureError)?;
        self.int_auth_r
            .extend(message::encode_payloads(&msg.payloads));
        self.fold(ss);
        self.phase = Phase::Auth;
        self.send_auth()
    }

    fn sign(&mut self, octets: &[u8]) -> Result<Vec<u8>> {
        let seed = self
            .entropy
            .optional_seed(self.cfg.private_key.name(), SeedOperation::Sign)?;
        Ok(self
            .cfg
            .private_key
            .sign(octets, AUTH_CONTEXT, seed.as_deref())?)
    }

    fn send_auth(&mut self) -> Result<()> {
        if let Some(ppk) = self.cfg.ppk.clone() {
            let k = self.keys.take().expect("keys installed");
            self.keys = Some(keys::apply_ppk(&k, ppk.secret()));
            self.ppk_used = true;
        }
        let id = self.own_id();
        let octets = {
            let k = self.keys.as_ref().expect("keys installed");
            signed_octets(&self.first_msg_i, &self.nr, &k.sk_pi, &id, &self.int_auth_i)
        };
        let sig = self.sign(&octets)?;
        let child_spi = u32_nonzero(&self.entropy.draw(4)?);
        self.rekey = Some(PendingRekey {
            nonce: Vec::new(),
            spi: child_spi,
            kem: None,
            proposals: Vec::new(),
        });
        let mut ps = alloc::vec![
            Payload::IdI(id),
            Payload::Cert(self.cfg.chain.encode()),
            Payload::Auth {
                method: AUTH_DIGITAL_SIGNATURE,
                data: sig
            },
            Payload::Sa {
                spi: Some(child_spi),
                proposals: self.cfg.esp_proposals.clone()
            },
            Payload::TsI(self.cfg.ts_i.clone()),
            Payload::TsR(self.cfg.ts_r.clone()),
        ];
        if let Some(ppk) = &self.cfg.ppk {
            ps.push(Payload::Notify {
                ty: PPK_IDENTITY,
                data: ppk.ppk_id.as_bytes().to_vec(),
            });
        }
        self.send_request(ExchangeType::IkeAuth, ps)?;
        Ok(())
    }

    fn verify_peer(&self, ps: &[Payload], id: &str, octets: &[u8]) -> Result<Certificate> {
        let chain_bytes = ps
            .iter()
            .find_map(|p| match p {
                Payload::Cert(c) => Some(&c[..]),
                _ => None,
            })
            .ok_or(IkeError::CertificateRejected(RejectReason::Missing))?;
        let chain = CertChain::decode(chain_bytes)
            .map_err(|_| IkeError::CertificateRejected(RejectReason::Malformed))?;
        pki::verify_chain(
            &chain,
            &self.cfg.trust_anchor,
            self.now,
            &self.cfg.revocation,
        )
        .map_err(IkeError::CertificateRejected)?;
        let leaf = chain.leaf().expect("verified chain").clone();
        if !leaf.key_usage.contains(KeyUsage::TlsAuth) {
            return Err(IkeError::CertificateRejected(RejectReason::UsageViolation));
        }
        if leaf.subject != id {
            return Err(IkeError::AuthenticationFailed);
        }
        let auth = ps
            .iter()
            .find_map(|p| match p {
                Payload::Auth {
                    method: AUTH_DIGITAL_SIGNATURE,
                    data,
                } => Some(&data[..]),
                _ => None,
            })
            .ok_or(IkeError::AuthenticationFailed)?;
        if !sig::sig_verify(
            &leaf.spki.profile_name,
            &leaf.spki.public_key,
            octets,
            AUTH_CONTEXT,
            auth,
        ) {
            return Err(IkeError::AuthenticationFailed);
        }
        Ok(leaf)
    }

    fn respond_auth(&mut self, msg: &Message) -> Result<()> {
        let ps = &msg.payloads;
        match find_notify(ps, PPK_IDENTITY) {
            Some(id) => {
                let entry = self
                    .cfg
                    .ppk_store
                    .iter()
                    .find(|e| e.ppk_id.as_bytes() == id)
                    .cloned()
                    .ok_or(IkeError::UnknownPpkId)?;
                let k = self.keys.take().expect("keys installed");
                self.keys = Some(keys::apply_ppk(&k, entry.secret()));
                self.ppk_used = true;
            }
            None if self.cfg.require_ppk => return Err(IkeError::AuthenticationFailed),
            None => {}
        }
        let peer_id = ps
            .iter()
            .find_map(|p| match p {
                Payload::IdI(s) => Some(s.clone()),
                _ => None,
            })
            .ok_or(IkeError::Malformed("missing IDi"))?;
        let octets = {
            let k = self.keys.as_ref().expect("keys installed");
            signed_octets(
                &self.first_msg_i,
                &self.nr,
                &k.sk_pi,
                &peer_id,
                &self.int_auth_i,
            )
        };
        self.verify_peer(ps, &peer_id, &octets)?;
        let (spi_i, offered) = sa_payload(ps)?;
        let spi_i = spi_i.ok_or(IkeError::Malformed("child SPI"))?;
        let esp = negotiate(offered, &self.cfg.esp_proposals, false)?;
        let spi_r = u32_nonzero(&self.entropy.draw(4)?);
        let own = self.own_id();
        let octets = {
            let k = self.keys.as_ref().expect("keys installed");
            signed_octets(
                &self.first_msg_r,
                &self.ni,
                &k.sk_pr,
                &own,
                &self.int_auth_r,
            )
        };
        let sig = self.sign(&octets)?;
        let mut out = alloc::vec![
            Payload::IdR(own),
            Payload::Cert(self.cfg.chain.encode()),
            Payload::Auth {
                method: AUTH_DIGITAL_SIGNATURE,
                data: sig
            },
            Payload::Sa {
                spi: Some(spi_r),
                proposals: alloc::vec![esp.clone()]
            },
            Payload::TsI(self.cfg.ts_i.clone()),
            Payload::TsR(self.cfg.ts_r.clone()),
        ];
        if self.ppk_used {
            out.push(Payload::Notify {
                ty: PPK_IDENTITY,
                data: Vec::new(),
            });
        }
        self.send_response(&msg.header, out)?;
        let k = keys::child_keymat(
            &self.keys.as_ref().expect("keys installed").sk_d,
            None,
            &self.ni,
            &self.nr,
        );
        self.child = Some(ChildSa::new(
            Role::Server,
            spi_i,
            spi_r,
            esp,
            k,
            &self.cfg,
            self.now,
        ));
        self.peer_identity = Some(peer_id);
        self.phase = Phase::Established;
        Ok(())
    }

    fn on_auth_response(&mut self, msg: &Message) -> Result<()> {
        let ps = &msg.payloads;
        if self.ppk_used && find_notify(ps, PPK_IDENTITY).is_none() {
            return Err(IkeError::AuthenticationFailed);
        }
        let peer_id = ps
            .iter()
            .find_map(|p| match p {
                Payload::IdR(s) => Some(s.clone()),
                _ => None,
            })
            .ok_or(IkeError::Malformed("missing IDr"))?;
        let octets = {
            let k = self.keys.as_ref().expect("keys installed");
            signed_octets(
                &self.first_msg_r,
                &self.ni,
                &k.sk_pr,
                &peer_id,
                &self.int_auth_r,
            )
        };
        self.verify_peer(ps, &peer_id, &octets)?;
        let (spi_r, sel) = sa_payload(ps)?;
        let esp = sel.first().cloned().ok_or(IkeError::NoProposalChosen)?;
        if !self
            .cfg
            .esp_proposals
            .iter()
            .any(|o| o.accepts_selection(&esp))
        {
            return Err(IkeError::NoProposalChosen);
        }
        let spi_i = self
            .rekey
            .take()
            .map(|r| r.spi)
            .ok_or(IkeError::InvalidState("no child SPI"))?;
        let k = keys::child_keymat(
            &self.keys.as_ref().expect("keys installed").sk_d,
            None,
            &self.ni,
            &self.nr,
        );
        let spi_r = spi_r.ok_or(IkeError::Malformed("child SPI"))?;
        self.child = Some(ChildSa::new(
            Role::Client,
            spi_i,
            spi_r,
            esp,
            k,
            &self.cfg,
            self.now,
        ));
        self.peer_identity = Some(peer_id);
        self.phase = Phase::Established;
        Ok(())
    }

    fn send_rekey(
        &mut self,
        proposals: Vec<Proposal>,
        kem_alg: Option<&'static str>,
    ) -> Result<()> {
        let nonce = self.entropy.draw(NONCE_LEN)?;
        let spi = u32_nonzero(&self.entropy.draw(4)?);
        let mut ps = alloc::vec![
            Payload::Sa {
                spi: Some(spi),
                proposals: proposals.clone()
            },
            Payload::Nonce(nonce.clone()),
        ];
        let kem = match kem_alg {
            Some(k) => {
                let seed = self.entropy.seed_for(k, SeedOperation::Keygen)?;
                let kp = kem::kem_keygen(k, &seed)?;
                ps.push(Payload::Ke {
                    group: group_id(k)
                        .ok_or_else(|| IkeError::Config("unknown rekey KEM".into()))?,
                    data: kp.public_key.clone(),
                });
                Some(kp)
            }
            None => None,
        };
        ps.push(Payload::TsI(self.cfg.ts_i.clone()));
        ps.push(Payload::TsR(self.cfg.ts_r.clone()));
        self.rekey = Some(PendingRekey {
            nonce,
            spi,
            kem,
            proposals,
        });
        self.last_error = None;
        self.send_request(ExchangeType::CreateChildSa, ps)?;
        Ok(())
    }

    fn respond_rekey(&mut self, msg: &Message) -> Result<()> {
        let ps = &msg.payloads;
        let (spi_i, offered) = sa_payload(ps)?;
        let spi_i = spi_i.ok_or(IkeError::Malformed("child SPI"))?;
        let esp = negotiate(offered, &self.cfg.esp_proposals, false)?;
        let ni = nonce_payload(ps)?.to_vec();
        let nr = self.entropy.draw(NONCE_LEN)?;
        let spi_r = u32_nonzero(&self.entropy.draw(4)?);
        let mut out = alloc::vec![
            Payload::Sa {
                spi: Some(spi_r),
                proposals: alloc::vec![esp.clone()]
            },
            Payload::Nonce(nr.clone()),
        ];
        let ss = match ke_payload(ps) {
            Some((gid, pk)) => {
                let alg = group_by_id(gid).ok_or(IkeError::DecapsulationStructureError)?;
                let seed = self.entropy.seed_for(alg, SeedOperation::Encaps)?;
                let (ct, ss) = kem::kem_encaps(alg, pk, &seed)
                    .map_err(|_| IkeError::DecapsulationStructureError)?;
                out.push(Payload::Ke {
                    group: gid,
                    data: ct,
                });
                Some(Zeroizing::new(ss))
            }
            None => None,
        };
        out.push(Payload::TsI(self.cfg.ts_i.clone()));
        out.push(Payload::TsR(self.cfg.ts_r.clone()));
        self.send_response(&msg.header, out)?;
        let sk_d = &self.keys.as_ref().expect("keys installed").sk_d;
        let k = keys::child_keymat(sk_d, ss.as_deref().map(|v| &v[..]), &ni, &nr);
        self.child = Some(ChildSa::new(
            Role::Server,
            spi_i,
            spi_r,
            esp,
            k,
            &self.cfg,
            self.now,
        ));
        self.last_error = None;
        Ok(())
    }

    fn on_rekey_response(&mut self, msg: &Message) -> Result<()> {
        let ps = &msg.payloads;
        let pending = self
            .rekey
            .take()
            .ok_or(IkeError::InvalidState("no rekey pending"))?;
        let (spi_r, sel) = sa_payload(ps)?;
        let esp = sel.first().cloned().ok_or(IkeError::NoProposalChosen)?;
        if !pending.proposals.iter().any(|o| o.accepts_selection(&esp)) {
            return Err(IkeError::NoProposalChosen);
        }
        let nr = nonce_payload(ps)?.to_vec();
        let ss = match (&pending.kem, ke_payload(ps)) {
            (Some(kp), Some((gid, ct))) if group_by_id(gid) == Some(kp.algorithm.name) => {
                Some(Zeroizing::new(
                    kem::kem_decaps(kp.algorithm.name, kp.secret_key(), ct)
                        .map_err(|_| IkeError::DecapsulationStructureError)?,
                ))
            }
            (None, None) => None,
            _ => return Err(IkeError::DecapsulationStructureError),
        };
        let sk_d = &self.keys.as_ref().expect("keys installed").sk_d;
        let k = keys::child_keymat(sk_d, ss.as_deref().map(|v| &v[..]), &pending.nonce, &nr);
        let spi_r = spi_r.ok_or(IkeError::Malformed("child SPI"))?;
        self.child = Some(ChildSa::new(
            Role::Client,
            pending.spi,
            spi_r,
            esp,
            k,
            &self.cfg,
            self.now,
        ));
        Ok(())
    }

    fn send_delete(&mut self) -> Result<()> {
        let nat = sha256(&[&self.spi_i.to_be_bytes(), &self.spi_r.to_be_bytes()])[..20].to_vec();
        self.send_request(
            ExchangeType::Informational,
            alloc::vec![
                Payload::Delete {
                    protocol: PROTO_IKE,
                    spis: alloc::vec![self.spi_i]
                },
                Payload::Notify {
                    ty: NAT_DETECTION_SOURCE_IP,
                    data: nat
                },
            ],
        )?;
        Ok(())
    }

    fn respond_delete(&mut self, msg: &Message) -> Result<()> {
        let deletes_ike = msg.payloads.iter().any(|p| {
            matches!(
                p,
                Payload::Delete {
                    protocol: PROTO_IKE,
                    ..
                }
            )
        });
        self.send_response(
            &msg.header,
            alloc::vec![Payload::Delete {
                protocol: PROTO_IKE,
                spis: Vec::new()
            }],
        )?;
        if deletes_ike {
            self.close();
        }
        Ok(())
    }

    fn close(&mut self) {
        self.phase = Phase::Closed;
        self.keys = None;
        self.dh_shared = Zeroizing::new(Vec::new());
        self.kem_shared = None;
        self.queue.clear();
        if let Some(c) = self.child.as_mut() {
            c.close();
        }
    }
}

impl Endpoint for IkeSa {
    fn drive(&mut self, incoming: &[Vec<u8>], now: SimTime) -> Vec<Outgoing> {
        IkeSa::drive(self, incoming, now)
    }

    fn next_timer(&self) -> Option<SimTime> {
        IkeSa::next_timer(self)
    }

    fn wants_drive(&self) -> bool {
        IkeSa::wants_drive(self)
    }

    fn status(&self) -> EndpointStatus {
        match self.phase {
            Phase::Established => EndpointStatus::Established,
            Phase::Closed => EndpointStatus::Closed,
            Phase::Failed => EndpointStatus::Failed(
                self.error
                    .as_ref()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
            ),
            _ => EndpointStatus::Pending,
        }
    }

    fn send_app(&mut self, data: &[u8]) -> core::result::Result<(), String> {
        self.send_esp(data).map_err(|e| e.to_string())
    }

    fn recv_app(&mut self) -> Option<Vec<u8>> {
        self.recv_esp()
    }

    fn peer_identity(&self) -> Option<String> {
        self.peer_identity.clone()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
