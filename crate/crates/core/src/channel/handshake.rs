//! Sans-IO handshake driver.
//!
//! Flights: client hello; server hello, certificate, certificate-verify and
//! finished; the client's optional certificate pair and finished. Over
//! datagrams the server acknowledges the last flight explicitly.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::Serialize;
use sha2::{Digest, Sha384};

use super::compress::{self, CertCompression};
use super::fragment::{self, Fragment, HandshakeMessage, Reassembler};
use super::keysched::{self, KeySchedule, TrafficSecrets};
use super::record::{self, ContentType, RecordHeader, Session, RECORD_HEADER_LEN};
use super::{ChannelError, HandshakeConfig, Result, Role, Transport, MIN_MTU};
use crate::crypto::aead::TAG_LEN;
use crate::crypto::kem::{self, KemKeyPair};
use crate::crypto::registry;
use crate::crypto::sig;
use crate::entropy::{EntropySource, SeedOperation};
use crate::pki::{self, CertChain, Certificate, KeyUsage, RejectReason};
use crate::time::{SimDuration, SimTime};
use crate::wire::{Reader, Writer};

pub const INITIAL_RTO: SimDuration = SimDuration::from_millis(400);
pub const MAX_RTO: SimDuration = SimDuration::from_secs(3);
pub const MAX_RETRANSMITS: u32 = 8;
pub const ACK_DELAY: SimDuration = SimDuration::from_millis(100);
const MAX_BUFFERED_RECORDS: usize = 32;
const MAX_MESSAGES_AHEAD: u16 = 8;
const RANDOM_LEN: usize = 32;

const CLIENT_HELLO: u8 = 1;
const SERVER_HELLO: u8 = 2;
const CERTIFICATE: u8 = 11;
const CERTIFICATE_VERIFY: u8 = 15;
const FINISHED: u8 = 20;

const SERVER_CV_CONTEXT: &[u8] = b"qran server CertificateVerify";
const CLIENT_CV_CONTEXT: &[u8] = b"qran client CertificateVerify";

const GROUPS: [(&str, u16); 6] = [
    (registry::X25519, 0x001d),
    (registry::ECP_384, 0x0018),
    (registry::ML_KEM_512, 0x0200),
    (registry::ML_KEM_768, 0x0201),
    (registry::ML_KEM_1024, 0x0202),
    (registry::X_WING, 0x11ec),
];

pub fn group_codepoint(name: &str) -> Option<u16> {
    GROUPS.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
}

fn group_by_codepoint(cp: u16) -> Option<&'static str> {
    GROUPS.iter().find(|(_, c)| *c == cp).map(|(n, _)| *n)
}

fn msg_name(t: u8) -> &'static str {
    match t {
        CLIENT_HELLO => "ClientHello",
        SERVER_HELLO => "ServerHello",
        CERTIFICATE => "Certificate",
        CERTIFICATE_VERIFY => "CertificateVerify",
        FINISHED => "Finished",
        _ => "Unknown",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HandshakeLogEntry {
    pub flight: u8,
    pub direction: Direction,
    pub msg_type: u8,
    pub name: &'static str,
    pub length: usize,
    pub fragments: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub bytes: Vec<u8>,
    pub retransmission: bool,
    /// Handshake flight this datagram belongs to; 0 for application data.
    pub flight: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DriverStatus {
    Handshaking,
    Established,
    Failed(ChannelError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DriverStats {
    pub datagrams_sent: u64,
    pub bytes_sent: u64,
    pub retransmitted_datagrams: u64,
    pub acks_sent: u64,
    pub records_dropped: u64,
    pub flights_sent: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    ClientHello,
    ServerHello,
    Certificate,
    CertificateVerify,
    Finished,
    Ack,
    Done,
}

#[derive(Debug)]
struct SentFragment {
    bytes: Vec<u8>,
    seqs: Vec<u64>,
    acked: bool,
}

#[derive(Debug)]
struct Flight {
    number: u8,
    frags: Vec<SentFragment>,
    rto: SimDuration,
    deadline: Option<SimTime>,
    retransmits: u32,
}

pub struct HandshakeDriver {
    cfg: HandshakeConfig,
    transport: Transport,
    entropy: EntropySource,
    status: DriverStatus,
    expect: Expect,
    now: SimTime,
    transcript: Sha384,
    next_send_msg: u16,
    next_recv_msg: u16,
    reassembly: BTreeMap<u16, Reassembler>,
    epoch0_seq: u64,
    flight: Option<Flight>,
    last_flight: u8,
    received: Vec<u64>,
    ack_deadline: Option<SimTime>,
    got_handshake: bool,
    dup_seen: bool,
    sent_flight: bool,
    peer_alerted: bool,
    pending: Vec<Outgoing>,
    kem_keys: Vec<KemKeyPair>,
    group: Option<&'static str>,
    schedule: Option<KeySchedule>,
    hs: Option<TrafficSecrets>,
    app: Option<TrafficSecrets>,
    codec: CertCompression,
    cert_requested: bool,
    peer_leaf: Option<Certificate>,
    session: Option<Session>,
    buffered: Vec<(RecordHeader, Vec<u8>)>,
    inbox: VecDeque<Vec<u8>>,
    stream_buf: Vec<u8>,
    log: Vec<HandshakeLogEntry>,
    stats: DriverStats,
}

impl core::fmt::Debug for HandshakeDriver {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("HandshakeDriver")
            .field("role", &self.cfg.role)
            .field("status", &self.status)
            .field("group", &self.group)
            .finish_non_exhaustive()
    }
}

/// Validates `config` and prepares the first flight. A client's hello is
/// emitted by the first call to [`HandshakeDriver::drive`].
pub fn start_handshake(
    config: HandshakeConfig,
    transport: Transport,
    entropy: EntropySource,
) -> Result<HandshakeDriver> {
    config.validate()?;
    if let Transport::Datagram { mtu } = transport {
        if mtu < MIN_MTU {
            return Err(ChannelError::ConfigInconsistent("mtu below 256"));
        }
    }
    let role = config.role;
    let mut d = HandshakeDriver {
        cfg: config,
        transport,
        entropy,
        status: DriverStatus::Handshaking,
        expect: match role {
            Role::Client => Expect::ServerHello,
            Role::Server => Expect::ClientHello,
        },
        now: SimTime::ZERO,
        transcript: Sha384::new(),
        next_send_msg: 0,
        next_recv_msg: 0,
        reassembly: BTreeMap::new(),
        epoch0_seq: 0,
        flight: None,
        last_flight: 0,
        received: Vec::new(),
        ack_deadline: None,
        got_handshake: false,
        dup_seen: false,
        sent_flight: false,
        peer_alerted: false,
        pending: Vec::new(),
        kem_keys: Vec::new(),
        group: None,
        schedule: None,
        hs: None,
        app: None,
        codec: CertCompression::None,
        cert_requested: false,
        peer_leaf: None,
        session: None,
        buffered: Vec::new(),
        inbox: VecDeque::new(),
        stream_buf: Vec::new(),
        log: Vec::new(),
        stats: DriverStats::default(),
    };
    if role == Role::Client {
        d.send_client_hello()?;
    }
    Ok(d)
}

impl HandshakeDriver {
    pub fn role(&self) -> Role {
        self.cfg.role
    }

    pub fn transport(&self) -> Transport {
        self.transport
    }

    pub fn status(&self) -> &DriverStatus {
        &self.status
    }

    pub fn is_established(&self) -> bool {
        self.status == DriverStatus::Established
    }

    pub fn error(&self) -> Option<&ChannelError> {
        match &self.status {
            DriverStatus::Failed(e) => Some(e),
            _ => None,
        }
    }

    pub fn negotiated_group(&self) -> Option<&'static str> {
        self.group
    }

    pub fn peer_identity(&self) -> Option<&str> {
        self.session
            .as_ref()
            .and_then(|s| s.peer_identity.as_deref())
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn session_mut(&mut self) -> Option<&mut Session> {
        self.session.as_mut()
    }

    pub fn log(&self) -> &[HandshakeLogEntry] {
        &self.log
    }

    pub fn stats(&self) -> DriverStats {
        self.stats
    }

    pub fn transcript_hash(&self) -> [u8; 48] {
        self.transcript.clone().finalize().into()
    }

    /// Earliest time at which `drive` has timer work to do.
    pub fn next_timer(&self) -> Option<SimTime> {
        if matches!(self.status, DriverStatus::Failed(_)) {
            return None;
        }
        let flight = self.flight.as_ref().and_then(|f| f.deadline);
        match (flight, self.ack_deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// True while datagrams are queued for the next `drive` call.
    pub fn wants_drive(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Feeds received datagrams (or stream chunks), runs expired timers and
    /// returns what should go on the wire.
    pub fn drive(&mut self, incoming: &[Vec<u8>], now: SimTime) -> Vec<Outgoing> {
        self.now = now;
        if !matches!(self.status, DriverStatus::Failed(_)) {
            if let Err(e) = self.step(incoming, now) {
                let alert = !self.peer_alerted && e != ChannelError::Timeout;
                self.fail(e, alert);
            }
            if let Some(f) = self.flight.as_mut() {
                if f.deadline.is_none() {
                    f.deadline = Some(now + f.rto);
                }
            }
        }
        let out = core::mem::take(&mut self.pending);
        for o in &out {
            self.stats.datagrams_sent += 1;
            self.stats.bytes_sent += o.bytes.len() as u64;
            if o.retransmission {
                self.stats.retransmitted_datagrams += 1;
            }
        }
        out
    }

    pub fn send_app(&mut self, data: &[u8]) -> Result<()> {
        if !self.is_established() {
            return Err(ChannelError::NotEstablished);
        }
        if let Some(budget) = self.transport.datagram_budget() {
            let max = budget - RECORD_HEADER_LEN - TAG_LEN;
            if data.len() > max {
                return Err(ChannelError::PayloadTooLarge {
                    len: data.len(),
                    max,
                });
            }
        }
        let session = self.session.as_mut().ok_or(ChannelError::NotEstablished)?;
        if session.budget_remaining() == 0 {
            session.key_update();
        }
        let bytes = session.seal_record(data)?;
        self.pending.push(Outgoing {
            bytes,
            retransmission: false,
            flight: 0,
        });
        Ok(())
    }

    pub fn recv_app(&mut self) -> Option<Vec<u8>> {
        self.inbox.pop_front()
    }

    pub fn key_update(&mut self) -> Result<u16> {
        if !self.is_established() {
            return Err(ChannelError::NotEstablished);
        }
        Ok(self
            .session
            .as_mut()
            .ok_or(ChannelError::NotEstablished)?
            .key_update())
    }

    fn step(&mut self, incoming: &[Vec<u8>], now: SimTime) -> Result<()> {
        self.got_handshake = false;
        self.dup_seen = false;
        self.sent_flight = false;
        for d in incoming {
            self.on_datagram(d)?;
            if matches!(self.status, DriverStatus::Failed(_)) {
                return Ok(());
            }
        }
        if self.transport != Transport::Stream && self.got_handshake {
            if self.sent_flight {
                self.ack_deadline = None;
            } else if self.dup_seen || self.expect == Expect::Done {
                self.send_ack(false);
            } else if self.ack_deadline.is_none() {
                self.ack_deadline = Some(now + ACK_DELAY);
            }
        }
        if self.ack_deadline.is_some_and(|t| t <= now) {
            self.send_ack(false);
        }
        let expired = self
            .flight
            .as_ref()
            .and_then(|f| f.deadline)
            .is_some_and(|t| t <= now);
        if expired {
            let f = self.flight.as_mut().expect("flight present");
            if f.retransmits >= MAX_RETRANSMITS {
                return Err(ChannelError::Timeout);
            }
            f.retransmits += 1;
            f.rto = SimDuration::from_micros((f.rto.as_micros() * 2).min(MAX_RTO.as_micros()));
            f.deadline = Some(now + f.rto);
            self.transmit(true);
        }
        Ok(())
    }

    fn fail(&mut self, err: ChannelError, send_alert: bool) {
        if send_alert {
            let (code, detail) = err.alert();
            let seq = self.next_epoch0_seq();
            let bytes = record::encode_plain(ContentType::Alert, 0, seq, &[code, detail]);
            self.pending.push(Outgoing {
                bytes,
                retransmission: false,
                flight: self.last_flight,
            });
        }
        self.status = DriverStatus::Failed(err);
        self.flight = None;
        self.ack_deadline = None;
    }

    fn next_epoch0_seq(&mut self) -> u64 {
        let s = self.epoch0_seq;
        self.epoch0_seq += 1;
        s
    }

    fn on_datagram(&mut self, data: &[u8]) -> Result<()> {
        match self.transport {
            Transport::Datagram { .. } => {
                let records = match record::parse_records(data) {
                    Ok(r) => r,
                    Err(_) => {
                        self.stats.records_dropped += 1;
                        return Ok(());
                    }
                };
                for (h, body) in records {
                    self.on_record(h, body)?;
                }
            }
            Transport::Stream => {
                self.stream_buf.extend_from_slice(data);
                while let Some((h, n)) = record::split_record(&self.stream_buf) {
                    let body = self.stream_buf[RECORD_HEADER_LEN..n].to_vec();
                    self.stream_buf.drain(..n);
                    self.on_record(h, &body)?;
                }
            }
        }
        Ok(())
    }

    fn on_record(&mut self, h: RecordHeader, body: &[u8]) -> Result<()> {
        if matches!(self.status, DriverStatus::Failed(_)) {
            return Ok(());
        }
        match (h.epoch, ContentType::from_u8(h.content_type)) {
            (0, Some(ContentType::Handshake)) => self.on_handshake_record(h, body),
            (0, Some(ContentType::Ack)) => self.on_ack(body),
            (0, Some(ContentType::Alert)) => {
                if body.len() != 2 {
                    return Err(ChannelError::Malformed("alert"));
                }
                self.peer_alerted = true;
                Err(ChannelError::from_alert(body[0], body[1]))
            }
            (0, _) => {
                self.stats.records_dropped += 1;
                Ok(())
            }
            _ => self.on_protected(h, body),
        }
    }

    fn on_protected(&mut self, h: RecordHeader, body: &[u8]) -> Result<()> {
        let Some(session) = self.session.as_mut() else {
            if self.buffered.len() < MAX_BUFFERED_RECORDS {
                self.buffered.push((h, body.to_vec()));
            }
            return Ok(());
        };
        match session.open(&h, body) {
            Ok((ContentType::AppData, pt)) => {
                self.inbox.push_back(pt);
                if self.expect == Expect::Ack {
                    self.flight = None;
                    self.handshake_complete();
                }
                Ok(())
            }
            Ok(_) => {
                self.stats.records_dropped += 1;
                Ok(())
            }
            Err(e) if self.transport == Transport::Stream => Err(e),
            Err(_) => {
                self.stats.records_dropped += 1;
                Ok(())
            }
        }
    }

    fn handshake_complete(&mut self) {
        self.expect = Expect::Done;
        self.status = DriverStatus::Established;
        self.kem_keys.clear();
        let buffered = core::mem::take(&mut self.buffered);
        for (h, body) in buffered {
            let _ = self.on_protected(h, &body);
        }
    }

    fn on_handshake_record(&mut self, h: RecordHeader, body: &[u8]) -> Result<()> {
        let frag = Fragment::decode(body)?;
        self.got_handshake = true;
        if !self.received.contains(&h.seq) {
            self.received.push(h.seq);
        }
        if frag.msg_seq < self.next_recv_msg {
            self.dup_seen = true;
            return Ok(());
        }
        if frag.msg_seq >= self.next_recv_msg + MAX_MESSAGES_AHEAD {
            self.stats.records_dropped += 1;
            return Ok(());
        }
        if !matches!(self.expect, Expect::Ack | Expect::Done) {
            self.flight = None;
        } else {
            self.stats.records_dropped += 1;
            return Ok(());
        }
        self.reassembly
            .entry(frag.msg_seq)
            .or_insert_with(|| Reassembler::new(&frag))
            .add(&frag)?;
        while self
            .reassembly
            .get(&self.next_recv_msg)
            .is_some_and(|r| r.is_complete())
        {
            let r = self
                .reassembly
                .remove(&self.next_recv_msg)
                .expect("present");
            let msg = r.finish().expect("complete");
            self.next_recv_msg += 1;
            self.on_message(msg)?;
            if matches!(self.status, DriverStatus::Failed(_)) {
                break;
            }
        }
        Ok(())
    }

    fn on_ack(&mut self, body: &[u8]) -> Result<()> {
        let mut r = Reader::new(body);
        let bad = |_| ChannelError::Malformed("ack");
        let n = r.u16().map_err(bad)?;
        let mut acked = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let epoch = r.u16().map_err(bad)?;
            let seq = r.u48().map_err(bad)?;
            if epoch == 0 {
                acked.push(seq);
            }
        }
        let Some(f) = self.flight.as_mut() else {
            return Ok(());
        };
        for frag in f.frags.iter_mut() {
            if frag.seqs.iter().any(|s| acked.contains(s)) {
                frag.acked = true;
            }
        }
        if f.frags.iter().all(|x| x.acked) {
            self.flight = None;
            if self.expect == Expect::Ack {
                self.handshake_complete();
            }
        }
        Ok(())
    }

    fn send_ack(&mut self, new_flight: bool) {
        self.ack_deadline = None;
        let budget = self.transport.datagram_budget().unwrap_or(usize::MAX);
        let cap = ((budget - RECORD_HEADER_LEN - 2) / 8).min(u16::MAX as usize);
        if new_flight {
            self.last_flight += 1;
            self.stats.flights_sent += 1;
            self.sent_flight = true;
        }
        let received = core::mem::take(&mut self.received);
        let chunks: Vec<&[u64]> = if received.is_empty() {
            alloc::vec![&received[..]]
        } else {
            received.chunks(cap).collect()
        };
        for list in chunks {
            let mut w = Writer::new();
            w.u16(list.len() as u16);
            for s in list {
                w.u16(0).u48(*s);
            }
            let seq = self.next_epoch0_seq();
            let bytes = record::encode_plain(ContentType::Ack, 0, seq, &w.finish());
            self.stats.acks_sent += 1;
            self.pending.push(Outgoing {
                bytes,
                retransmission: false,
                flight: self.last_flight,
            });
        }
        self.received = received;
    }

    fn transcript_add(&mut self, msg: &HandshakeMessage) {
        let len = (msg.body.len() as u32).to_be_bytes();
        self.transcript.update([msg.msg_type]);
        self.transcript.update(&len[1..]);
        self.transcript.update(&msg.body);
    }

    fn fragments_for(&self, len: usize) -> usize {
        match self.transport.max_fragment_body() {
            Some(max) => fragment::fragment_count(len, max),
            None => 1,
        }
    }

    fn new_message(&mut self, msg_type: u8, body: Vec<u8>) -> HandshakeMessage {
        let msg = HandshakeMessage {
            msg_type,
            msg_seq: self.next_send_msg,
            body,
        };
        self.next_send_msg += 1;
        self.transcript_add(&msg);
        msg
    }

    fn queue_flight(&mut self, number: u8, msgs: Vec<HandshakeMessage>) -> Result<()> {
        let mut frags = Vec::new();
        for m in &msgs {
            let pieces = match self.transport.max_fragment_body() {
                Some(max) => fragment::fragment(m, max)?,
                None => alloc::vec![Fragment {
                    msg_type: m.msg_type,
                    msg_seq: m.msg_seq,
                    total_len: m.body.len(),
                    frag_offset: 0,
                    body: m.body.clone(),
                }],
            };
            self.log.push(HandshakeLogEntry {
                flight: number,
                direction: Direction::Sent,
                msg_type: m.msg_type,
                name: msg_name(m.msg_type),
                length: m.body.len(),
                fragments: pieces.len(),
            });
            frags.extend(pieces.into_iter().map(|f| SentFragment {
                bytes: f.encode(),
                seqs: Vec::new(),
                acked: false,
            }));
        }
        self.last_flight = number;
        self.stats.flights_sent += 1;
        self.sent_flight = true;
        self.flight = Some(Flight {
            number,
            frags,
            rto: INITIAL_RTO,
            deadline: None,
            retransmits: 0,
        });
        self.transmit(false);
        if self.transport == Transport::Stream {
            self.flight = None;
        }
        Ok(())
    }

    fn transmit(&mut self, retransmission: bool) {
        let Some(mut f) = self.flight.take() else {
            return;
        };
        let mut records = Vec::new();
        for frag in f.frags.iter_mut().filter(|x| !x.acked) {
            let seq = self.next_epoch0_seq();
            frag.seqs.push(seq);
            records.push(record::encode_plain(
                ContentType::Handshake,
                0,
                seq,
                &frag.bytes,
            ));
        }
        let number = f.number;
        self.flight = Some(f);
        for bytes in self.pack(records) {
            self.pending.push(Outgoing {
                bytes,
                retransmission,
                flight: number,
            });
        }
    }

    fn pack(&self, records: Vec<Vec<u8>>) -> Vec<Vec<u8>> {
        let Some(budget) = self.transport.datagram_budget() else {
            return alloc::vec![records.concat()];
        };
        let mut out: Vec<Vec<u8>> = Vec::new();
        for r in records {
            match out.last_mut() {
                Some(d) if d.len() + r.len() <= budget => d.extend_from_slice(&r),
                _ => out.push(r),
            }
        }
        out
    }

    fn on_message(&mut self, msg: HandshakeMessage) -> Result<()> {
        let expected = match self.expect {
            Expect::ClientHello => CLIENT_HELLO,
            Expect::ServerHello => SERVER_HELLO,
            Expect::Certificate => CERTIFICATE,
            Expect::CertificateVerify => CERTIFICATE_VERIFY,
            Expect::Finished => FINISHED,
            Expect::Ack | Expect::Done => {
                return Err(ChannelError::UnexpectedMessage(msg.msg_type))
            }
        };
        if msg.msg_type != expected {
            return Err(ChannelError::UnexpectedMessage(msg.msg_type));
        }
        let flight = match (self.cfg.role, msg.msg_type) {
            (Role::Client, _) => 2,
            (Role::Server, CLIENT_HELLO) => 1,
            (Role::Server, _) => 3,
        };
        self.log.push(HandshakeLogEntry {
            flight,
            direction: Direction::Received,
            msg_type: msg.msg_type,
            name: msg_name(msg.msg_type),
            length: msg.body.len(),
            fragments: self.fragments_for(msg.body.len()),
        });
        let th_before = self.transcript_hash();
        self.transcript_add(&msg);
        match (self.cfg.role, self.expect) {
            (Role::Server, Expect::ClientHello) => self.on_client_hello(&msg.body),
            (Role::Client, Expect::ServerHello) => self.on_server_hello(&msg.body),
            (_, Expect::Certificate) => self.on_certificate(&msg.body),
            (_, Expect::CertificateVerify) => self.on_certificate_verify(&msg.body, &th_before),
            (Role::Client, Expect::Finished) => self.on_server_finished(&msg.body, &th_before),
            (Role::Server, Expect::Finished) => self.on_client_finished(&msg.body, &th_before),
            _ => Err(ChannelError::UnexpectedMessage(msg.msg_type)),
        }
    }

    fn send_client_hello(&mut self) -> Result<()> {
        let random = self.entropy.draw(RANDOM_LEN)?;
        let groups = self.cfg.offered_groups.clone();
        let mut w = Writer::new();
        w.bytes(&random);
        let cps: Vec<u16> = groups.iter().filter_map(|g| group_codepoint(g)).collect();
        w.u8(cps.len() as u8);
        for cp in &cps {
            w.u16(*cp);
        }
        w.u8(groups.len() as u8);
        for g in &groups {
            let seed = self.entropy.seed_for(g, SeedOperation::Keygen)?;
            let kp = kem::kem_keygen(g, &seed)?;
            w.u16(
                group_codepoint(g)
                    .ok_or(ChannelError::ConfigInconsistent("group has no codepoint"))?,
            )
            .vec16(&kp.public_key);
            self.kem_keys.push(kp);
        }
        match self.cfg.cert_compression {
            CertCompression::Deflate => {
                w.vec8(&[CertCompression::Deflate.id(), CertCompression::None.id()])
            }
            CertCompression::None => w.vec8(&[CertCompression::None.id()]),
        };
        let ch = self.new_message(CLIENT_HELLO, w.finish());
        self.queue_flight(1, alloc::vec![ch])
    }

    fn on_client_hello(&mut self, body: &[u8]) -> Result<()> {
        let bad = |_| ChannelError::Malformed("ClientHello");
        let mut r = Reader::new(body);
        r.take(RANDOM_LEN).map_err(bad)?;
        let n = r.u8().map_err(bad)?;
        let mut prefs = Vec::with_capacity(n as usize);
        for _ in 0..n {
            prefs.push(r.u16().map_err(bad)?);
        }
        let n = r.u8().map_err(bad)?;
        let mut shares = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let cp = r.u16().map_err(bad)?;
            shares.push((cp, r.vec16().map_err(bad)?));
        }
        let codecs = r.vec8().map_err(bad)?;
        if !r.is_empty() {
            return Err(ChannelError::Malformed("ClientHello"));
        }
        let selected = prefs.iter().find_map(|cp| {
            let name = group_by_codepoint(*cp)?;
            let share = shares.iter().find(|(c, _)| c == cp)?;
            self.cfg
                .offered_groups
                .contains(&name)
                .then_some((name, *cp, share.1))
        });
        let (group, cp, share) = selected.ok_or(ChannelError::NegotiationFailure)?;
        let seed = self.entropy.seed_for(group, SeedOperation::Encaps)?;
        let (ct, ss) = kem::kem_encaps(group, share, &seed)
            .map_err(|_| ChannelError::Malformed("key share"))?;
        self.group = Some(group);
        self.codec = match self.cfg.cert_compression {
            CertCompression::Deflate if codecs.contains(&CertCompression::Deflate.id()) => {
                CertCompression::Deflate
            }
            _ => CertCompression::None,
        };
        self.cert_requested = self.cfg.require_client_cert;

        let random = self.entropy.draw(RANDOM_LEN)?;
        let mut w = Writer::new();
        w.bytes(&random)
            .u16(cp)
            .vec16(&ct)
            .u8(self.cert_requested as u8)
            .u8(self.codec.id());
        let sh = self.new_message(SERVER_HELLO, w.finish());
        let schedule = KeySchedule::new(&ss);
        let hs = schedule.handshake_traffic(&self.transcript_hash());

        let cert = self.new_message(
            CERTIFICATE,
            compress::compress_chain(&self.cfg.chain, self.codec),
        );
        let cv = self.certificate_verify(SERVER_CV_CONTEXT)?;
        let fin = keysched::finished_mac(&hs.server[..], &self.transcript_hash());
        let fin = self.new_message(FINISHED, fin.to_vec());
        self.app = Some(schedule.application_traffic(&self.transcript_hash()));
        self.schedule = Some(schedule);
        self.hs = Some(hs);
        self.expect = if self.cert_requested {
            Expect::Certificate
        } else {
            Expect::Finished
        };
        self.queue_flight(2, alloc::vec![sh, cert, cv, fin])
    }

    fn certificate_verify(&mut self, context: &[u8]) -> Result<HandshakeMessage> {
        let th = self.transcript_hash();
        let seed = self
            .entropy
            .optional_seed(self.cfg.private_key.name(), SeedOperation::Sign)?;
        let sig = self.cfg.private_key.sign(&th, context, seed.as_deref())?;
        let mut w = Writer::new();
        w.vec24(&sig);
        Ok(self.new_message(CERTIFICATE_VERIFY, w.finish()))
    }

    fn on_server_hello(&mut self, body: &[u8]) -> Result<()> {
        let bad = |_| ChannelError::Malformed("ServerHello");
        let mut r = Reader::new(body);
        r.take(RANDOM_LEN).map_err(bad)?;
        let cp = r.u16().map_err(bad)?;
        let ct = r.vec16().map_err(bad)?;
        let cert_request = r.u8().map_err(bad)?;
        let codec = CertCompression::from_id(r.u8().map_err(bad)?)?;
        if !r.is_empty() || cert_request > 1 {
            return Err(ChannelError::Malformed("ServerHello"));
        }
        let group = group_by_codepoint(cp).ok_or(ChannelError::NegotiationFailure)?;
        let kp = self
            .kem_keys
            .iter()
            .find(|k| k.algorithm.name == group)
            .ok_or(ChannelError::NegotiationFailure)?;
        if codec == CertCompression::Deflate
            && self.cfg.cert_compression != CertCompression::Deflate
        {
            return Err(ChannelError::CodecUnavailable(codec.id()));
        }
        let ss = kem::kem_decaps(group, kp.secret_key(), ct)
            .map_err(|_| ChannelError::Malformed("key share"))?;
        let schedule = KeySchedule::new(&ss);
        self.hs = Some(schedule.handshake_traffic(&self.transcript_hash()));
        self.schedule = Some(schedule);
        self.group = Some(group);
        self.codec = codec;
        self.cert_requested = cert_request == 1;
        self.expect = Expect::Certificate;
        Ok(())
    }

    fn check_peer_chain(
        &self,
        chain: &CertChain,
    ) -> core::result::Result<Certificate, RejectReason> {
        let leaf = chain.leaf().ok_or(RejectReason::Missing)?;
        pki::verify_chain(
            chain,
            &self.cfg.trust_anchor,
            self.now,
            &self.cfg.revocation,
        )?;
        if !leaf.key_usage.contains(KeyUsage::TlsAuth) {
            return Err(RejectReason::UsageViolation);
        }
        Ok(leaf.clone())
    }

    fn on_certificate(&mut self, body: &[u8]) -> Result<()> {
        let chain = compress::decompress_chain(body)
            .map_err(|_| ChannelError::CertificateRejected(RejectReason::Malformed))?;
        let leaf = self
            .check_peer_chain(&chain)
            .map_err(ChannelError::CertificateRejected)?;
        self.peer_leaf = Some(leaf);
        self.expect = Expect::CertificateVerify;
        Ok(())
    }

    fn on_certificate_verify(&mut self, body: &[u8], th: &[u8; 48]) -> Result<()> {
        let reject = ChannelError::CertificateRejected(RejectReason::BadSignature);
        let mut r = Reader::new(body);
        let sig_bytes = r.vec24().map_err(|_| reject.clone())?;
        let leaf = self
            .peer_leaf
            .as_ref()
            .ok_or(ChannelError::UnexpectedMessage(CERTIFICATE_VERIFY))?;
        let context = match self.cfg.role {
            Role::Client => SERVER_CV_CONTEXT,
            Role::Server => CLIENT_CV_CONTEXT,
        };
        if !r.is_empty()
            || !sig::sig_verify(
                &leaf.spki.profile_name,
                &leaf.spki.public_key,
                th,
                context,
                sig_bytes,
            )
        {
            return Err(reject);
        }
        self.expect = Expect::Finished;
        Ok(())
    }

    fn check_finished(&self, body: &[u8], secret: &[u8], th: &[u8; 48]) -> Result<()> {
        if body != keysched::finished_mac(secret, th) {
            return Err(ChannelError::FinishedMismatch);
        }
        Ok(())
    }

    fn on_server_finished(&mut self, body: &[u8], th: &[u8; 48]) -> Result<()> {
        let hs = self
            .hs
            .clone()
            .ok_or(ChannelError::UnexpectedMessage(FINISHED))?;
        self.check_finished(body, &hs.server[..], th)?;
        let schedule = self.schedule.as_ref().expect("schedule after ServerHello");
        let app = schedule.application_traffic(&self.transcript_hash());
        let mut msgs = Vec::new();
        if self.cert_requested {
            msgs.push(self.new_message(
                CERTIFICATE,
                compress::compress_chain(&self.cfg.chain, self.codec),
            ));
            if !self.cfg.chain.0.is_empty() {
                msgs.push(self.certificate_verify(CLIENT_CV_CONTEXT)?);
            }
        }
        let fin = keysched::finished_mac(&hs.client[..], &self.transcript_hash());
        msgs.push(self.new_message(FINISHED, fin.to_vec()));
        let peer = self.peer_leaf.as_ref().map(|c| c.subject.clone());
        self.session = Some(Session::new(
            self.group.expect("group"),
            self.transcript_hash(),
            peer,
            app.client.clone(),
            app.server.clone(),
            self.cfg.key_update_record_budget,
        ));
        self.app = Some(app);
        self.expect = Expect::Ack;
        self.queue_flight(3, msgs)?;
        if self.transport == Transport::Stream {
            self.handshake_complete();
        }
        Ok(())
    }

    fn on_client_finished(&mut self, body: &[u8], th: &[u8; 48]) -> Result<()> {
        let hs = self
            .hs
            .as_ref()
            .ok_or(ChannelError::UnexpectedMessage(FINISHED))?;
        self.check_finished(body, &hs.client[..], th)?;
        let app = self.app.clone().expect("app secrets after server flight");
        let peer: Option<String> = self.peer_leaf.as_ref().map(|c| c.subject.to_string());
        self.session = Some(Session::new(
            self.group.expect("group"),
            self.transcript_hash(),
            peer,
            app.server.clone(),
            app.client.clone(),
            self.cfg.key_update_record_budget,
        ));
        self.flight = None;
        if self.transport != Transport::Stream {
            self.send_ack(true);
        }
        self.handshake_complete();
        Ok(())
    }
}
