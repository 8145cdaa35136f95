//! Two-endpoint event loop over one simulated link.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::any::Any;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha3::{Digest, Sha3_256};

use super::{stream_rounds, LinkProfile, NetsimError, StreamTransportConfig};
use crate::channel::{self, DriverStatus, HandshakeDriver, Outgoing, DATAGRAM_OVERHEAD};
use crate::time::{SimDuration, SimTime};

/// Default bound on simulated time for one channel.
pub const DEFAULT_TIME_LIMIT: SimDuration = SimDuration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EndpointStatus {
    Pending,
    Established,
    /// Established and later torn down cleanly.
    Closed,
    Failed(String),
}

impl EndpointStatus {
    pub fn succeeded(&self) -> bool {
        matches!(self, EndpointStatus::Established | EndpointStatus::Closed)
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, EndpointStatus::Pending)
    }
}

/// A sans-IO protocol engine that the world can drive.
pub trait Endpoint {
    fn drive(&mut self, incoming: &[Vec<u8>], now: SimTime) -> Vec<Outgoing>;
    fn next_timer(&self) -> Option<SimTime>;
    fn wants_drive(&self) -> bool;
    fn status(&self) -> EndpointStatus;
    fn send_app(&mut self, data: &[u8]) -> Result<(), String>;
    fn recv_app(&mut self) -> Option<Vec<u8>>;
    fn peer_identity(&self) -> Option<String>;
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl Endpoint for HandshakeDriver {
    fn drive(&mut self, incoming: &[Vec<u8>], now: SimTime) -> Vec<Outgoing> {
        HandshakeDriver::drive(self, incoming, now)
    }

    fn next_timer(&self) -> Option<SimTime> {
        HandshakeDriver::next_timer(self)
    }

    fn wants_drive(&self) -> bool {
        HandshakeDriver::wants_drive(self)
    }

    fn status(&self) -> EndpointStatus {
        match HandshakeDriver::status(self) {
            DriverStatus::Handshaking => EndpointStatus::Pending,
            DriverStatus::Established => EndpointStatus::Established,
            DriverStatus::Failed(e) => EndpointStatus::Failed(e.to_string()),
        }
    }

    fn send_app(&mut self, data: &[u8]) -> Result<(), String> {
        HandshakeDriver::send_app(self, data).map_err(|e: channel::ChannelError| e.to_string())
    }

    fn recv_app(&mut self) -> Option<Vec<u8>> {
        HandshakeDriver::recv_app(self)
    }

    fn peer_identity(&self) -> Option<String> {
        HandshakeDriver::peer_identity(self).map(ToString::to_string)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Send,
    Deliver,
    Drop,
    Timer,
    Established,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEvent {
    pub t_us: u64,
    pub kind: EventKind,
    pub node: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flight: Option<u8>,
    #[serde(skip_serializing_if = "core::ops::Not::not")]
    pub retransmission: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ChannelMeasurement {
    /// Bytes of handshake datagrams (or stream chunks) put on the wire by
    /// both sides, retransmissions included.
    pub handshake_bytes: u64,
    pub datagrams_sent: u64,
    pub retransmissions: u64,
    pub flights: u32,
    pub sim_time_us: u64,
    pub complete: bool,
    pub bytes_delivered: u64,
    pub dropped: u64,
}

#[derive(Debug)]
enum Pending {
    Deliver { to: usize, bytes: Vec<u8> },
    Timer { node: usize },
}

pub struct World {
    link: LinkProfile,
    stream: Option<StreamTransportConfig>,
    rng: ChaCha8Rng,
    nodes: [Box<dyn Endpoint>; 2],
    queue: BTreeMap<(SimTime, u64), Pending>,
    seq: u64,
    now: SimTime,
    time_limit: SimDuration,
    link_free: [SimTime; 2],
    last_arrival: [SimTime; 2],
    scheduled_timer: [Option<SimTime>; 2],
    reported: [bool; 2],
    log: Vec<LogEvent>,
    finished_at: Option<SimTime>,
}

impl World {
    /// `nodes[0]` initiates. `stream` selects the reliable byte-stream model;
    /// loss and reordering then do not apply.
    pub fn new(
        link: LinkProfile,
        stream: Option<StreamTransportConfig>,
        seed: u64,
        stream_id: u64,
        initiator: Box<dyn Endpoint>,
        responder: Box<dyn Endpoint>,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        World {
            link,
            stream,
            rng,
            nodes: [initiator, responder],
            queue: BTreeMap::new(),
            seq: 0,
            now: SimTime::ZERO,
            time_limit: DEFAULT_TIME_LIMIT,
            link_free: [SimTime::ZERO; 2],
            last_arrival: [SimTime::ZERO; 2],
            scheduled_timer: [None; 2],
            reported: [false; 2],
            log: Vec::new(),
            finished_at: None,
        }
    }

    pub fn with_time_limit(mut self, limit: SimDuration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn endpoint(&self, i: usize) -> &dyn Endpoint {
        self.nodes[i].as_ref()
    }

    pub fn endpoint_mut(&mut self, i: usize) -> &mut dyn Endpoint {
        self.nodes[i].as_mut()
    }

    pub fn downcast<T: 'static>(&self, i: usize) -> Option<&T> {
        self.nodes[i].as_any().downcast_ref::<T>()
    }

    pub fn downcast_mut<T: 'static>(&mut self, i: usize) -> Option<&mut T> {
        self.nodes[i].as_any_mut().downcast_mut::<T>()
    }

    pub fn log(&self) -> &[LogEvent] {
        &self.log
    }

    pub fn log_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&serde_json::to_string(e).unwrap_or_default());
            s.push('\n');
        }
        s
    }

    pub fn log_digest(&self) -> [u8; 32] {
        Sha3_256::digest(self.log_jsonl().as_bytes()).into()
    }

    fn push(&mut self, at: SimTime, ev: Pending) {
        self.queue.insert((at, self.seq), ev);
        self.seq += 1;
    }

    fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn latency(&self) -> SimDuration {
        SimDuration::from_micros((self.link.latency_ms * 1000.0 + 0.5) as u64)
    }

    fn transmit(&mut self, from: usize, out: Vec<Outgoing>) {
        let to = 1 - from;
        for o in out {
            let len = o.bytes.len();
            self.log.push(LogEvent {
                t_us: self.now.0,
                kind: EventKind::Send,
                node: from as u8,
                len: Some(len),
                flight: Some(o.flight),
                retransmission: o.retransmission,
                detail: None,
            });
            let start = self.now.max(self.link_free[from]);
            let serialization = match self.link.bandwidth_bytes_per_ms {
                Some(bw) => SimDuration::from_micros(ceil_u64(
                    (len + DATAGRAM_OVERHEAD) as f64 / bw * 1000.0,
                )),
                None => SimDuration::ZERO,
            };
            self.link_free[from] = start + serialization;
            let mut arrival = start + serialization + self.latency();
            match self.stream {
                Some(cfg) => {
                    let rounds = stream_rounds(&cfg, len as u64).max(1);
                    arrival = arrival
                        + SimDuration::from_micros(cfg.rtt_us).saturating_mul(rounds as u64 - 1);
                    arrival = arrival.max(self.last_arrival[from]);
                    self.last_arrival[from] = arrival;
                }
                None => {
                    if self.unit() < self.link.loss_rate {
                        self.log.push(LogEvent {
                            t_us: self.now.0,
                            kind: EventKind::Drop,
                            node: from as u8,
                            len: Some(len),
                            flight: Some(o.flight),
                            retransmission: o.retransmission,
                            detail: None,
                        });
                        continue;
                    }
                    if self.unit() < self.link.reorder_rate {
                        let extra = (self.link.latency_ms * 1000.0 * (1.0 + self.unit())) as u64;
                        arrival = arrival + SimDuration::from_micros(extra.max(1));
                    }
                }
            }
            self.push(arrival, Pending::Deliver { to, bytes: o.bytes });
        }
    }

    fn drive_node(&mut self, i: usize, incoming: &[Vec<u8>]) {
        let out = self.nodes[i].drive(incoming, self.now);
        self.transmit(i, out);
        self.after_drive(i);
    }

    fn after_drive(&mut self, i: usize) {
        if !self.reported[i] {
            let st = self.nodes[i].status();
            if st.is_terminal() {
                self.reported[i] = true;
                let (kind, detail) = match st {
                    EndpointStatus::Failed(e) => (EventKind::Failed, Some(e)),
                    _ => (EventKind::Established, None),
                };
                self.log.push(LogEvent {
                    t_us: self.now.0,
                    kind,
                    node: i as u8,
                    len: None,
                    flight: None,
                    retransmission: false,
                    detail,
                });
            }
        }
        let t = self.nodes[i].next_timer();
        if t.is_some() && t != self.scheduled_timer[i] {
            let at = t.unwrap_or(self.now).max(self.now);
            self.scheduled_timer[i] = t;
            self.push(at, Pending::Timer { node: i });
        }
    }

    fn handshake_done(&self) -> bool {
        self.nodes.iter().all(|n| n.status().is_terminal())
    }

    fn deliveries_pending(&self) -> bool {
        self.queue
            .values()
            .any(|p| matches!(p, Pending::Deliver { .. }))
    }

    /// Processes events until both endpoints have finished the handshake and
    /// nothing is left in flight.
    pub fn run(&mut self) -> Result<(), NetsimError> {
        if self.seq == 0 {
            self.drive_node(0, &[]);
            self.drive_node(1, &[]);
        }
        self.run_until(|w| w.handshake_done() && !w.deliveries_pending())
    }

    /// Runs until nothing is in flight and no endpoint has a timer armed.
    /// Used after `send_app` or a post-handshake request.
    pub fn flush(&mut self) -> Result<(), NetsimError> {
        for i in 0..2 {
            if self.nodes[i].wants_drive() {
                self.drive_node(i, &[]);
            }
        }
        self.run_until(|w| {
            !w.deliveries_pending() && w.nodes.iter().all(|n| n.next_timer().is_none())
        })
    }

    fn run_until(&mut self, done: impl Fn(&World) -> bool) -> Result<(), NetsimError> {
        loop {
            if done(self) {
                if self.finished_at.is_none() && self.handshake_done() {
                    self.finished_at = Some(self.now);
                }
                return Ok(());
            }
            let Some(((at, _), ev)) = self.queue.pop_first() else {
                return Ok(());
            };
            if at.since(SimTime::ZERO) > self.time_limit {
                self.now = SimTime::ZERO + self.time_limit;
                return Err(NetsimError::TimeLimitExceeded);
            }
            self.now = at;
            match ev {
                Pending::Deliver { to, bytes } => {
                    self.log.push(LogEvent {
                        t_us: at.0,
                        kind: EventKind::Deliver,
                        node: to as u8,
                        len: Some(bytes.len()),
                        flight: None,
                        retransmission: false,
                        detail: None,
                    });
                    self.drive_node(to, &[bytes]);
                }
                Pending::Timer { node } => {
                    if self.scheduled_timer[node] == Some(at) {
                        self.scheduled_timer[node] = None;
                    }
                    match self.nodes[node].next_timer() {
                        Some(t) if t <= at => {
                            self.log.push(LogEvent {
                                t_us: at.0,
                                kind: EventKind::Timer,
                                node: node as u8,
                                len: None,
                                flight: None,
                                retransmission: false,
                                detail: None,
                            });
                            self.drive_node(node, &[]);
                        }
                        _ => self.after_drive(node),
                    }
                }
            }
            if self.finished_at.is_none() && self.handshake_done() {
                self.finished_at = Some(self.now);
            }
        }
    }

    /// Counters derived from the event log.
    pub fn measure(&self) -> ChannelMeasurement {
        let mut m = ChannelMeasurement::default();
        let mut flights = [0u32; 2];
        let mut last_sent_flight = [0u8; 2];
        for e in &self.log {
            match e.kind {
                EventKind::Send => {
                    let f = e.flight.unwrap_or(0);
                    if f != 0 {
                        m.handshake_bytes += e.len.unwrap_or(0) as u64;
                        m.datagrams_sent += 1;
                        let n = e.node as usize;
                        if f != last_sent_flight[n] && !e.retransmission {
                            flights[n] += 1;
                            last_sent_flight[n] = f;
                        }
                    }
                    if e.retransmission {
                        m.retransmissions += 1;
                    }
                }
                EventKind::Deliver => m.bytes_delivered += e.len.unwrap_or(0) as u64,
                EventKind::Drop => m.dropped += 1,
                _ => {}
            }
        }
        m.flights = flights[0] + flights[1];
        m.complete = self.nodes.iter().all(|n| n.status().succeeded());
        m.sim_time_us = self.finished_at.unwrap_or(self.now).0;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Minimal echo endpoint: the initiator sends `n` datagrams, the
    /// responder is established once it has seen them all.
    struct Counter {
        to_send: Vec<Vec<u8>>,
        expect: usize,
        seen: Vec<Vec<u8>>,
    }

    impl Endpoint for Counter {
        fn drive(&mut self, incoming: &[Vec<u8>], _now: SimTime) -> Vec<Outgoing> {
            self.seen.extend(incoming.iter().cloned());
            core::mem::take(&mut self.to_send)
                .into_iter()
                .map(|bytes| Outgoing {
                    bytes,
                    retransmission: false,
                    flight: 1,
                })
                .collect()
        }
        fn next_timer(&self) -> Option<SimTime> {
            None
        }
        fn wants_drive(&self) -> bool {
            false
        }
        fn status(&self) -> EndpointStatus {
            if self.seen.len() >= self.expect {
                EndpointStatus::Established
            } else {
                EndpointStatus::Pending
            }
        }
        fn send_app(&mut self, _: &[u8]) -> Result<(), String> {
            Err("unsupported".into())
        }
        fn recv_app(&mut self) -> Option<Vec<u8>> {
            None
        }
        fn peer_identity(&self) -> Option<String> {
            None
        }
        fn as_any(&self) -> &dyn Any {
            self
        }
        fn as_any_mut(&mut self) -> &mut dyn Any {
            self
        }
    }

    fn pair(n: usize) -> (Box<dyn Endpoint>, Box<dyn Endpoint>) {
        let a = Counter {
            to_send: (0..n).map(|i| vec![i as u8; 100]).collect(),
            expect: 0,
            seen: vec![],
        };
        let b = Counter {
            to_send: vec![],
            expect: n,
            seen: vec![],
        };
        (Box::new(a), Box::new(b))
    }

    #[test]
    fn lossless_in_order() {
        let (a, b) = pair(20);
        let mut w = World::new(LinkProfile::MIDHAUL, None, 1, 0, a, b);
        w.run().unwrap();
        let seen = &w.downcast::<Counter>(1).unwrap().seen;
        assert_eq!(seen.len(), 20);
        assert!(seen.iter().enumerate().all(|(i, d)| d[0] == i as u8));
        let m = w.measure();
        assert_eq!(m.retransmissions, 0);
        assert_eq!(m.bytes_delivered, 2000);
        assert_eq!(m.sim_time_us, 1000);
    }

    #[test]
    fn total_loss_delivers_nothing() {
        let (a, b) = pair(5);
        let link = LinkProfile {
            loss_rate: 1.0,
            ..LinkProfile::MIDHAUL
        };
        let mut w = World::new(link, None, 1, 0, a, b);
        w.run().unwrap();
        assert!(w.downcast::<Counter>(1).unwrap().seen.is_empty());
        assert_eq!(w.measure().dropped, 5);
        assert!(!w.measure().complete);
    }

    #[test]
    fn bandwidth_serializes() {
        let (a, b) = pair(4);
        let link = LinkProfile {
            bandwidth_bytes_per_ms: Some(128.0),
            ..LinkProfile::MIDHAUL
        };
        let mut w = World::new(link, None, 1, 0, a, b);
        w.run().unwrap();
        // 4 * (100 + 28) bytes at 128 B/ms is 4 ms, plus 1 ms latency.
        assert_eq!(w.measure().sim_time_us, 5000);
    }

    #[test]
    fn stream_rounds_add_rtts() {
        let a = Counter {
            to_send: vec![vec![0u8; 30_000]],
            expect: 0,
            seen: vec![],
        };
        let b = Counter {
            to_send: vec![],
            expect: 1,
            seen: vec![],
        };
        let cfg = StreamTransportConfig {
            init_cwnd: 10,
            mss: 1460,
            rtt_us: 2000,
        };
        let mut w = World::new(
            LinkProfile::MIDHAUL,
            Some(cfg),
            1,
            0,
            Box::new(a),
            Box::new(b),
        );
        w.run().unwrap();
        assert_eq!(w.measure().sim_time_us, 1000 + 2000);
    }

    #[test]
    fn reorder_is_seeded() {
        let link = LinkProfile {
            reorder_rate: 0.3,
            loss_rate: 0.2,
            ..LinkProfile::MIDHAUL
        };
        let digest = |seed| {
            let (a, b) = pair(50);
            let mut w = World::new(link, None, seed, 3, a, b);
            w.run().unwrap();
            w.log_digest()
        };
        assert_eq!(digest(9), digest(9));
        assert_ne!(digest(9), digest(10));
    }
}

fn ceil_u64(x: f64) -> u64 {
    let t = x as u64;
    if (t as f64) < x {
        t + 1
    } else {
        t
    }
}
