//! Record framing and AES-256-GCM protection.

use alloc::string::String;
use alloc::vec::Vec;

use super::keysched::{next_secret, Secret, TrafficKeys};
use super::{ChannelError, Result};
use crate::crypto::aead::{self, TAG_LEN};
use crate::crypto::CryptoError;
use crate::wire::{Reader, Writer};

pub const RECORD_HEADER_LEN: usize = 12;
/// IPv4 plus UDP header bytes charged against the MTU.
pub const DATAGRAM_OVERHEAD: usize = 28;
pub const OLD_EPOCH_GRACE: u8 = 2;
pub const REPLAY_WINDOW: u64 = 64;
pub const DEFAULT_RECORD_BUDGET: u64 = 1_000_000;
pub const MAX_SEQ: u64 = (1 << 48) - 1;
pub const MAX_RECORD_LEN: usize = (1 << 24) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ContentType {
    Alert = 21,
    Handshake = 22,
    AppData = 23,
    Ack = 26,
}

impl ContentType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            21 => Some(ContentType::Alert),
            22 => Some(ContentType::Handshake),
            23 => Some(ContentType::AppData),
            26 => Some(ContentType::Ack),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordHeader {
    pub content_type: u8,
    pub epoch: u16,
    pub seq: u64,
    pub len: usize,
}

impl RecordHeader {
    pub fn encode(&self) -> [u8; RECORD_HEADER_LEN] {
        let mut w = Writer::new();
        w.u8(self.content_type)
            .u16(self.epoch)
            .u48(self.seq)
            .u24(self.len);
        w.finish().try_into().expect("12-byte header")
    }

    pub fn read(r: &mut Reader<'_>) -> Result<RecordHeader> {
        let bad = |_| ChannelError::Malformed("record header");
        Ok(RecordHeader {
            content_type: r.u8().map_err(bad)?,
            epoch: r.u16().map_err(bad)?,
            seq: r.u48().map_err(bad)?,
            len: r.u24().map_err(bad)?,
        })
    }
}

pub fn encode_plain(content_type: ContentType, epoch: u16, seq: u64, payload: &[u8]) -> Vec<u8> {
    let h = RecordHeader {
        content_type: content_type as u8,
        epoch,
        seq,
        len: payload.len(),
    };
    let mut out = Vec::with_capacity(RECORD_HEADER_LEN + payload.len());
    out.extend_from_slice(&h.encode());
    out.extend_from_slice(payload);
    out
}

/// Splits a datagram into records. Fails on the first truncated record.
pub fn parse_records(data: &[u8]) -> Result<Vec<(RecordHeader, &[u8])>> {
    let mut r = Reader::new(data);
    let mut out = Vec::new();
    while !r.is_empty() {
        let h = RecordHeader::read(&mut r)?;
        let body = r
            .take(h.len)
            .map_err(|_| ChannelError::Malformed("record length"))?;
        out.push((h, body));
    }
    Ok(out)
}

/// Tries to take one complete record off the front of a stream buffer.
pub fn split_record(buf: &[u8]) -> Option<(RecordHeader, usize)> {
    if buf.len() < RECORD_HEADER_LEN {
        return None;
    }
    let h = RecordHeader::read(&mut Reader::new(buf)).ok()?;
    (buf.len() >= RECORD_HEADER_LEN + h.len).then_some((h, RECORD_HEADER_LEN + h.len))
}

/// Sliding anti-replay bitmap over the last 64 sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct ReplayWindow {
    top: Option<u64>,
    bits: u64,
}

impl ReplayWindow {
    pub fn check(&self, seq: u64) -> Result<()> {
        match self.top {
            None => Ok(()),
            Some(top) if seq > top => Ok(()),
            Some(top) if top - seq >= REPLAY_WINDOW => Err(ChannelError::ReplayDetected),
            Some(top) if self.bits & (1 << (top - seq)) != 0 => Err(ChannelError::ReplayDetected),
            Some(_) => Ok(()),
        }
    }

    pub fn mark(&mut self, seq: u64) {
        match self.top {
            None => {
                self.top = Some(seq);
                self.bits = 1;
            }
            Some(top) if seq > top => {
                let shift = seq - top;
                self.bits = if shift >= REPLAY_WINDOW {
                    0
                } else {
                    self.bits << shift
                };
                self.bits |= 1;
                self.top = Some(seq);
            }
            Some(top) => self.bits |= 1 << (top - seq),
        }
    }
}

#[derive(Debug, Clone)]
struct SendDirection {
    epoch: u16,
    secret: Secret,
    keys: TrafficKeys,
    next_seq: u64,
    sealed: u64,
}

#[derive(Debug, Clone)]
struct RecvEpoch {
    epoch: u16,
    secret: Secret,
    keys: TrafficKeys,
    window: ReplayWindow,
}

impl RecvEpoch {
    fn new(epoch: u16, secret: Secret) -> Self {
        let keys = TrafficKeys::from_secret(&secret[..]);
        RecvEpoch {
            epoch,
            secret,
            keys,
            window: ReplayWindow::default(),
        }
    }

    fn open(&self, h: &RecordHeader, body: &[u8]) -> Result<Vec<u8>> {
        self.window.check(h.seq)?;
        open_with_keys(&self.keys, h, body)
    }
}

pub fn open_with_keys(keys: &TrafficKeys, h: &RecordHeader, body: &[u8]) -> Result<Vec<u8>> {
    let aad = h.encode();
    aead::open(&keys.key[..], &keys.nonce(h.epoch, h.seq), &aad, body).map_err(|e| match e {
        CryptoError::AuthenticationFailure => ChannelError::AuthenticationFailure,
        other => ChannelError::Crypto(other),
    })
}

/// Established traffic protection for both directions.
#[derive(Debug, Clone)]
pub struct Session {
    pub negotiated_group: &'static str,
    pub transcript_hash: [u8; 48],
    pub peer_identity: Option<String>,
    budget: u64,
    send: SendDirection,
    recv: RecvEpoch,
    previous: Option<(RecvEpoch, u8)>,
}

pub const FIRST_APP_EPOCH: u16 = 1;

impl Session {
    pub fn new(
        negotiated_group: &'static str,
        transcript_hash: [u8; 48],
        peer_identity: Option<String>,
        send_secret: Secret,
        recv_secret: Secret,
        budget: u64,
    ) -> Self {
        let keys = TrafficKeys::from_secret(&send_secret[..]);
        Session {
            negotiated_group,
            transcript_hash,
            peer_identity,
            budget,
            send: SendDirection {
                epoch: FIRST_APP_EPOCH,
                secret: send_secret,
                keys,
                next_seq: 0,
                sealed: 0,
            },
            recv: RecvEpoch::new(FIRST_APP_EPOCH, recv_secret),
            previous: None,
        }
    }

    pub fn send_epoch(&self) -> u16 {
        self.send.epoch
    }

    pub fn recv_epoch(&self) -> u16 {
        self.recv.epoch
    }

    pub fn epoch(&self) -> u16 {
        self.send.epoch
    }

    pub fn records_sealed(&self) -> u64 {
        self.send.sealed
    }

    pub fn budget_remaining(&self) -> u64 {
        self.budget.saturating_sub(self.send.sealed)
    }

    pub fn send_keys(&self) -> &TrafficKeys {
        &self.send.keys
    }

    pub fn recv_keys(&self) -> &TrafficKeys {
        &self.recv.keys
    }

    /// Moves the sending direction to the next epoch.
    pub fn key_update(&mut self) -> u16 {
        let secret = next_secret(&self.send.secret[..]);
        let keys = TrafficKeys::from_secret(&secret[..]);
        self.send = SendDirection {
            epoch: self.send.epoch + 1,
            secret,
            keys,
            next_seq: 0,
            sealed: 0,
        };
        self.send.epoch
    }

    pub fn seal_record(&mut self, plaintext: &[u8]) -> Result<Vec<u8>> {
        self.seal(ContentType::AppData, plaintext)
    }

    pub fn seal(&mut self, content_type: ContentType, plaintext: &[u8]) -> Result<Vec<u8>> {
        if self.send.sealed >= self.budget || self.send.next_seq > MAX_SEQ {
            return Err(ChannelError::NonceBudgetExceeded);
        }
        if plaintext.len() + TAG_LEN > MAX_RECORD_LEN {
            return Err(ChannelError::PayloadTooLarge {
                len: plaintext.len(),
                max: MAX_RECORD_LEN - TAG_LEN,
            });
        }
        let h = RecordHeader {
            content_type: content_type as u8,
            epoch: self.send.epoch,
            seq: self.send.next_seq,
            len: plaintext.len() + TAG_LEN,
        };
        let aad = h.encode();
        let ct = aead::seal(
            &self.send.keys.key[..],
            &self.send.keys.nonce(h.epoch, h.seq),
            &aad,
            plaintext,
        )?;
        self.send.next_seq += 1;
        self.send.sealed += 1;
        let mut out = Vec::with_capacity(RECORD_HEADER_LEN + ct.len());
        out.extend_from_slice(&aad);
        out.extend_from_slice(&ct);
        Ok(out)
    }

    /// Opens one encoded record and returns its application payload.
    pub fn open_record(&mut self, record: &[u8]) -> Result<Vec<u8>> {
        let mut r = Reader::new(record);
        let h = RecordHeader::read(&mut r)?;
        let body = r
            .take(h.len)
            .map_err(|_| ChannelError::Malformed("record length"))?;
        if !r.is_empty() {
            return Err(ChannelError::Malformed("trailing bytes"));
        }
        let (ct, pt) = self.open(&h, body)?;
        if ct != ContentType::AppData {
            return Err(ChannelError::Malformed("content type"));
        }
        Ok(pt)
    }

    pub fn open(&mut self, h: &RecordHeader, body: &[u8]) -> Result<(ContentType, Vec<u8>)> {
        let ct =
            ContentType::from_u8(h.content_type).ok_or(ChannelError::Malformed("content type"))?;
        let pt = if h.epoch == self.recv.epoch {
            let pt = self.recv.open(h, body)?;
            self.recv.window.mark(h.seq);
            pt
        } else if h.epoch == self.recv.epoch.wrapping_add(1) {
            let mut next = RecvEpoch::new(h.epoch, next_secret(&self.recv.secret[..]));
            let pt = next.open(h, body)?;
            next.window.mark(h.seq);
            let old = core::mem::replace(&mut self.recv, next);
            self.previous = Some((old, OLD_EPOCH_GRACE));
            pt
        } else if h.epoch < self.recv.epoch {
            match &mut self.previous {
                Some((prev, grace)) if prev.epoch == h.epoch && *grace > 0 => {
                    let pt = prev.open(h, body)?;
                    prev.window.mark(h.seq);
                    *grace -= 1;
                    pt
                }
                _ => return Err(ChannelError::EpochTooOld),
            }
        } else {
            return Err(ChannelError::AuthenticationFailure);
        };
        Ok((ct, pt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use zeroize::Zeroizing;

    fn pair(budget: u64) -> (Session, Session) {
        let a = Zeroizing::new([1u8; 48]);
        let b = Zeroizing::new([2u8; 48]);
        let th = [0u8; 48];
        (
            Session::new("X-Wing", th, None, a.clone(), b.clone(), budget),
            Session::new("X-Wing", th, None, b, a, budget),
        )
    }

    #[test]
    fn round_trip_1400() {
        let (mut c, mut s) = pair(DEFAULT_RECORD_BUDGET);
        let p: Vec<u8> = (0..1400).map(|i| i as u8).collect();
        let rec = c.seal_record(&p).unwrap();
        assert_eq!(rec.len(), RECORD_HEADER_LEN + 1400 + TAG_LEN);
        assert_eq!(s.open_record(&rec).unwrap(), p);
        assert_eq!(s.open_record(&rec), Err(ChannelError::ReplayDetected));
    }

    #[test]
    fn tamper_fails_auth() {
        let (mut c, mut s) = pair(10);
        let mut rec = c.seal_record(b"hello").unwrap();
        rec[RECORD_HEADER_LEN] ^= 1;
        assert_eq!(
            s.open_record(&rec),
            Err(ChannelError::AuthenticationFailure)
        );
        let mut rec = c.seal_record(b"hello").unwrap();
        rec[3] ^= 1;
        assert_eq!(
            s.open_record(&rec),
            Err(ChannelError::AuthenticationFailure)
        );
    }

    #[test]
    fn update_grace_then_too_old() {
        let (mut c, mut s) = pair(DEFAULT_RECORD_BUDGET);
        assert_eq!(
            s.open_record(&c.seal_record(b"e1").unwrap()).unwrap(),
            b"e1"
        );
        let mut stale = c.clone();
        assert_eq!(c.key_update(), 2);
        assert_eq!(
            s.open_record(&c.seal_record(b"e2").unwrap()).unwrap(),
            b"e2"
        );
        assert_eq!(s.recv_epoch(), 2);
        for _ in 0..OLD_EPOCH_GRACE {
            assert!(s.open_record(&stale.seal_record(b"late").unwrap()).is_ok());
        }
        assert_eq!(
            s.open_record(&stale.seal_record(b"late").unwrap()),
            Err(ChannelError::EpochTooOld)
        );
    }

    #[test]
    fn old_keys_cannot_open_new_epoch() {
        let (mut c, s) = pair(DEFAULT_RECORD_BUDGET);
        let old = s.recv_keys().clone();
        c.key_update();
        let rec = c.seal_record(b"secret").unwrap();
        let (h, body) = parse_records(&rec).unwrap()[0];
        let mut forged = h;
        forged.epoch = 1;
        assert_eq!(
            open_with_keys(&old, &h, body),
            Err(ChannelError::AuthenticationFailure)
        );
        assert_eq!(
            open_with_keys(&old, &forged, body),
            Err(ChannelError::AuthenticationFailure)
        );
    }

    #[test]
    fn five_updates() {
        let (mut c, mut s) = pair(DEFAULT_RECORD_BUDGET);
        for i in 0..5u8 {
            c.key_update();
            assert_eq!(s.open_record(&c.seal_record(&[i]).unwrap()).unwrap(), [i]);
        }
        assert_eq!((c.epoch(), s.recv_epoch()), (6, 6));
    }

    #[test]
    fn budget_enforced() {
        let (mut c, _) = pair(3);
        for _ in 0..3 {
            c.seal_record(b"x").unwrap();
        }
        assert_eq!(c.seal_record(b"x"), Err(ChannelError::NonceBudgetExceeded));
        c.key_update();
        assert!(c.seal_record(b"x").is_ok());
    }

    #[test]
    fn replay_window_edges() {
        let mut w = ReplayWindow::default();
        w.mark(100);
        assert!(w.check(100).is_err());
        assert!(w.check(99).is_ok());
        assert!(w.check(36).is_err());
        assert!(w.check(37).is_ok());
        w.mark(300);
        assert!(w.check(100).is_err());
        assert!(w.check(299).is_ok());
    }
}
