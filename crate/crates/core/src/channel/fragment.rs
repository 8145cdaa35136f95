//! Handshake-message fragmentation and reassembly.

use alloc::vec::Vec;

use super::{ChannelError, Result};
use crate::wire::{Reader, Writer};

pub const FRAGMENT_HEADER_LEN: usize = 12;
pub const MIN_FRAGMENT_BODY: usize = 64;
/// Largest message the 24-bit length field can describe.
pub const MAX_MESSAGE_LEN: usize = (1 << 24) - 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeMessage {
    pub msg_type: u8,
    pub msg_seq: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub msg_type: u8,
    pub msg_seq: u16,
    pub total_len: usize,
    pub frag_offset: usize,
    pub body: Vec<u8>,
}

impl Fragment {
    pub fn frag_len(&self) -> usize {
        self.body.len()
    }

    pub fn encoded_len(&self) -> usize {
        FRAGMENT_HEADER_LEN + self.body.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.msg_type)
            .u16(self.msg_seq)
            .u24(self.total_len)
            .u24(self.frag_offset)
            .u24(self.body.len())
            .bytes(&self.body);
        w.finish()
    }

    pub fn decode(data: &[u8]) -> Result<Fragment> {
        let mut r = Reader::new(data);
        let bad = |_| ChannelError::MalformedFragment;
        let msg_type = r.u8().map_err(bad)?;
        let msg_seq = r.u16().map_err(bad)?;
        let total_len = r.u24().map_err(bad)?;
        let frag_offset = r.u24().map_err(bad)?;
        let frag_len = r.u24().map_err(bad)?;
        let body = r.take(frag_len).map_err(bad)?.to_vec();
        if !r.is_empty() || frag_offset + frag_len > total_len {
            return Err(ChannelError::MalformedFragment);
        }
        Ok(Fragment {
            msg_type,
            msg_seq,
            total_len,
            frag_offset,
            body,
        })
    }
}

/// Splits `msg` into fragments of at most `max_body` bytes. An empty message
/// still yields one empty fragment.
pub fn fragment(msg: &HandshakeMessage, max_body: usize) -> Result<Vec<Fragment>> {
    if max_body < MIN_FRAGMENT_BODY || msg.body.len() > MAX_MESSAGE_LEN {
        return Err(ChannelError::MalformedFragment);
    }
    let total_len = msg.body.len();
    if total_len == 0 {
        return Ok(alloc::vec![Fragment {
            msg_type: msg.msg_type,
            msg_seq: msg.msg_seq,
            total_len: 0,
            frag_offset: 0,
            body: Vec::new()
        }]);
    }
    Ok(msg
        .body
        .chunks(max_body)
        .enumerate()
        .map(|(i, chunk)| Fragment {
            msg_type: msg.msg_type,
            msg_seq: msg.msg_seq,
            total_len,
            frag_offset: i * max_body,
            body: chunk.to_vec(),
        })
        .collect())
}

pub fn fragment_count(total_len: usize, max_body: usize) -> usize {
    total_len.div_ceil(max_body).max(1)
}

/// Collects fragments of one message in any order, with duplicates.
#[derive(Debug, Clone)]
pub struct Reassembler {
    msg_type: u8,
    msg_seq: u16,
    buf: Vec<u8>,
    covered: Vec<(usize, usize)>,
}

impl Reassembler {
    pub fn new(first: &Fragment) -> Self {
        Reassembler {
            msg_type: first.msg_type,
            msg_seq: first.msg_seq,
            buf: alloc::vec![0; first.total_len],
            covered: Vec::new(),
        }
    }

    pub fn msg_seq(&self) -> u16 {
        self.msg_seq
    }

    /// Adds a fragment. Overlapping bytes must agree with what is already held.
    pub fn add(&mut self, f: &Fragment) -> Result<()> {
        if f.msg_type != self.msg_type || f.msg_seq != self.msg_seq || f.total_len != self.buf.len()
        {
            return Err(ChannelError::MalformedFragment);
        }
        let (start, end) = (f.frag_offset, f.frag_offset + f.body.len());
        if end > self.buf.len() {
            return Err(ChannelError::MalformedFragment);
        }
        for &(a, b) in &self.covered {
            let (lo, hi) = (a.max(start), b.min(end));
            if lo < hi && self.buf[lo..hi] != f.body[lo - start..hi - start] {
                return Err(ChannelError::MalformedFragment);
            }
        }
        self.buf[start..end].copy_from_slice(&f.body);
        if start < end {
            self.covered.push((start, end));
            self.covered.sort_unstable();
            let mut merged: Vec<(usize, usize)> = Vec::with_capacity(self.covered.len());
            for &(a, b) in &self.covered {
                match merged.last_mut() {
                    Some(last) if a <= last.1 => last.1 = last.1.max(b),
                    _ => merged.push((a, b)),
                }
            }
            self.covered = merged;
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.buf.is_empty() || self.covered.as_slice() == [(0, self.buf.len())]
    }

    pub fn finish(self) -> Option<HandshakeMessage> {
        self.is_complete().then_some(HandshakeMessage {
            msg_type: self.msg_type,
            msg_seq: self.msg_seq,
            body: self.buf,
        })
    }
}

/// Reassembles a whole message from an arbitrary fragment multiset.
pub fn reassemble(fragments: &[Fragment]) -> Result<HandshakeMessage> {
    let first = fragments.first().ok_or(ChannelError::MalformedFragment)?;
    let mut r = Reassembler::new(first);
    for f in fragments {
        r.add(f)?;
    }
    r.finish().ok_or(ChannelError::MalformedFragment)
}
