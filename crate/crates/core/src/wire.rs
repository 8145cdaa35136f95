//! Big-endian byte writer/reader and the TLV framing shared by the encoders.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncated;

#[derive(Debug, Default, Clone)]
pub struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u24(&mut self, v: usize) -> &mut Self {
        debug_assert!(v < 1 << 24);
        self.buf.extend_from_slice(&(v as u32).to_be_bytes()[1..]);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u48(&mut self, v: u64) -> &mut Self {
        debug_assert!(v < 1 << 48);
        self.buf.extend_from_slice(&v.to_be_bytes()[2..]);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn vec8(&mut self, b: &[u8]) -> &mut Self {
        self.u8(b.len() as u8).bytes(b)
    }

    pub fn vec16(&mut self, b: &[u8]) -> &mut Self {
        self.u16(b.len() as u16).bytes(b)
    }

    pub fn vec24(&mut self, b: &[u8]) -> &mut Self {
        self.u24(b.len()).bytes(b)
    }

    /// `type:1 || length:3 || value`.
    pub fn tlv(&mut self, t: u8, value: &[u8]) -> &mut Self {
        self.u8(t).vec24(value)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], Truncated> {
        if self.remaining() < n {
            return Err(Truncated);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn rest(&mut self) -> &'a [u8] {
        let s = &self.data[self.pos..];
        self.pos = self.data.len();
        s
    }

    pub fn u8(&mut self) -> Result<u8, Truncated> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, Truncated> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u24(&mut self) -> Result<usize, Truncated> {
        let b = self.take(3)?;
        Ok(u32::from_be_bytes([0, b[0], b[1], b[2]]) as usize)
    }

    pub fn u32(&mut self) -> Result<u32, Truncated> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")))
    }

    pub fn u48(&mut self) -> Result<u64, Truncated> {
        let b = self.take(6)?;
        let mut full = [0u8; 8];
        full[2..].copy_from_slice(b);
        Ok(u64::from_be_bytes(full))
    }

    pub fn u64(&mut self) -> Result<u64, Truncated> {
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().expect("8 bytes")))
    }

    pub fn vec8(&mut self) -> Result<&'a [u8], Truncated> {
        let n = self.u8()? as usize;
        self.take(n)
    }

    pub fn vec16(&mut self) -> Result<&'a [u8], Truncated> {
        let n = self.u16()? as usize;
        self.take(n)
    }

    pub fn vec24(&mut self) -> Result<&'a [u8], Truncated> {
        let n = self.u24()?;
        self.take(n)
    }

    pub fn tlv(&mut self) -> Result<(u8, &'a [u8]), Truncated> {
        let t = self.u8()?;
        Ok((t, self.vec24()?))
    }

    /// Reads a TLV that must carry type `t`.
    pub fn expect_tlv(&mut self, t: u8) -> Result<&'a [u8], Truncated> {
        match self.tlv()? {
            (got, v) if got == t => Ok(v),
            _ => Err(Truncated),
        }
    }
}
