//! Classic libpcap capture files.
//!
//! Only the IPv4 source and destination are pulled out of each frame; the
//! payload is dropped as soon as the header has been read. Ethernet (with
//! optional 802.1Q/802.1ad tags) and raw-IP link types are understood, every
//! other frame is counted as skipped.

use std::io::{self, Read, Write};

use super::PacketRecord;
use crate::error::{Error, Result};

const MAGIC_MICROS: u32 = 0xA1B2_C3D4;
const MAGIC_NANOS: u32 = 0xA1B2_3C4D;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

/// Largest per-record capture length we are willing to buffer.
const MAX_SNAPLEN: u32 = 1 << 24;

/// Link-layer header types handled by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkType {
    Ethernet,
    /// Frames start directly with the IP header (LINKTYPE_RAW and friends).
    RawIp,
    Other(u32),
}

impl LinkType {
    pub fn from_code(code: u32) -> Self {
        match code {
            1 => LinkType::Ethernet,
            // 101 is LINKTYPE_RAW, 12/14 are the historic DLT_RAW values, 228 is IPV4.
            12 | 14 | 101 | 228 => LinkType::RawIp,
            other => LinkType::Other(other),
        }
    }

    pub fn code(self) -> u32 {
        match self {
            LinkType::Ethernet => 1,
            LinkType::RawIp => 101,
            LinkType::Other(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapHeader {
    pub big_endian: bool,
    pub nanosecond: bool,
    pub link_type: LinkType,
    pub snaplen: u32,
}

impl PcapHeader {
    fn parse(buf: &[u8; GLOBAL_HEADER_LEN]) -> Result<Self> {
        let le = u32::from_le_bytes(buf[0..4].try_into().unwrap());
        let (big_endian, nanosecond) = match le {
            MAGIC_MICROS => (false, false),
            MAGIC_NANOS => (false, true),
            _ => match u32::from_be_bytes(buf[0..4].try_into().unwrap()) {
                MAGIC_MICROS => (true, false),
                MAGIC_NANOS => (true, true),
                _ => return Err(Error::format(format!("bad pcap magic {le:#010x}"))),
            },
        };
        let rd = |off: usize| {
            let b: [u8; 4] = buf[off..off + 4].try_into().unwrap();
            if big_endian {
                u32::from_be_bytes(b)
            } else {
                u32::from_le_bytes(b)
            }
        };
        Ok(PcapHeader {
            big_endian,
            nanosecond,
            snaplen: rd(16),
            link_type: LinkType::from_code(rd(20)),
        })
    }
}

/// Summary of a full parse.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PcapParse {
    pub records: Vec<PacketRecord>,
    /// Frames that were not IPv4, were malformed, or used an unsupported link type.
    pub skipped: u64,
    /// Set when the stream ended in the middle of a packet record.
    pub truncated: bool,
}

/// Streaming reader yielding one [`PacketRecord`] per IPv4 frame.
pub struct PcapReader<R> {
    inner: R,
    header: PcapHeader,
    buf: Vec<u8>,
    skipped: u64,
    truncated: bool,
    done: bool,
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut hdr = [0u8; GLOBAL_HEADER_LEN];
        match read_full(&mut inner, &mut hdr)? {
            GLOBAL_HEADER_LEN => {}
            n => {
                return Err(Error::format(format!(
                    "truncated pcap global header ({n} of {GLOBAL_HEADER_LEN} bytes)"
                )))
            }
        }
        let header = PcapHeader::parse(&hdr)?;
        Ok(PcapReader {
            inner,
            header,
            buf: Vec::with_capacity(2048),
            skipped: 0,
            truncated: false,
            done: false,
        })
    }

    pub fn header(&self) -> PcapHeader {
        self.header
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    fn u32_at(&self, b: &[u8], off: usize) -> u32 {
        let b: [u8; 4] = b[off..off + 4].try_into().unwrap();
        if self.header.big_endian {
            u32::from_be_bytes(b)
        } else {
            u32::from_le_bytes(b)
        }
    }

    /// Reads the next frame. `Ok(None)` at end of stream.
    fn next_frame(&mut self) -> Result<Option<u64>> {
        if self.done {
            return Ok(None);
        }
        let mut rec = [0u8; RECORD_HEADER_LEN];
        let n = read_full(&mut self.inner, &mut rec)?;
        if n == 0 {
            self.done = true;
            return Ok(None);
        }
        if n < RECORD_HEADER_LEN {
            self.done = true;
            self.truncated = true;
            return Ok(None);
        }
        let ts_sec = self.u32_at(&rec, 0) as u64;
        let ts_frac = self.u32_at(&rec, 4) as u64;
        let incl_len = self.u32_at(&rec, 8);
        if incl_len > MAX_SNAPLEN {
            return Err(Error::format(format!(
                "pcap record length {incl_len} exceeds {MAX_SNAPLEN}"
            )));
        }
        self.buf.resize(incl_len as usize, 0);
        let got = read_full(&mut self.inner, &mut self.buf)?;
        if got < incl_len as usize {
            self.done = true;
            self.truncated = true;
            return Ok(None);
        }
        let micros = if self.header.nanosecond {
            ts_frac / 1000
        } else {
            ts_frac
        };
        Ok(Some(ts_sec * 1_000_000 + micros))
    }

    /// Drains the reader into a [`PcapParse`].
    pub fn parse_all(mut self) -> Result<PcapParse> {
        let mut records = Vec::new();
        for rec in &mut self {
            records.push(rec?);
        }
        Ok(PcapParse {
            records,
            skipped: self.skipped,
            truncated: self.truncated,
        })
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let ts = match self.next_frame() {
                Ok(Some(ts)) => ts,
                Ok(None) => return None,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            let ip = match self.header.link_type {
                LinkType::Ethernet => ethernet_ipv4(&self.buf),
                LinkType::RawIp => Some(&self.buf[..]),
                LinkType::Other(_) => None,
            };
            match ip.and_then(ipv4_endpoints) {
                Some((src, dst)) => return Some(Ok(PacketRecord { src, dst, ts })),
                None => self.skipped += 1,
            }
        }
    }
}

/// Parses an entire capture held in memory or behind a reader.
pub fn parse_pcap<R: Read>(stream: R) -> Result<PcapParse> {
    PcapReader::new(stream)?.parse_all()
}

fn ethernet_ipv4(frame: &[u8]) -> Option<&[u8]> {
    let mut off = 12;
    loop {
        let ethertype = u16::from_be_bytes(frame.get(off..off + 2)?.try_into().ok()?);
        match ethertype {
            0x0800 => return frame.get(off + 2..),
            // 802.1Q, 802.1ad, legacy QinQ
            0x8100 | 0x88A8 | 0x9100 => off += 4,
            _ => return None,
        }
    }
}

fn ipv4_endpoints(ip: &[u8]) -> Option<(u32, u32)> {
    if ip.len() < 20 || ip[0] >> 4 != 4 || (ip[0] & 0x0F) < 5 {
        return None;
    }
    let src = u32::from_be_bytes(ip[12..16].try_into().unwrap());
    let dst = u32::from_be_bytes(ip[16..20].try_into().unwrap());
    Some((src, dst))
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Minimal capture writer: little-endian microsecond headers, raw-IP link
/// type, and a bare 20-byte IPv4 header per record.
pub struct PcapWriter<W: Write> {
    inner: W,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        let mut hdr = [0u8; GLOBAL_HEADER_LEN];
        hdr[0..4].copy_from_slice(&MAGIC_MICROS.to_le_bytes());
        hdr[4..6].copy_from_slice(&2u16.to_le_bytes());
        hdr[6..8].copy_from_slice(&4u16.to_le_bytes());
        hdr[16..20].copy_from_slice(&65535u32.to_le_bytes());
        hdr[20..24].copy_from_slice(&LinkType::RawIp.code().to_le_bytes());
        inner.write_all(&hdr)?;
        Ok(PcapWriter { inner })
    }

    pub fn write_record(&mut self, rec: &PacketRecord) -> io::Result<()> {
        let mut out = [0u8; RECORD_HEADER_LEN + 20];
        out[0..4].copy_from_slice(&((rec.ts / 1_000_000) as u32).to_le_bytes());
        out[4..8].copy_from_slice(&((rec.ts % 1_000_000) as u32).to_le_bytes());
        out[8..12].copy_from_slice(&20u32.to_le_bytes());
        out[12..16].copy_from_slice(&20u32.to_le_bytes());
        let ip = &mut out[RECORD_HEADER_LEN..];
        ip[0] = 0x45;
        ip[2..4].copy_from_slice(&20u16.to_be_bytes());
        ip[8] = 64;
        ip[9] = 17;
        ip[12..16].copy_from_slice(&rec.src.to_be_bytes());
        ip[16..20].copy_from_slice(&rec.dst.to_be_bytes());
        let sum = ipv4_checksum(ip);
        ip[10..12].copy_from_slice(&sum.to_be_bytes());
        self.inner.write_all(&out)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn ipv4_checksum(hdr: &[u8]) -> u16 {
    let mut sum: u32 = hdr.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).sum();
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}
