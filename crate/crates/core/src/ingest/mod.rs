//! Packet records, capture parsing, constant-packet windows and synthetic
//! traffic.

pub mod pcap;
mod synth;

pub use pcap::{parse_pcap, PcapParse, PcapReader, PcapWriter};
pub use synth::{synth_traffic, SynthSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default window size: 2^17 valid packets.
pub const DEFAULT_NV: usize = 1 << 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketRecord {
    pub src: u32,
    pub dst: u32,
    /// Capture time in microseconds since the epoch. Carried along, never
    /// used in matrix math.
    pub ts: u64,
}

impl PacketRecord {
    pub fn pair(&self) -> (u32, u32) {
        (self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketWindow {
    pub records: Vec<PacketRecord>,
    pub window_index: u64,
    pub is_partial: bool,
}

/// Splits a stream into consecutive windows of `n_v` records; a shorter
/// remainder becomes a final window flagged partial.
pub fn window_packets(records: Vec<PacketRecord>, n_v: usize) -> Result<Vec<PacketWindow>> {
    if n_v == 0 {
        return Err(Error::param("window size must be at least 1"));
    }
    let mut out = Vec::with_capacity(records.len().div_ceil(n_v));
    let mut rest = records;
    let mut index = 0;
    while !rest.is_empty() {
        let tail = rest.split_off(rest.len().min(n_v));
        let is_partial = rest.len() < n_v;
        out.push(PacketWindow {
            records: rest,
            window_index: index,
            is_partial,
        });
        rest = tail;
        index += 1;
    }
    Ok(out)
}

/// Incremental windowing over an iterator of records.
pub struct Windower<I> {
    inner: I,
    n_v: usize,
    next_index: u64,
}

impl<I: Iterator<Item = Result<PacketRecord>>> Windower<I> {
    pub fn new(inner: I, n_v: usize) -> Result<Self> {
        if n_v == 0 {
            return Err(Error::param("window size must be at least 1"));
        }
        Ok(Windower {
            inner,
            n_v,
            next_index: 0,
        })
    }
}

impl<I: Iterator<Item = Result<PacketRecord>>> Iterator for Windower<I> {
    type Item = Result<PacketWindow>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut records = Vec::with_capacity(self.n_v);
        for rec in self.inner.by_ref() {
            match rec {
                Ok(r) => records.push(r),
                Err(e) => return Some(Err(e)),
            }
            if records.len() == self.n_v {
                break;
            }
        }
        if records.is_empty() {
            return None;
        }
        let w = PacketWindow {
            is_partial: records.len() < self.n_v,
            records,
            window_index: self.next_index,
        };
        self.next_index += 1;
        Some(Ok(w))
    }
}
