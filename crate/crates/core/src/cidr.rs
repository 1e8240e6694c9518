use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An IPv4 CIDR block. The network address is always stored with the host
/// bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prefix {
    addr: u32,
    len: u8,
}

impl Prefix {
    pub fn new(addr: u32, len: u8) -> Result<Self> {
        if len > 32 {
            return Err(Error::param(format!("prefix length {len} exceeds 32")));
        }
        Ok(Prefix {
            addr: addr & Self::netmask(len),
            len,
        })
    }

    pub const fn whole_space() -> Self {
        Prefix { addr: 0, len: 0 }
    }

    pub const fn host(addr: u32) -> Self {
        Prefix { addr, len: 32 }
    }

    pub fn netmask(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - len as u32)
        }
    }

    pub fn addr(&self) -> u32 {
        self.addr
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn first(&self) -> u32 {
        self.addr
    }

    pub fn last(&self) -> u32 {
        self.addr | !Self::netmask(self.len)
    }

    /// Number of addresses covered, up to 2^32.
    pub fn size(&self) -> u64 {
        1u64 << (32 - self.len as u32)
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr & Self::netmask(self.len) == self.addr
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.addr), self.len)
    }
}

impl FromStr for Prefix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (ip, len) = match s.split_once('/') {
            Some((ip, len)) => {
                let len: u8 = len
                    .parse()
                    .map_err(|_| Error::format(format!("bad prefix length in `{s}`")))?;
                (ip, len)
            }
            None => (s, 32),
        };
        let ip: Ipv4Addr = ip
            .parse()
            .map_err(|_| Error::format(format!("bad IPv4 address in `{s}`")))?;
        let p = Prefix::new(u32::from(ip), len)?;
        if p.addr != u32::from(ip) {
            return Err(Error::format(format!("`{s}` has host bits set")));
        }
        Ok(p)
    }
}

/// Longest common prefix length of two addresses.
pub fn common_prefix_len(a: u32, b: u32) -> u32 {
    (a ^ b).leading_zeros()
}

/// Splits the inclusive interval `[first, last]` into the minimal list of
/// aligned CIDR blocks.
pub fn interval_to_prefixes(first: u32, last: u32) -> Vec<Prefix> {
    let mut out = Vec::new();
    let mut cur = first as u64;
    let end = last as u64 + 1;
    while cur < end {
        let align = if cur == 0 { 32 } else { cur.trailing_zeros().min(32) };
        let mut bits = align;
        while bits > 0 && cur + (1u64 << bits) > end {
            bits -= 1;
        }
        out.push(Prefix {
            addr: cur as u32,
            len: (32 - bits) as u8,
        });
        cur += 1u64 << bits;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let p: Prefix = "172.16.0.0/12".parse().unwrap();
        assert_eq!(p.size(), 1 << 20);
        assert_eq!(p.to_string(), "172.16.0.0/12");
        assert!(p.contains(u32::from(Ipv4Addr::new(172, 31, 255, 255))));
        assert!(!p.contains(u32::from(Ipv4Addr::new(172, 32, 0, 0))));
        assert!("10.0.0.1/8".parse::<Prefix>().is_err());
        assert!("10.0.0.0/33".parse::<Prefix>().is_err());
        assert_eq!("1.2.3.4".parse::<Prefix>().unwrap(), Prefix::host(0x0102_0304));
    }

    #[test]
    fn whole_space_bounds() {
        let p = Prefix::whole_space();
        assert_eq!(p.first(), 0);
        assert_eq!(p.last(), u32::MAX);
        assert_eq!(p.size(), 1 << 32);
    }

    #[test]
    fn interval_decomposition_tiles_exactly() {
        for &(a, b) in &[
            (0u32, u32::MAX),
            (5, 5),
            (3, 17),
            (0x0A00_0000, 0x0AFF_FFFF),
            (1, u32::MAX),
        ] {
            let ps = interval_to_prefixes(a, b);
            let mut next = a as u64;
            for p in &ps {
                assert_eq!(p.first() as u64, next);
                next = p.last() as u64 + 1;
            }
            assert_eq!(next, b as u64 + 1);
        }
        assert_eq!(interval_to_prefixes(0x0A00_0000, 0x0AFF_FFFF).len(), 1);
    }
}
