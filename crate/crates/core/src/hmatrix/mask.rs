use crate::cidr::{interval_to_prefixes, Prefix};
use crate::error::{Error, Result};

/// Diagonal indicator over the address space, stored as sorted disjoint
/// inclusive intervals. Membership is a binary search; the 2^32 diagonal is
/// never materialized.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RangeMask {
    intervals: Vec<(u32, u32)>,
}

impl RangeMask {
    pub fn empty() -> Self {
        RangeMask::default()
    }

    pub fn full() -> Self {
        RangeMask {
            intervals: vec![(0, u32::MAX)],
        }
    }

    /// Builds a mask from pairwise disjoint prefixes. Overlapping prefixes
    /// are rejected.
    pub fn from_prefixes<I: IntoIterator<Item = Prefix>>(prefixes: I) -> Result<Self> {
        let mut ps: Vec<Prefix> = prefixes.into_iter().collect();
        ps.sort_by_key(|p| p.first());
        for w in ps.windows(2) {
            if w[1].first() <= w[0].last() {
                return Err(Error::param(format!("overlapping prefixes {} and {}", w[0], w[1])));
            }
        }
        let mut intervals: Vec<(u32, u32)> = Vec::with_capacity(ps.len());
        for p in ps {
            match intervals.last_mut() {
                Some(last) if last.1 as u64 + 1 == p.first() as u64 => last.1 = p.last(),
                _ => intervals.push((p.first(), p.last())),
            }
        }
        Ok(RangeMask { intervals })
    }

    /// Mask of individual addresses (duplicates allowed).
    pub fn from_addrs<I: IntoIterator<Item = u32>>(addrs: I) -> Self {
        let mut v: Vec<u32> = addrs.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        RangeMask::from_prefixes(v.into_iter().map(Prefix::host)).expect("deduplicated hosts are disjoint")
    }

    pub fn contains(&self, addr: u32) -> bool {
        let i = self.intervals.partition_point(|&(lo, _)| lo <= addr);
        i > 0 && addr <= self.intervals[i - 1].1
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Number of addresses in the mask.
    pub fn size(&self) -> u64 {
        self.intervals.iter().map(|&(lo, hi)| hi as u64 - lo as u64 + 1).sum()
    }

    pub fn intervals(&self) -> &[(u32, u32)] {
        &self.intervals
    }

    pub fn complement(&self) -> RangeMask {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut next: u64 = 0;
        for &(lo, hi) in &self.intervals {
            if (lo as u64) > next {
                out.push((next as u32, lo - 1));
            }
            next = hi as u64 + 1;
        }
        if next <= u32::MAX as u64 {
            out.push((next as u32, u32::MAX));
        }
        RangeMask { intervals: out }
    }

    /// Minimal CIDR decomposition of the mask.
    pub fn prefixes(&self) -> Vec<Prefix> {
        self.intervals
            .iter()
            .flat_map(|&(lo, hi)| interval_to_prefixes(lo, hi))
            .collect()
    }

    /// The `k`-th address of the mask in ascending order, `k < size()`.
    pub fn nth(&self, mut k: u64) -> Option<u32> {
        for &(lo, hi) in &self.intervals {
            let n = hi as u64 - lo as u64 + 1;
            if k < n {
                return Some(lo + k as u32);
            }
            k -= n;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn membership() {
        let m = RangeMask::from_prefixes([p("10.0.0.0/8"), p("192.168.0.0/16")]).unwrap();
        assert!(m.contains(0x0A01_0203));
        assert!(m.contains(0xC0A8_FFFF));
        assert!(!m.contains(0x0B00_0000));
        assert!(!m.contains(0));
        assert_eq!(m.size(), (1 << 24) + (1 << 16));
    }

    #[test]
    fn overlap_rejected() {
        assert!(RangeMask::from_prefixes([p("10.0.0.0/8"), p("10.1.0.0/16")]).is_err());
    }

    #[test]
    fn adjacent_prefixes_merge() {
        let m = RangeMask::from_prefixes([p("10.0.0.0/9"), p("10.128.0.0/9")]).unwrap();
        assert_eq!(m.intervals().len(), 1);
        assert_eq!(m.prefixes(), vec![p("10.0.0.0/8")]);
    }

    #[test]
    fn complement_round_trip() {
        let m = RangeMask::from_addrs([0, 5, 6, u32::MAX]);
        let c = m.complement();
        assert_eq!(c.size() + m.size(), 1 << 32);
        assert_eq!(c.complement(), m);
        assert_eq!(RangeMask::full().complement(), RangeMask::empty());
        assert_eq!(RangeMask::empty().complement(), RangeMask::full());
    }

    #[test]
    fn nth_walks_intervals() {
        let m = RangeMask::from_addrs([3, 4, 10]);
        assert_eq!(m.nth(0), Some(3));
        assert_eq!(m.nth(2), Some(10));
        assert_eq!(m.nth(3), None);
    }
}
