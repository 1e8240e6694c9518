//! Sensor focusing over a four-way partition of the address space.
//!
//! The observed `(source range, destination range)` packet distribution is
//! compared against what uniformly random traffic would produce. A sensor
//! reading its data with the right byte order sees a distribution that is
//! far from random; the wrong byte order scatters addresses and pulls the
//! table toward the random expectation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anon::CryptoPan;
use crate::cidr::Prefix;
use crate::error::{Error, Result};
use crate::hmatrix::{HypersparseMatrix, RangeMask};
use crate::ingest::PacketRecord;

const SPACE: f64 = 4_294_967_296.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RangeId {
    Nonroutable,
    Bogon,
    Assigned,
    Other,
}

impl RangeId {
    pub const ALL: [RangeId; 4] = [RangeId::Nonroutable, RangeId::Bogon, RangeId::Assigned, RangeId::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RangeId::Nonroutable => "nonroutable",
            RangeId::Bogon => "bogon",
            RangeId::Assigned => "assigned",
            RangeId::Other => "other",
        }
    }
}

impl fmt::Display for RangeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RangeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RangeId::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::format(format!("unknown range name `{s}`")))
    }
}

pub const NONROUTABLE_DEFAULT: [&str; 3] = ["10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16"];

/// 2^22 + 2^17 + 2^16 + 6 * 2^8 addresses.
pub const BOGON_DEFAULT: [&str; 9] = [
    "100.64.0.0/10",
    "198.18.0.0/15",
    "169.254.0.0/16",
    "192.0.0.0/24",
    "192.0.2.0/24",
    "192.31.196.0/24",
    "192.88.99.0/24",
    "198.51.100.0/24",
    "203.0.113.0/24",
];

/// Sensor-specific gateway block used by examples and tests (3,670,016 addresses).
pub const ASSIGNED_EXAMPLE: [&str; 3] = ["18.0.0.0/11", "18.32.0.0/12", "18.48.0.0/13"];

/// Disjoint nonroutable / bogon / assigned ranges; everything else is
/// `other`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangePartition {
    masks: [RangeMask; 4],
    /// Sorted disjoint intervals tagged with their range, covering the named
    /// ranges only.
    lookup: Vec<(u32, u32, RangeId)>,
}

impl RangePartition {
    pub fn new(nonroutable: Vec<Prefix>, bogon: Vec<Prefix>, assigned: Vec<Prefix>) -> Result<Self> {
        let named = [
            RangeMask::from_prefixes(nonroutable)?,
            RangeMask::from_prefixes(bogon)?,
            RangeMask::from_prefixes(assigned)?,
        ];
        let mut lookup: Vec<(u32, u32, RangeId)> = Vec::new();
        for (mask, id) in named.iter().zip(RangeId::ALL) {
            lookup.extend(mask.intervals().iter().map(|&(lo, hi)| (lo, hi, id)));
        }
        lookup.sort_by_key(|t| t.0);
        for w in lookup.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(Error::param(format!(
                    "ranges {} and {} overlap at {}",
                    w[0].2,
                    w[1].2,
                    std::net::Ipv4Addr::from(w[1].0)
                )));
            }
        }
        let union = RangeMask::from_prefixes(named.iter().flat_map(|m| m.prefixes()))?;
        let [n, b, a] = named;
        Ok(RangePartition {
            masks: [n, b, a, union.complement()],
            lookup,
        })
    }

    /// Default nonroutable and bogon sets with a caller-supplied assigned block.
    pub fn with_assigned(assigned: Vec<Prefix>) -> Result<Self> {
        let parse = |xs: &[&str]| xs.iter().map(|s| s.parse()).collect::<Result<Vec<Prefix>>>();
        Self::new(parse(&NONROUTABLE_DEFAULT)?, parse(&BOGON_DEFAULT)?, assigned)
    }

    /// Defaults plus [`ASSIGNED_EXAMPLE`].
    pub fn example() -> Self {
        let assigned = ASSIGNED_EXAMPLE.iter().map(|s| s.parse().unwrap()).collect();
        Self::with_assigned(assigned).expect("built-in ranges are disjoint")
    }

    /// Parses a configuration with one `name cidr` entry per line. `#`
    /// starts a comment. Named ranges left out of the file take their
    /// defaults, except `assigned`, which must be present.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut lists: [Option<Vec<Prefix>>; 3] = [None, None, None];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(name), Some(cidr), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::format(format!("line {}: expected `name cidr`", lineno + 1)));
            };
            let id: RangeId = name.parse()?;
            if id == RangeId::Other {
                return Err(Error::format(format!(
                    "line {}: `other` is the complement and cannot be listed",
                    lineno + 1
                )));
            }
            let prefix: Prefix = cidr
                .parse()
                .map_err(|e| Error::format(format!("line {}: {e}", lineno + 1)))?;
            lists[id.index()].get_or_insert_with(Vec::new).push(prefix);
        }
        let parse = |xs: &[&str]| xs.iter().map(|s| s.parse()).collect::<Result<Vec<Prefix>>>();
        let [n, b, a] = lists;
        let assigned = a.ok_or_else(|| Error::format("range config lists no `assigned` prefixes"))?;
        Self::new(
            n.map_or_else(|| parse(&NONROUTABLE_DEFAULT), Ok)?,
            b.map_or_else(|| parse(&BOGON_DEFAULT), Ok)?,
            assigned,
        )
    }

    pub fn to_config(&self) -> String {
        let mut s = String::new();
        for id in &RangeId::ALL[..3] {
            for p in self.mask(*id).prefixes() {
                s.push_str(&format!("{} {}\n", id.name(), p));
            }
        }
        s
    }

    pub fn mask(&self, id: RangeId) -> &RangeMask {
        &self.masks[id.index()]
    }

    pub fn size(&self, id: RangeId) -> u64 {
        self.masks[id.index()].size()
    }

    pub fn fraction(&self, id: RangeId) -> f64 {
        self.size(id) as f64 / SPACE
    }

    pub fn classify(&self, addr: u32) -> RangeId {
        let i = self.lookup.partition_point(|t| t.0 <= addr);
        match i.checked_sub(1).map(|k| self.lookup[k]) {
            Some((_, hi, id)) if addr <= hi => id,
            _ => RangeId::Other,
        }
    }

    /// Every range as tagged intervals in address order; the tiling of the
    /// full space.
    pub fn tiling(&self) -> Vec<(u32, u32, RangeId)> {
        let mut all: Vec<(u32, u32, RangeId)> = RangeId::ALL
            .iter()
            .flat_map(|&id| self.mask(id).intervals().iter().map(move |&(lo, hi)| (lo, hi, id)))
            .collect();
        all.sort_by_key(|t| t.0);
        all
    }

    /// The partition carried into anonymized address space.
    pub fn anonymized(&self, pan: &CryptoPan) -> Result<Self> {
        let map = |id: RangeId| {
            self.mask(id)
                .prefixes()
                .into_iter()
                .map(|p| pan.anonymize_prefix(p))
                .collect::<Vec<_>>()
        };
        Self::new(map(RangeId::Nonroutable), map(RangeId::Bogon), map(RangeId::Assigned))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusTable {
    /// Packet fractions indexed `[source range][destination range]`.
    pub fractions: [[f64; 4]; 4],
    pub total: u64,
}

impl FocusTable {
    pub fn from_counts(counts: [[u64; 4]; 4]) -> Result<Self> {
        let total: u64 = counts.iter().flatten().sum();
        if total == 0 {
            return Err(Error::EmptyTable);
        }
        let mut fractions = [[0.0; 4]; 4];
        for (row, crow) in fractions.iter_mut().zip(&counts) {
            for (f, &c) in row.iter_mut().zip(crow) {
                *f = c as f64 / total as f64;
            }
        }
        Ok(FocusTable { fractions, total })
    }

    pub fn get(&self, src: RangeId, dst: RangeId) -> f64 {
        self.fractions[src.index()][dst.index()]
    }

    pub fn sum(&self) -> f64 {
        self.fractions.iter().flatten().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("src\\dst");
        for id in RangeId::ALL {
            s.push(',');
            s.push_str(id.name());
        }
        s.push('\n');
        for src in RangeId::ALL {
            s.push_str(src.name());
            for dst in RangeId::ALL {
                s.push_str(&format!(",{}", self.get(src, dst)));
            }
            s.push('\n');
        }
        s
    }
}

/// Packet counts per range pair.
pub fn focus_counts(matrices: &[HypersparseMatrix], part: &RangePartition) -> [[u64; 4]; 4] {
    counts_mapped(matrices, part, |a| a)
}

fn counts_mapped(matrices: &[HypersparseMatrix], part: &RangePartition, view: fn(u32) -> u32) -> [[u64; 4]; 4] {
    matrices
        .par_iter()
        .map(|m| {
            let mut c = [[0u64; 4]; 4];
            for (i, cols, vals) in m.rows() {
                let ri = part.classify(view(i)).index();
                for (&j, &v) in cols.iter().zip(vals) {
                    c[ri][part.classify(view(j)).index()] += v;
                }
            }
            c
        })
        .reduce(|| [[0u64; 4]; 4], add_counts)
}

fn add_counts(mut a: [[u64; 4]; 4], b: [[u64; 4]; 4]) -> [[u64; 4]; 4] {
    for (ra, rb) in a.iter_mut().zip(&b) {
        for (x, y) in ra.iter_mut().zip(rb) {
            *x += y;
        }
    }
    a
}

pub fn focus_table(matrices: &[HypersparseMatrix], part: &RangePartition) -> Result<FocusTable> {
    FocusTable::from_counts(focus_counts(matrices, part))
}

/// Focus table straight from packet records, without building matrices.
pub fn focus_table_from_records(records: &[PacketRecord], part: &RangePartition) -> Result<FocusTable> {
    let counts = records
        .par_chunks(1 << 16)
        .map(|chunk| {
            let mut c = [[0u64; 4]; 4];
            for r in chunk {
                c[part.classify(r.src).index()][part.classify(r.dst).index()] += 1;
            }
            c
        })
        .reduce(|| [[0u64; 4]; 4], add_counts);
    FocusTable::from_counts(counts)
}

/// Table expected from traffic whose endpoints are uniform over the space.
pub fn random_expectation(part: &RangePartition) -> FocusTable {
    let f = RangeId::ALL.map(|id| part.fraction(id));
    let mut fractions = [[0.0; 4]; 4];
    for (a, row) in fractions.iter_mut().enumerate() {
        for (b, x) in row.iter_mut().enumerate() {
            *x = f[a] * f[b];
        }
    }
    FocusTable { fractions, total: 0 }
}

/// Total-variation distance between the two tables.
pub fn focus_score(observed: &FocusTable, expected: &FocusTable) -> Result<f64> {
    for (name, t) in [("observed", observed), ("expected", expected)] {
        let s = t.sum();
        if (s - 1.0).abs() > 1e-9 || t.fractions.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::param(format!("{name} focus table is not normalized (sum {s})")));
        }
    }
    let tv: f64 = observed
        .fractions
        .iter()
        .flatten()
        .zip(expected.fractions.iter().flatten())
        .map(|(o, e)| (o - e).abs())
        .sum::<f64>()
        / 2.0;
    Ok(tv.clamp(0.0, 1.0))
}

/// Reinterprets every address with its bytes reversed.
pub fn byteswap_view(records: &[PacketRecord]) -> Vec<PacketRecord> {
    records
        .iter()
        .map(|r| PacketRecord {
            src: r.src.swap_bytes(),
            dst: r.dst.swap_bytes(),
            ts: r.ts,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endianness {
    Big,
    Little,
}

impl Endianness {
    pub fn label(self) -> &'static str {
        match self {
            Endianness::Big => "big-endian",
            Endianness::Little => "little-endian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndiannessReport {
    pub big: FocusTable,
    pub little: FocusTable,
    pub expected: FocusTable,
    pub score_big: f64,
    pub score_little: f64,
    pub verdict: Endianness,
}

/// Scores the records as parsed (network order) and byte-swapped, and picks
/// the interpretation further from random.
pub fn discriminate_endianness(records: &[PacketRecord], part: &RangePartition) -> Result<EndiannessReport> {
    let big = focus_table_from_records(records, part)?;
    let little = focus_table_from_records(&byteswap_view(records), part)?;
    report(big, little, part)
}

/// Same procedure over stored window matrices.
pub fn discriminate_endianness_matrices(
    matrices: &[HypersparseMatrix],
    part: &RangePartition,
) -> Result<EndiannessReport> {
    let big = FocusTable::from_counts(counts_mapped(matrices, part, |a| a))?;
    let little = FocusTable::from_counts(counts_mapped(matrices, part, u32::swap_bytes))?;
    report(big, little, part)
}

fn report(big: FocusTable, little: FocusTable, part: &RangePartition) -> Result<EndiannessReport> {
    let expected = random_expectation(part);
    let score_big = focus_score(&big, &expected)?;
    let score_little = focus_score(&little, &expected)?;
    let verdict = if score_little > score_big {
        Endianness::Little
    } else {
        Endianness::Big
    };
    Ok(EndiannessReport {
        big,
        little,
        expected,
        score_big,
        score_little,
        verdict,
    })
}
