//! Aggregate network quantities of a traffic matrix: packet, link, source
//! and destination counts with their maxima. Every quantity depends only on
//! the multiset of row/column sums and supports, so relabeling the address
//! space (anonymization) leaves them unchanged.

use serde::{Deserialize, Serialize};

use crate::hmatrix::HypersparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NetworkQuantities {
    pub valid_packets: u64,
    pub unique_links: u64,
    pub max_link_packets: u64,
    pub unique_sources: u64,
    pub max_source_packets: u64,
    pub max_source_fanout: u64,
    pub unique_destinations: u64,
    pub max_destination_packets: u64,
    pub max_destination_fanin: u64,
}

/// Identifies one scalar of [`NetworkQuantities`]; used as the `quantity`
/// column of analysis files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    ValidPackets,
    UniqueLinks,
    MaxLinkPackets,
    UniqueSources,
    MaxSourcePackets,
    MaxSourceFanout,
    UniqueDestinations,
    MaxDestinationPackets,
    MaxDestinationFanin,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::ValidPackets,
        Quantity::UniqueLinks,
        Quantity::MaxLinkPackets,
        Quantity::UniqueSources,
        Quantity::MaxSourcePackets,
        Quantity::MaxSourceFanout,
        Quantity::UniqueDestinations,
        Quantity::MaxDestinationPackets,
        Quantity::MaxDestinationFanin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::ValidPackets => "valid_packets",
            Quantity::UniqueLinks => "unique_links",
            Quantity::MaxLinkPackets => "max_link_packets",
            Quantity::UniqueSources => "unique_sources",
            Quantity::MaxSourcePackets => "max_source_packets",
            Quantity::MaxSourceFanout => "max_source_fanout",
            Quantity::UniqueDestinations => "unique_destinations",
            Quantity::MaxDestinationPackets => "max_destination_packets",
            Quantity::MaxDestinationFanin => "max_destination_fanin",
        }
    }

    pub fn from_name(s: &str) -> Option<Quantity> {
        Quantity::ALL.into_iter().find(|q| q.name() == s)
    }
}

impl NetworkQuantities {
    pub fn get(&self, q: Quantity) -> u64 {
        match q {
            Quantity::ValidPackets => self.valid_packets,
            Quantity::UniqueLinks => self.unique_links,
            Quantity::MaxLinkPackets => self.max_link_packets,
            Quantity::UniqueSources => self.unique_sources,
            Quantity::MaxSourcePackets => self.max_source_packets,
            Quantity::MaxSourceFanout => self.max_source_fanout,
            Quantity::UniqueDestinations => self.unique_destinations,
            Quantity::MaxDestinationPackets => self.max_destination_packets,
            Quantity::MaxDestinationFanin => self.max_destination_fanin,
        }
    }
}

/// Per-vertex sums, sparse and sorted by address.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VertexVectors {
    pub source_packets: Vec<(u32, u64)>,
    pub source_fanout: Vec<(u32, u64)>,
    pub destination_packets: Vec<(u32, u64)>,
    pub destination_fanin: Vec<(u32, u64)>,
}

pub fn compute_quantities(a: &HypersparseMatrix) -> NetworkQuantities {
    let mut q = NetworkQuantities {
        valid_packets: a.packet_total(),
        unique_links: a.nnz() as u64,
        max_link_packets: a.values().iter().copied().max().unwrap_or(0),
        unique_sources: a.row_count() as u64,
        ..Default::default()
    };
    for (_, cols, vals) in a.rows() {
        q.max_source_packets = q.max_source_packets.max(vals.iter().sum());
        q.max_source_fanout = q.max_source_fanout.max(cols.len() as u64);
    }
    for (_, packets, fanin) in column_sums(a) {
        q.unique_destinations += 1;
        q.max_destination_packets = q.max_destination_packets.max(packets);
        q.max_destination_fanin = q.max_destination_fanin.max(fanin);
    }
    q
}

pub fn vertex_vectors(a: &HypersparseMatrix) -> VertexVectors {
    let mut v = VertexVectors::default();
    for (i, cols, vals) in a.rows() {
        v.source_packets.push((i, vals.iter().sum()));
        v.source_fanout.push((i, cols.len() as u64));
    }
    for (j, packets, fanin) in column_sums(a) {
        v.destination_packets.push((j, packets));
        v.destination_fanin.push((j, fanin));
    }
    v
}

/// `(column, packet sum, nonzero count)` per nonempty column, ascending.
fn column_sums(a: &HypersparseMatrix) -> Vec<(u32, u64, u64)> {
    let mut cells: Vec<(u32, u64)> = a.col_ids().iter().copied().zip(a.values().iter().copied()).collect();
    cells.sort_unstable_by_key(|c| c.0);
    let mut out: Vec<(u32, u64, u64)> = Vec::new();
    for (j, v) in cells {
        match out.last_mut() {
            Some(last) if last.0 == j => {
                last.1 += v;
                last.2 += 1;
            }
            _ => out.push((j, v, 1)),
        }
    }
    out
}
