//! Binary multi-temporal aggregation: level `L` holds the sums of adjacent
//! pairs from level `L - 1`, so each matrix at level `L` spans
//! `N_V * 2^L` packets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hmatrix::HypersparseMatrix;

/// Level count matching leaf windows of 2^17 packets up to 2^27.
pub const DEFAULT_LEVELS: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyLevel {
    pub level: usize,
    pub matrices: Vec<HypersparseMatrix>,
    /// Packets per matrix at this level.
    pub window_packets: u64,
    /// True when the previous level had an odd matrix out that was not
    /// carried into this one.
    pub dropped_tail: bool,
}

pub fn aggregate_hierarchy(leaves: Vec<HypersparseMatrix>, max_level: usize) -> Result<Vec<HierarchyLevel>> {
    if leaves.is_empty() {
        return Ok(Vec::new());
    }
    let n_v = leaves[0].packet_total();
    if let Some((k, m)) = leaves.iter().enumerate().find(|(_, m)| m.packet_total() != n_v) {
        return Err(Error::param(format!(
            "leaf {k} holds {} packets, expected {n_v}",
            m.packet_total()
        )));
    }
    let deepest = leaves.len().ilog2() as usize;
    if max_level > deepest {
        return Err(Error::param(format!(
            "max level {max_level} needs {} leaves, got {}",
            1usize << max_level,
            leaves.len()
        )));
    }

    let mut levels = vec![HierarchyLevel {
        level: 0,
        matrices: leaves,
        window_packets: n_v,
        dropped_tail: false,
    }];
    for level in 1..=max_level {
        let prev = &levels[level - 1];
        let matrices = prev
            .matrices
            .par_chunks_exact(2)
            .map(|pair| pair[0].add(&pair[1]))
            .collect::<Result<Vec<_>>>()?;
        levels.push(HierarchyLevel {
            level,
            matrices,
            window_packets: n_v << level,
            dropped_tail: prev.matrices.len() % 2 == 1,
        });
    }
    Ok(levels)
}
