//! Glue between the stages: packet windows to matrix blobs, and a window
//! hierarchy to analysis rows.

use std::str::FromStr;

use rayon::prelude::*;

use crate::anon::{AddressMap, AnonTable, CryptoPan, Identity};
use crate::archive::analysis::{AnalysisRow, Value};
use crate::archive::{MatrixBlob, WindowMeta};
use crate::calibration::{fit_zipf_mandelbrot, DegreeHistogram};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyLevel;
use crate::hmatrix::HypersparseMatrix;
use crate::ingest::{PacketRecord, PacketWindow};
use crate::quantities::{compute_quantities, Quantity};
use crate::ranges::{discriminate_endianness_matrices, RangeId, RangePartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnonMode {
    #[default]
    Off,
    /// Encrypt both endpoints of every packet.
    Direct,
    /// Encrypt each distinct address of the window once, then look up.
    Table,
}

impl FromStr for AnonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(AnonMode::Off),
            "direct" => Ok(AnonMode::Direct),
            "table" => Ok(AnonMode::Table),
            _ => Err(Error::param(format!(
                "unknown anonymization mode `{s}` (off, direct, table)"
            ))),
        }
    }
}

pub fn build_matrix(records: &[PacketRecord], map: &dyn AddressMap) -> HypersparseMatrix {
    HypersparseMatrix::from_pairs(records.iter().map(|r| (map.map(r.src), map.map(r.dst))))
}

/// Builds one window matrix. `pan` is required unless `mode` is `Off`.
pub fn build_window(window: &PacketWindow, mode: AnonMode, pan: Option<&CryptoPan>) -> Result<MatrixBlob> {
    let matrix = match (mode, pan) {
        (AnonMode::Off, _) => build_matrix(&window.records, &Identity),
        (AnonMode::Direct, Some(pan)) => build_matrix(&window.records, pan),
        (AnonMode::Table, Some(pan)) => {
            let table = AnonTable::build(pan, window.records.iter().flat_map(|r| [r.src, r.dst]));
            build_matrix(&window.records, &table)
        }
        (_, None) => return Err(Error::param("anonymization requires a key")),
    };
    Ok(MatrixBlob {
        meta: WindowMeta {
            window_index: window.window_index,
            anonymized: mode != AnonMode::Off,
            partial: window.is_partial,
        },
        matrix,
    })
}

/// Windows built in parallel, returned in input order.
pub fn build_windows(windows: &[PacketWindow], mode: AnonMode, pan: Option<&CryptoPan>) -> Result<Vec<MatrixBlob>> {
    windows.par_iter().map(|w| build_window(w, mode, pan)).collect()
}

/// The sixteen range-pair blocks, indexed `[source range][destination range]`.
pub fn split_by_ranges(a: &HypersparseMatrix, part: &RangePartition) -> [[HypersparseMatrix; 4]; 4] {
    let mut cells: [[Vec<(u32, u32, u64)>; 4]; 4] = Default::default();
    for (i, cols, vals) in a.rows() {
        let ri = part.classify(i).index();
        for (&j, &v) in cols.iter().zip(vals) {
            cells[ri][part.classify(j).index()].push((i, j, v));
        }
    }
    cells.map(|row| row.map(HypersparseMatrix::from_sorted_cells))
}

fn row(
    window_nv: u64,
    window: Option<u64>,
    pair: Option<(RangeId, RangeId)>,
    quantity: impl Into<String>,
    value: Value,
) -> AnalysisRow {
    AnalysisRow {
        window_nv,
        window,
        src_range: pair.map(|p| p.0),
        dst_range: pair.map(|p| p.1),
        quantity: quantity.into(),
        value,
    }
}

fn pairs() -> impl Iterator<Item = (RangeId, RangeId)> {
    RangeId::ALL
        .into_iter()
        .flat_map(|a| RangeId::ALL.into_iter().map(move |b| (a, b)))
}

/// Analysis rows for a hierarchy:
///
/// * every quantity of every matrix, per range pair (`levels x 4 x 4`
///   sections, one row per window and quantity);
/// * per level and range pair, the log-binned link-degree histogram summed
///   over the level's windows and, where enough bins are occupied, its
///   Zipf-Mandelbrot fit;
/// * focus tables of the leaf level as stored and byte-swapped, the random
///   expectation and both scores.
pub fn analyze_hierarchy(levels: &[HierarchyLevel], part: &RangePartition) -> Result<Vec<AnalysisRow>> {
    let mut rows = Vec::new();
    for level in levels {
        let nv = level.window_packets;
        let blocks: Vec<[[HypersparseMatrix; 4]; 4]> =
            level.matrices.par_iter().map(|m| split_by_ranges(m, part)).collect();
        for (src, dst) in pairs() {
            let pair = Some((src, dst));
            for (w, b) in blocks.iter().enumerate() {
                let q = compute_quantities(&b[src.index()][dst.index()]);
                for quantity in Quantity::ALL {
                    rows.push(row(
                        nv,
                        Some(w as u64),
                        pair,
                        quantity.name(),
                        Value::Count(q.get(quantity)),
                    ));
                }
            }
        }
        for (src, dst) in pairs() {
            let pair = Some((src, dst));
            let mut h = DegreeHistogram::default().with_window(nv, pair);
            for b in &blocks {
                h.add_matrix(&b[src.index()][dst.index()]);
            }
            for (k, links, packets) in h.log_bins() {
                rows.push(row(nv, None, pair, format!("hist_links_b{k}"), Value::Count(links)));
                rows.push(row(nv, None, pair, format!("hist_packets_b{k}"), Value::Count(packets)));
            }
            match fit_zipf_mandelbrot(&h) {
                Ok(fit) => {
                    rows.push(row(nv, None, pair, "zm_delta", Value::Real(fit.delta)));
                    rows.push(row(nv, None, pair, "zm_alpha", Value::Real(fit.alpha)));
                    rows.push(row(nv, None, pair, "zm_dmax", Value::Count(fit.d_max)));
                    rows.push(row(nv, None, pair, "zm_fit_error", Value::Real(fit.fit_error)));
                }
                Err(Error::InsufficientData(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if let Some(leaves) = levels.first() {
        match discriminate_endianness_matrices(&leaves.matrices, part) {
            Ok(rep) => {
                let nv = leaves.window_packets;
                for (src, dst) in pairs() {
                    let pair = Some((src, dst));
                    for (name, t) in [
                        ("focus_big", &rep.big),
                        ("focus_little", &rep.little),
                        ("focus_expected", &rep.expected),
                    ] {
                        rows.push(row(nv, None, pair, name, Value::Real(t.get(src, dst))));
                    }
                }
                rows.push(row(nv, None, None, "focus_score_big", Value::Real(rep.score_big)));
                rows.push(row(nv, None, None, "focus_score_little", Value::Real(rep.score_little)));
            }
            Err(Error::EmptyTable) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anon::AnonKey;
    use crate::hierarchy::aggregate_hierarchy;
    use crate::ingest::{synth_traffic, window_packets, SynthSpec};

    #[test]
    fn split_matches_masks() {
        let part = RangePartition::example();
        let recs = synth_traffic(&SynthSpec::uniform(20_000, 4, &part), &part).unwrap();
        let a = build_matrix(&recs, &Identity);
        let blocks = split_by_ranges(&a, &part);
        for (s, d) in pairs() {
            assert_eq!(
                blocks[s.index()][d.index()],
                a.extract_subrange(part.mask(s), part.mask(d))
            );
        }
        assert_eq!(HypersparseMatrix::sum(blocks.iter().flatten()).unwrap(), a);
    }

    #[test]
    fn modes_agree() {
        let part = RangePartition::example();
        let recs = synth_traffic(&SynthSpec::gateway(4096, 2), &part).unwrap();
        let w = &window_packets(recs, 4096).unwrap()[0];
        let pan = CryptoPan::new(&AnonKey::from_bytes([7; 32]));
        let direct = build_window(w, AnonMode::Direct, Some(&pan)).unwrap();
        let table = build_window(w, AnonMode::Table, Some(&pan)).unwrap();
        assert_eq!(direct, table);
        assert!(direct.meta.anonymized);
        assert!(build_window(w, AnonMode::Table, None).is_err());
        assert!(!build_window(w, AnonMode::Off, None).unwrap().meta.anonymized);
    }

    #[test]
    fn analysis_sections() {
        let part = RangePartition::example();
        let recs = synth_traffic(&SynthSpec::gateway(1 << 14, 5), &part).unwrap();
        let wins = window_packets(recs, 1 << 12).unwrap();
        let leaves = build_windows(&wins, AnonMode::Off, None)
            .unwrap()
            .into_iter()
            .map(|b| b.matrix)
            .collect();
        let levels = aggregate_hierarchy(leaves, 2).unwrap();
        let rows = analyze_hierarchy(&levels, &part).unwrap();
        let table1: Vec<_> = rows
            .iter()
            .filter(|r| Quantity::from_name(&r.quantity).is_some())
            .collect();
        // (4 + 2 + 1) windows x 16 pairs x 9 quantities
        assert_eq!(table1.len(), 7 * 16 * 9);
        let valid: u64 = table1
            .iter()
            .filter(|r| r.window_nv == 1 << 14 && r.quantity == "valid_packets")
            .map(|r| r.value.as_f64() as u64)
            .sum();
        assert_eq!(valid, 1 << 14);
        assert!(rows.iter().any(|r| r.quantity == "focus_score_big"));
        assert_eq!(rows, analyze_hierarchy(&levels, &part).unwrap());
    }
}
