//! `HSTM` matrix blob, all integers little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "HSTM"
//!      4     2  format version (1)
//!      6     2  flags: bit 0 anonymized, bit 1 partial window
//!      8     8  window index
//!     16     8  packet total
//!     24     8  row count R
//!     32     8  nnz N
//!     40    4R  row ids (u32, strictly increasing)
//!      .  8R+8  row offsets (u64, R + 1 entries, first 0, last N)
//!      .    4N  column ids (u32, strictly increasing within a row)
//!      .    8N  values (u64, nonzero)
//! ```

use crate::error::{Error, Result};
use crate::hmatrix::HypersparseMatrix;

pub const MAGIC: &[u8; 4] = b"HSTM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 40;

const FLAG_ANONYMIZED: u16 = 1;
const FLAG_PARTIAL: u16 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WindowMeta {
    pub window_index: u64,
    pub anonymized: bool,
    pub partial: bool,
}

/// A window matrix together with the metadata stored in its blob.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatrixBlob {
    pub meta: WindowMeta,
    pub matrix: HypersparseMatrix,
}

impl MatrixBlob {
    pub fn new(window_index: u64, matrix: HypersparseMatrix) -> Self {
        MatrixBlob {
            meta: WindowMeta {
                window_index,
                ..Default::default()
            },
            matrix,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let m = &self.matrix;
        let (r, n) = (m.row_count(), m.nnz());
        let mut out = Vec::with_capacity(HEADER_LEN + 12 * r + 8 + 12 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let flags =
            if self.meta.anonymized { FLAG_ANONYMIZED } else { 0 } | if self.meta.partial { FLAG_PARTIAL } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        for v in [self.meta.window_index, m.packet_total(), r as u64, n as u64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        m.row_ids().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        m.row_offsets()
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        m.col_ids().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        m.values().iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(format!(
                "blob of {} bytes is shorter than its header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::format("bad blob magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::format(format!("unsupported blob version {version}")));
        }
        let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
        if flags & !(FLAG_ANONYMIZED | FLAG_PARTIAL) != 0 {
            return Err(Error::format(format!("unknown blob flags {flags:#06x}")));
        }
        let u64_at = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let (window_index, packet_total, r, n) = (u64_at(8), u64_at(16), u64_at(24), u64_at(32));
        let expected = r
            .checked_mul(12)
            .and_then(|x| x.checked_add(8))
            .and_then(|x| n.checked_mul(12).and_then(|y| x.checked_add(y)))
            .and_then(|x| x.checked_add(HEADER_LEN as u64));
        if expected != Some(bytes.len() as u64) {
            return Err(Error::format(format!(
                "declared {r} rows and {n} cells do not match blob length {}",
                bytes.len()
            )));
        }
        let (r, n) = (r as usize, n as usize);
        let mut off = HEADER_LEN;
        let mut take = |len: usize| {
            let s = &bytes[off..off + len];
            off += len;
            s
        };
        let u32s = |s: &[u8]| {
            s.chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<_>>()
        };
        let u64s = |s: &[u8]| {
            s.chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<_>>()
        };
        let rows = u32s(take(4 * r));
        let row_ptr = u64s(take(8 * (r + 1)));
        let cols = u32s(take(4 * n));
        let vals = u64s(take(8 * n));
        let matrix = HypersparseMatrix::from_dcsr(rows, row_ptr, cols, vals)?;
        if matrix.packet_total() != packet_total {
            return Err(Error::format(format!(
                "declared packet total {packet_total} but cells sum to {}",
                matrix.packet_total()
            )));
        }
        Ok(MatrixBlob {
            meta: WindowMeta {
                window_index,
                anonymized: flags & FLAG_ANONYMIZED != 0,
                partial: flags & FLAG_PARTIAL != 0,
            },
            matrix,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MatrixBlob {
        let mut b = MatrixBlob::new(7, HypersparseMatrix::from_pairs([(1, 2), (1, 2), (1, 3), (4, 2)]));
        b.meta.anonymized = true;
        b
    }

    #[test]
    fn layout() {
        let bytes = sample().encode();
        assert_eq!(&bytes[0..4], b"HSTM");
        assert_eq!(&bytes[4..8], &[1, 0, 1, 0]);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 7);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[32..40].try_into().unwrap()), 3);
        assert_eq!(&bytes[40..48], &[1, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(bytes.len(), 40 + 12 * 2 + 8 + 12 * 3);
    }

    #[test]
    fn round_trip_and_empty() {
        let b = sample();
        assert_eq!(MatrixBlob::decode(&b.encode()).unwrap(), b);
        let e = MatrixBlob::new(0, HypersparseMatrix::new());
        let decoded = MatrixBlob::decode(&e.encode()).unwrap();
        assert!(decoded.matrix.is_empty());
        assert_eq!(decoded, e);
    }

    #[test]
    fn corruption_detected() {
        let good = sample().encode();
        let mut bad = good.clone();
        bad[0] ^= 0xFF;
        assert!(MatrixBlob::decode(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(MatrixBlob::decode(&bad).is_err());
        let mut bad = good.clone();
        bad[32] = 4;
        assert!(MatrixBlob::decode(&bad).is_err());
        let mut bad = good.clone();
        bad[16] = 5;
        assert!(MatrixBlob::decode(&bad).is_err());
        assert!(MatrixBlob::decode(&good[..good.len() - 1]).is_err());
        assert!(MatrixBlob::decode(&good[..10]).is_err());
    }
}
