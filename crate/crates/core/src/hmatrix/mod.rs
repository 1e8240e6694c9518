//! Hypersparse traffic matrices over the 2^32 x 2^32 IPv4 address space.
//!
//! Storage is doubly-compressed sparse rows (DCSR): only nonempty rows are
//! listed, each with an offset into the shared column/value arrays. A window
//! of 2^17 packets therefore costs O(nnz) memory regardless of the index
//! space.

mod mask;

pub use mask::RangeMask;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HypersparseMatrix {
    rows: Vec<u32>,
    /// `row_ptr[k]..row_ptr[k + 1]` indexes the cells of `rows[k]`.
    row_ptr: Vec<u64>,
    cols: Vec<u32>,
    vals: Vec<u64>,
    total: u64,
}

impl HypersparseMatrix {
    pub fn new() -> Self {
        HypersparseMatrix {
            row_ptr: vec![0],
            ..Default::default()
        }
    }

    /// Counts each `(src, dst)` pair. Sorts the packed pairs and run-length
    /// encodes them.
    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Self {
        let mut keys: Vec<u64> = pairs.into_iter().map(|(i, j)| (i as u64) << 32 | j as u64).collect();
        keys.sort_unstable();
        Self::from_sorted_keys(&keys)
    }

    fn from_sorted_keys(keys: &[u64]) -> Self {
        let mut m = HypersparseMatrix::new();
        let mut idx = 0;
        while idx < keys.len() {
            let key = keys[idx];
            let mut run = idx + 1;
            while run < keys.len() && keys[run] == key {
                run += 1;
            }
            m.push_cell((key >> 32) as u32, key as u32, (run - idx) as u64);
            idx = run;
        }
        m.total = keys.len() as u64;
        m
    }

    /// Builds a matrix from cells that are already in row-major order with
    /// strictly increasing coordinates and nonzero values.
    pub(crate) fn from_sorted_cells<I: IntoIterator<Item = (u32, u32, u64)>>(cells: I) -> Self {
        let mut m = HypersparseMatrix::new();
        for (i, j, v) in cells {
            m.push_cell(i, j, v);
            m.total += v;
        }
        m
    }

    /// Reassembles a matrix from raw DCSR arrays, validating every storage
    /// invariant.
    pub fn from_dcsr(rows: Vec<u32>, row_ptr: Vec<u64>, cols: Vec<u32>, vals: Vec<u64>) -> Result<Self> {
        if row_ptr.len() != rows.len() + 1 {
            return Err(Error::format("row offset count does not match row count"));
        }
        if cols.len() != vals.len() {
            return Err(Error::format("column and value arrays differ in length"));
        }
        if row_ptr[0] != 0 || *row_ptr.last().unwrap() != cols.len() as u64 {
            return Err(Error::format("row offsets do not span the cell arrays"));
        }
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("row indices not strictly increasing"));
        }
        for w in row_ptr.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::format("empty or reversed row segment"));
            }
            if cols[w[0] as usize..w[1] as usize].windows(2).any(|c| c[0] >= c[1]) {
                return Err(Error::format("column indices not strictly increasing"));
            }
        }
        if vals.contains(&0) {
            return Err(Error::format("explicit zero value"));
        }
        let total = vals
            .iter()
            .try_fold(0u64, |acc, &v| acc.checked_add(v))
            .ok_or_else(|| Error::format("packet total overflows"))?;
        Ok(HypersparseMatrix {
            rows,
            row_ptr,
            cols,
            vals,
            total,
        })
    }

    fn push_cell(&mut self, i: u32, j: u32, v: u64) {
        debug_assert!(v > 0);
        if self.rows.last() != Some(&i) {
            self.rows.push(i);
            self.row_ptr.push(self.cols.len() as u64);
        }
        self.cols.push(j);
        self.vals.push(v);
        *self.row_ptr.last_mut().unwrap() = self.cols.len() as u64;
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Sum of all entries.
    pub fn packet_total(&self) -> u64 {
        self.total
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row_ids(&self) -> &[u32] {
        &self.rows
    }

    pub fn row_offsets(&self) -> &[u64] {
        &self.row_ptr
    }

    pub fn col_ids(&self) -> &[u32] {
        &self.cols
    }

    pub fn values(&self) -> &[u64] {
        &self.vals
    }

    pub fn get(&self, i: u32, j: u32) -> u64 {
        let Ok(k) = self.rows.binary_search(&i) else {
            return 0;
        };
        let (lo, hi) = (self.row_ptr[k] as usize, self.row_ptr[k + 1] as usize);
        match self.cols[lo..hi].binary_search(&j) {
            Ok(c) => self.vals[lo + c],
            Err(_) => 0,
        }
    }

    /// Iterates nonempty rows as `(row, cols, values)`.
    pub fn rows(&self) -> impl Iterator<Item = (u32, &[u32], &[u64])> + '_ {
        self.rows.iter().enumerate().map(move |(k, &i)| {
            let (lo, hi) = (self.row_ptr[k] as usize, self.row_ptr[k + 1] as usize);
            (i, &self.cols[lo..hi], &self.vals[lo..hi])
        })
    }

    /// Iterates cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        self.rows()
            .flat_map(|(i, cs, vs)| cs.iter().zip(vs).map(move |(&j, &v)| (i, j, v)))
    }

    /// Cellwise sum.
    pub fn add(&self, other: &HypersparseMatrix) -> Result<HypersparseMatrix> {
        let mut out = HypersparseMatrix::new();
        out.rows.reserve(self.rows.len().max(other.rows.len()));
        out.cols.reserve(self.nnz().max(other.nnz()));
        out.vals.reserve(self.nnz().max(other.nnz()));
        let mut a = self.cells().peekable();
        let mut b = other.cells().peekable();
        loop {
            let cell = match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => a.next().unwrap(),
                (None, Some(_)) => b.next().unwrap(),
                (Some(&(ai, aj, av)), Some(&(bi, bj, bv))) => match (ai, aj).cmp(&(bi, bj)) {
                    std::cmp::Ordering::Less => a.next().unwrap(),
                    std::cmp::Ordering::Greater => b.next().unwrap(),
                    std::cmp::Ordering::Equal => {
                        a.next();
                        b.next();
                        let v = av
                            .checked_add(bv)
                            .ok_or_else(|| Error::Arithmetic(format!("cell ({ai},{aj}) overflows u64")))?;
                        (ai, aj, v)
                    }
                },
            };
            out.push_cell(cell.0, cell.1, cell.2);
        }
        out.total = self
            .total
            .checked_add(other.total)
            .ok_or_else(|| Error::Arithmetic("packet total overflows u64".into()))?;
        Ok(out)
    }

    /// Sums a sequence of matrices left to right.
    pub fn sum<'a, I: IntoIterator<Item = &'a HypersparseMatrix>>(ms: I) -> Result<HypersparseMatrix> {
        ms.into_iter().try_fold(HypersparseMatrix::new(), |acc, m| acc.add(m))
    }

    /// Keeps the cells whose row lies in `rows` and column in `cols`; the
    /// diagonal-mask triple product without materializing the diagonals.
    pub fn extract_subrange(&self, rows: &RangeMask, cols: &RangeMask) -> HypersparseMatrix {
        self.filter(|i, j| rows.contains(i) && cols.contains(j))
    }

    /// Removes the cells with both endpoints in `mask`, i.e. the difference
    /// between this matrix and its masked triple product.
    pub fn exclude_subrange(&self, mask: &RangeMask) -> HypersparseMatrix {
        self.filter(|i, j| !(mask.contains(i) && mask.contains(j)))
    }

    fn filter<F: Fn(u32, u32) -> bool>(&self, keep: F) -> HypersparseMatrix {
        HypersparseMatrix::from_sorted_cells(self.cells().filter(|&(i, j, _)| keep(i, j)))
    }
}
