//! Consolidated analysis results.
//!
//! Every record is one row `window_nv, window, src_range, dst_range,
//! quantity, value`:
//!
//! * `window_nv` packets per matrix (0 for rows not tied to a window size),
//! * `window` index of the matrix within its hierarchy level, or `all` for
//!   rows summarizing a whole level,
//! * `src_range` / `dst_range` a range name or `all`,
//! * `quantity` a network quantity name (`valid_packets`, ...), a histogram
//!   bin (`hist_links_b<k>`, `hist_packets_b<k>`), a fit parameter
//!   (`zm_delta`, `zm_alpha`, `zm_dmax`, `zm_fit_error`) or a focus entry
//!   (`focus_big`, `focus_little`, `focus_expected`, `focus_score_big`,
//!   `focus_score_little`),
//! * `value` an unsigned integer, or a real written with a decimal point or
//!   exponent.
//!
//! Two encodings carry the same rows: CSV with that header, and a compact
//! binary form (`HSTA` magic, u16 version, then a zstd frame holding the
//! rows column by column).

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranges::RangeId;

pub const CSV_HEADER: &str = "window_nv,window,src_range,dst_range,quantity,value";
pub const BINARY_MAGIC: &[u8; 4] = b"HSTA";
const BINARY_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Count(u64),
    Real(f64),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Count(c) => c as f64,
            Value::Real(r) => r,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Count(c) => write!(f, "{c}"),
            // Debug formatting is the shortest round-tripping form and always
            // carries a `.` or exponent.
            Value::Real(r) => write!(f, "{r:?}"),
        }
    }
}

impl std::str::FromStr for Value {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(c) = s.parse::<u64>() {
            return Ok(Value::Count(c));
        }
        s.parse::<f64>()
            .map(Value::Real)
            .map_err(|_| Error::format(format!("bad value `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub window_nv: u64,
    pub window: Option<u64>,
    pub src_range: Option<RangeId>,
    pub dst_range: Option<RangeId>,
    pub quantity: String,
    pub value: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisFormat {
    Csv,
    Binary,
}

impl AnalysisFormat {
    /// `.csv` selects CSV; anything else the binary form.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => AnalysisFormat::Csv,
            _ => AnalysisFormat::Binary,
        }
    }
}

fn range_label(r: Option<RangeId>) -> &'static str {
    r.map_or("all", RangeId::name)
}

fn parse_range(s: &str) -> Result<Option<RangeId>> {
    if s == "all" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

pub fn to_csv(rows: &[AnalysisRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let window = r.window.map_or_else(|| "all".to_string(), |w| w.to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.window_nv,
            window,
            range_label(r.src_range),
            range_label(r.dst_range),
            r.quantity,
            r.value
        ));
    }
    s
}

pub fn from_csv(text: &str) -> Result<Vec<AnalysisRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::format("analysis CSV header missing"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::format(format!("analysis CSV line {}: expected 6 fields", k + 2)));
            }
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| Error::format(format!("line {}: bad integer `{s}`", k + 2)))
            };
            Ok(AnalysisRow {
                window_nv: int(f[0])?,
                window: if f[1] == "all" { None } else { Some(int(f[1])?) },
                src_range: parse_range(f[2])?,
                dst_range: parse_range(f[3])?,
                quantity: f[4].to_string(),
                value: f[5].parse()?,
            })
        })
        .collect()
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push(v as u8 | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn byte(&mut self) -> Result<u8> {
        let b = *self
            .buf
            .get(self.pos)
            .ok_or_else(|| Error::format("analysis file truncated"))?;
        self.pos += 1;
        Ok(b)
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.byte()?;
            v |= ((b & 0x7F) as u64) << shift;
            if b < 0x80 {
                return Ok(v);
            }
        }
        Err(Error::format("varint too long"))
    }

    fn bytes(&mut self, n: usize) -> Result<&[u8]> {
        let s = self
            .buf
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::format("analysis file truncated"))?;
        self.pos += n;
        Ok(s)
    }
}

fn range_code(r: Option<RangeId>) -> u8 {
    r.map_or(0xFF, |r| r.index() as u8)
}

fn range_from_code(c: u8) -> Result<Option<RangeId>> {
    match c {
        0xFF => Ok(None),
        c if (c as usize) < 4 => Ok(Some(RangeId::ALL[c as usize])),
        c => Err(Error::format(format!("bad range code {c}"))),
    }
}

pub fn to_binary(rows: &[AnalysisRow]) -> Result<Vec<u8>> {
    let mut dict: Vec<&str> = Vec::new();
    let mut dict_index: HashMap<&str, u64> = HashMap::new();
    let quantity_ids: Vec<u64> = rows
        .iter()
        .map(|r| {
            *dict_index.entry(r.quantity.as_str()).or_insert_with(|| {
                dict.push(r.quantity.as_str());
                dict.len() as u64 - 1
            })
        })
        .collect();

    let mut p = Vec::new();
    put_varint(&mut p, rows.len() as u64);
    put_varint(&mut p, dict.len() as u64);
    for q in &dict {
        put_varint(&mut p, q.len() as u64);
        p.extend_from_slice(q.as_bytes());
    }
    rows.iter().for_each(|r| put_varint(&mut p, r.window_nv));
    // 0 encodes `all`, otherwise index + 1.
    rows.iter()
        .for_each(|r| put_varint(&mut p, r.window.map_or(0, |w| w + 1)));
    rows.iter().for_each(|r| p.push(range_code(r.src_range)));
    rows.iter().for_each(|r| p.push(range_code(r.dst_range)));
    quantity_ids.iter().for_each(|&q| put_varint(&mut p, q));
    rows.iter()
        .for_each(|r| p.push(matches!(r.value, Value::Real(_)) as u8));
    for r in rows {
        match r.value {
            Value::Count(c) => put_varint(&mut p, c),
            Value::Real(x) => p.extend_from_slice(&x.to_le_bytes()),
        }
    }

    let mut out = Vec::with_capacity(p.len() / 4 + 8);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&super::zstd_compress(&p, super::ZSTD_LEVEL)?);
    Ok(out)
}

pub fn from_binary(bytes: &[u8]) -> Result<Vec<AnalysisRow>> {
    if bytes.len() < 6 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::format("bad analysis file magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != BINARY_VERSION {
        return Err(Error::format(format!("unsupported analysis version {version}")));
    }
    let payload = zstd::stream::decode_all(&bytes[6..]).map_err(|e| Error::format(format!("analysis zstd: {e}")))?;
    let mut c = Cursor { buf: &payload, pos: 0 };
    let n = c.varint()? as usize;
    if n > payload.len() {
        return Err(Error::format("row count exceeds payload"));
    }
    let nd = c.varint()? as usize;
    let mut dict = Vec::with_capacity(nd.min(payload.len()));
    for _ in 0..nd {
        let len = c.varint()? as usize;
        let s = std::str::from_utf8(c.bytes(len)?).map_err(|_| Error::format("quantity name is not UTF-8"))?;
        dict.push(s.to_string());
    }
    let window_nv = (0..n).map(|_| c.varint()).collect::<Result<Vec<_>>>()?;
    let window = (0..n).map(|_| c.varint()).collect::<Result<Vec<_>>>()?;
    let src = (0..n)
        .map(|_| c.byte().and_then(range_from_code))
        .collect::<Result<Vec<_>>>()?;
    let dst = (0..n)
        .map(|_| c.byte().and_then(range_from_code))
        .collect::<Result<Vec<_>>>()?;
    let qid = (0..n).map(|_| c.varint()).collect::<Result<Vec<_>>>()?;
    let tags = (0..n).map(|_| c.byte()).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let value = match tags[k] {
            0 => Value::Count(c.varint()?),
            1 => Value::Real(f64::from_le_bytes(c.bytes(8)?.try_into().unwrap())),
            t => return Err(Error::format(format!("bad value tag {t}"))),
        };
        let quantity = dict
            .get(qid[k] as usize)
            .ok_or_else(|| Error::format("quantity index out of range"))?
            .clone();
        rows.push(AnalysisRow {
            window_nv: window_nv[k],
            window: window[k].checked_sub(1),
            src_range: src[k],
            dst_range: dst[k],
            quantity,
            value,
        });
    }
    if c.pos != payload.len() {
        return Err(Error::format("trailing bytes in analysis file"));
    }
    Ok(rows)
}

pub fn write_analysis(rows: &[AnalysisRow], path: &Path, format: AnalysisFormat) -> Result<()> {
    let bytes = match format {
        AnalysisFormat::Csv => to_csv(rows).into_bytes(),
        AnalysisFormat::Binary => to_binary(rows)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads either encoding, detected from the leading bytes.
pub fn read_analysis(path: &Path) -> Result<Vec<AnalysisRow>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        from_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::format("analysis CSV is not UTF-8"))?;
        from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row_strategy() -> impl Strategy<Value = AnalysisRow> {
        let range = prop::option::of(prop::sample::select(RangeId::ALL.to_vec()));
        let value = prop_oneof![
            any::<u64>().prop_map(Value::Count),
            any::<f64>()
                .prop_filter("finite", |x| x.is_finite())
                .prop_map(Value::Real),
        ];
        (
            any::<u64>(),
            prop::option::of(0u64..u64::MAX),
            range.clone(),
            range,
            "[a-z_0-9]{1,24}",
            value,
        )
            .prop_map(
                |(window_nv, window, src_range, dst_range, quantity, value)| AnalysisRow {
                    window_nv,
                    window,
                    src_range,
                    dst_range,
                    quantity,
                    value,
                },
            )
    }

    #[test]
    fn empty_files_are_valid() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert!(from_csv(&to_csv(&[])).unwrap().is_empty());
        assert!(from_binary(&to_binary(&[]).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn real_values_keep_their_type() {
        assert_eq!(Value::Real(1.0).to_string(), "1.0");
        assert_eq!("1.0".parse::<Value>().unwrap(), Value::Real(1.0));
        assert_eq!("7".parse::<Value>().unwrap(), Value::Count(7));
        assert_eq!("1e-7".parse::<Value>().unwrap(), Value::Real(1e-7));
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_csv("nope\n").is_err());
        assert!(from_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(from_binary(b"HSTA\x01\x00garbage").is_err());
        assert!(from_binary(b"XXXX").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn both_encodings_round_trip(rows in prop::collection::vec(row_strategy(), 100)) {
            prop_assert_eq!(&from_csv(&to_csv(&rows)).unwrap(), &rows);
            prop_assert_eq!(&from_binary(&to_binary(&rows).unwrap()).unwrap(), &rows);
        }
    }
}
