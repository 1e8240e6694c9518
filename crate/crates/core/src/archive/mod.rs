//! On-disk formats: TAR archives of zstd-compressed `HSTM` blobs (64
//! windows per archive) and the consolidated analysis file.
//!
//! Archives are byte-for-byte deterministic: fixed compression level,
//! zeroed TAR timestamps and ownership, member order equal to window order.

pub mod analysis;
mod blob;

pub use blob::{MatrixBlob, WindowMeta, HEADER_LEN as BLOB_HEADER_LEN, MAGIC as BLOB_MAGIC};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const WINDOWS_PER_ARCHIVE: usize = 64;
pub const ZSTD_LEVEL: i32 = 19;
pub const MEMBER_SUFFIX: &str = ".hstm.zst";

pub fn member_name(window_index: u64) -> String {
    format!("w{window_index}{MEMBER_SUFFIX}")
}

pub(crate) fn zstd_compress(data: &[u8], level: i32) -> Result<Vec<u8>> {
    let mut enc = zstd::stream::Encoder::new(Vec::new(), level)?;
    enc.include_checksum(true)?;
    enc.include_contentsize(true)?;
    enc.set_pledged_src_size(Some(data.len() as u64))?;
    enc.write_all(data)?;
    Ok(enc.finish()?)
}

pub fn compress_blob(blob: &MatrixBlob) -> Result<Vec<u8>> {
    zstd_compress(&blob.encode(), ZSTD_LEVEL)
}

/// Writes the archive to any sink. `allow_partial` permits fewer than 64
/// windows (the final archive of a stream).
pub fn write_archive_to<W: Write>(out: W, blobs: &[MatrixBlob], allow_partial: bool) -> Result<W> {
    let n = blobs.len();
    if n > WINDOWS_PER_ARCHIVE || (n < WINDOWS_PER_ARCHIVE && !allow_partial) || n == 0 {
        return Err(Error::param(format!(
            "archive needs exactly {WINDOWS_PER_ARCHIVE} windows{}, got {n}",
            if allow_partial {
                " or a nonempty final batch"
            } else {
                ""
            }
        )));
    }
    if blobs
        .windows(2)
        .any(|w| w[0].meta.window_index >= w[1].meta.window_index)
    {
        return Err(Error::param("window indices must increase through the archive"));
    }
    let compressed: Vec<Vec<u8>> = blobs.par_iter().map(compress_blob).collect::<Result<_>>()?;
    let mut builder = tar::Builder::new(out);
    builder.mode(tar::HeaderMode::Deterministic);
    for (blob, data) in blobs.iter().zip(&compressed) {
        let mut header = tar::Header::new_ustar();
        header.set_size(data.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        header.set_entry_type(tar::EntryType::Regular);
        builder.append_data(&mut header, member_name(blob.meta.window_index), &data[..])?;
    }
    Ok(builder.into_inner()?)
}

pub fn write_archive(blobs: &[MatrixBlob], path: &Path, allow_partial: bool) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_archive_to(file, blobs, allow_partial)?
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .sync_all()?;
    Ok(())
}

pub fn read_archive_from<R: Read>(input: R) -> Result<Vec<MatrixBlob>> {
    let mut archive = tar::Archive::new(input);
    let mut out = Vec::new();
    for entry in archive.entries()? {
        let mut entry = entry?;
        let name = entry.path()?.to_string_lossy().into_owned();
        if !entry.header().entry_type().is_file() {
            continue;
        }
        if !name.ends_with(MEMBER_SUFFIX) {
            return Err(Error::member(&name, "unknown codec (expected .hstm.zst)"));
        }
        let mut compressed = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut compressed)?;
        let raw = zstd::stream::decode_all(&compressed[..]).map_err(|e| Error::member(&name, format!("zstd: {e}")))?;
        let blob = MatrixBlob::decode(&raw).map_err(|e| Error::member(&name, e.to_string()))?;
        if name != member_name(blob.meta.window_index) {
            return Err(Error::member(
                &name,
                format!("member name disagrees with window index {}", blob.meta.window_index),
            ));
        }
        out.push(blob);
    }
    Ok(out)
}

pub fn read_archive(path: &Path) -> Result<Vec<MatrixBlob>> {
    read_archive_from(BufReader::new(File::open(path)?))
}

/// Member names in archive order.
pub fn list_members(path: &Path) -> Result<Vec<String>> {
    let mut archive = tar::Archive::new(BufReader::new(File::open(path)?));
    archive
        .entries()?
        .map(|e| Ok(e?.path()?.to_string_lossy().into_owned()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmatrix::HypersparseMatrix;

    fn blobs(n: u64) -> Vec<MatrixBlob> {
        (0..n)
            .map(|w| {
                MatrixBlob::new(
                    100 + w,
                    HypersparseMatrix::from_pairs((0..50u32).map(|k| (k % 7 + w as u32, k % 11))),
                )
            })
            .collect()
    }

    #[test]
    fn count_rules() {
        assert!(write_archive_to(Vec::new(), &blobs(63), false).is_err());
        assert!(write_archive_to(Vec::new(), &blobs(63), true).is_ok());
        assert!(write_archive_to(Vec::new(), &blobs(64), false).is_ok());
        assert!(write_archive_to(Vec::new(), &blobs(65), true).is_err());
        assert!(write_archive_to(Vec::new(), &[], true).is_err());
    }

    #[test]
    fn round_trip_in_memory() {
        let bs = blobs(64);
        let bytes = write_archive_to(Vec::new(), &bs, false).unwrap();
        assert_eq!(read_archive_from(&bytes[..]).unwrap(), bs);
        assert_eq!(bytes, write_archive_to(Vec::new(), &bs, false).unwrap());
    }

    #[test]
    fn unknown_codec_rejected() {
        let mut builder = tar::Builder::new(Vec::new());
        let mut h = tar::Header::new_ustar();
        h.set_size(3);
        h.set_cksum();
        builder.append_data(&mut h, "w0.hstm.gz", &b"abc"[..]).unwrap();
        let bytes = builder.into_inner().unwrap();
        let err = read_archive_from(&bytes[..]).unwrap_err();
        assert!(err.to_string().contains("w0.hstm.gz"), "{err}");
    }
}
