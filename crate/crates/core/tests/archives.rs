use std::fs;

use proptest::prelude::*;

use tmfocus::archive::analysis::{read_analysis, write_analysis, AnalysisFormat, AnalysisRow, Value};
use tmfocus::archive::{list_members, read_archive, write_archive, MatrixBlob, BLOB_HEADER_LEN};
use tmfocus::ranges::RangeId;
use tmfocus::{Error, HypersparseMatrix};

fn blobs(start: u64, n: u64) -> Vec<MatrixBlob> {
    (start..start + n)
        .map(|w| {
            let pairs = (0..200u32).map(move |k| (k.wrapping_mul(40_503) ^ w as u32, k % 17));
            MatrixBlob::new(w, HypersparseMatrix::from_pairs(pairs))
        })
        .collect()
}

#[test]
fn files_round_trip_and_list_member_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.tar");
    let bs = blobs(0, 64);
    write_archive(&bs, &path, false).unwrap();
    assert_eq!(read_archive(&path).unwrap(), bs);
    let names = list_members(&path).unwrap();
    let expected: Vec<String> = (0..64).map(|w| format!("w{w}.hstm.zst")).collect();
    assert_eq!(names, expected);

    // Independent TAR reader: member sizes and order.
    let mut ar = tar::Archive::new(fs::File::open(&path).unwrap());
    let listed: Vec<String> = ar
        .entries()
        .unwrap()
        .map(|e| e.unwrap().path().unwrap().display().to_string())
        .collect();
    assert_eq!(listed, expected);
}

#[test]
fn concatenated_archives_restore_the_stream() {
    let dir = tempfile::tempdir().unwrap();
    let all = blobs(0, 100);
    let (a, b) = all.split_at(64);
    let (pa, pb) = (
        dir.path().join("archive-00000.tar"),
        dir.path().join("archive-00001.tar"),
    );
    write_archive(a, &pa, false).unwrap();
    assert!(write_archive(b, &pb, false).is_err());
    write_archive(b, &pb, true).unwrap();
    let restored: Vec<MatrixBlob> = [pa, pb].iter().flat_map(|p| read_archive(p).unwrap()).collect();
    assert_eq!(restored, all);
}

#[test]
fn flipped_header_byte_names_the_member() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.tar");
    let mut bs = blobs(0, 64);
    write_archive(&bs, &path, false).unwrap();

    // Rebuild member 5 with a corrupted blob header.
    let mut raw = bs[5].encode();
    raw[2] ^= 0x01;
    let mut builder = tar::Builder::new(Vec::new());
    for (k, b) in bs.iter_mut().enumerate() {
        let data = if k == 5 {
            zstd::encode_all(&raw[..], 3).unwrap()
        } else {
            tmfocus::archive::compress_blob(b).unwrap()
        };
        let mut h = tar::Header::new_ustar();
        h.set_size(data.len() as u64);
        h.set_mode(0o644);
        h.set_cksum();
        builder
            .append_data(&mut h, format!("w{k}.hstm.zst"), &data[..])
            .unwrap();
    }
    fs::write(&path, builder.into_inner().unwrap()).unwrap();
    match read_archive(&path) {
        Err(e @ Error::Member { .. }) => assert!(e.to_string().contains("w5.hstm.zst"), "{e}"),
        other => panic!("expected a member error, got {other:?}"),
    }
}

#[test]
fn truncated_compressed_member_is_rejected() {
    let data = tmfocus::archive::compress_blob(&blobs(3, 1)[0]).unwrap();
    let mut builder = tar::Builder::new(Vec::new());
    let cut = &data[..data.len() / 2];
    let mut h = tar::Header::new_ustar();
    h.set_size(cut.len() as u64);
    h.set_cksum();
    builder.append_data(&mut h, "w3.hstm.zst", cut).unwrap();
    let bytes = builder.into_inner().unwrap();
    let err = tmfocus::archive::read_archive_from(&bytes[..]).unwrap_err();
    assert!(err.to_string().contains("w3.hstm.zst"));
}

#[test]
fn deterministic_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("1.tar"), dir.path().join("2.tar"));
    write_archive(&blobs(64, 64), &p1, false).unwrap();
    write_archive(&blobs(64, 64), &p2, false).unwrap();
    assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
}

#[test]
fn blob_header_is_forty_bytes() {
    assert_eq!(BLOB_HEADER_LEN, 40);
    assert_eq!(MatrixBlob::new(0, HypersparseMatrix::new()).encode().len(), 48);
}

#[test]
fn analysis_files_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        AnalysisRow {
            window_nv: 1 << 17,
            window: Some(0),
            src_range: Some(RangeId::Assigned),
            dst_range: Some(RangeId::Other),
            quantity: "valid_packets".into(),
            value: Value::Count(98_304),
        },
        AnalysisRow {
            window_nv: 1 << 18,
            window: None,
            src_range: None,
            dst_range: None,
            quantity: "zm_alpha".into(),
            value: Value::Real(2.0),
        },
    ];
    for (name, fmt) in [("a.csv", AnalysisFormat::Csv), ("a.hsta", AnalysisFormat::Binary)] {
        let p = dir.path().join(name);
        assert_eq!(AnalysisFormat::from_path(&p), fmt);
        write_analysis(&rows, &p, fmt).unwrap();
        assert_eq!(read_analysis(&p).unwrap(), rows);
        write_analysis(&[], &p, fmt).unwrap();
        assert!(read_analysis(&p).unwrap().is_empty());
    }
    let p = dir.path().join("a.csv");
    write_analysis(&rows, &p, AnalysisFormat::Csv).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(
        text,
        "window_nv,window,src_range,dst_range,quantity,value\n\
         131072,0,assigned,other,valid_packets,98304\n\
         262144,all,all,all,zm_alpha,2.0\n"
    );
}

fn matrix() -> impl Strategy<Value = HypersparseMatrix> {
    prop::collection::vec((any::<u32>(), any::<u32>(), 1u64..1_000_000), 0..300).prop_map(|cells| {
        let mut m = HypersparseMatrix::new();
        for (i, j, v) in cells {
            let one = HypersparseMatrix::from_dcsr(vec![i], vec![0, 1], vec![j], vec![v]).unwrap();
            m = m.add(&one).unwrap();
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn blob_round_trip(m in matrix(), w in any::<u64>(), anonymized in any::<bool>(), partial in any::<bool>()) {
        let mut b = MatrixBlob::new(w, m);
        b.meta.anonymized = anonymized;
        b.meta.partial = partial;
        prop_assert_eq!(MatrixBlob::decode(&b.encode()).unwrap(), b);
    }
}
