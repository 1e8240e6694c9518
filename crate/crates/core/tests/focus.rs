use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tmfocus::anon::Identity;
use tmfocus::ingest::{synth_traffic, window_packets, PacketRecord, SynthSpec};
use tmfocus::pipeline::{build_matrix, build_windows, AnonMode};
use tmfocus::ranges::{
    byteswap_view, discriminate_endianness, discriminate_endianness_matrices, focus_table, focus_table_from_records,
    random_expectation, Endianness, RangeId, RangePartition,
};

/// Endpoints drawn uniformly from the whole 32-bit space.
fn uniform_space(n: usize, seed: u64) -> Vec<PacketRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|ts| PacketRecord {
            src: rng.random(),
            dst: rng.random(),
            ts,
        })
        .collect()
}

#[test]
fn uniform_traffic_matches_expectation_within_three_sigma() {
    let part = RangePartition::example();
    let n = 1 << 20;
    let recs = uniform_space(n, 11);
    let t = focus_table_from_records(&recs, &part).unwrap();
    let e = random_expectation(&part);
    for a in RangeId::ALL {
        for b in RangeId::ALL {
            let p = e.get(a, b);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let dev = (t.get(a, b) - p).abs();
            assert!(dev <= 3.0 * sigma + 1e-12, "{a}->{b}: {} vs {p}", t.get(a, b));
        }
    }
}

#[test]
fn byte_swapping_uniform_traffic_changes_nothing_statistically() {
    let part = RangePartition::example();
    let rep = discriminate_endianness(&uniform_space(1 << 20, 12), &part).unwrap();
    assert!(
        rep.score_big < 0.01 && rep.score_little < 0.01,
        "{} {}",
        rep.score_big,
        rep.score_little
    );
}

#[test]
fn gateway_traffic_picks_the_stored_order() {
    let part = RangePartition::example();
    let recs = synth_traffic(&SynthSpec::gateway(1 << 18, 13), &part).unwrap();
    let rep = discriminate_endianness(&recs, &part).unwrap();
    assert_eq!(rep.verdict, Endianness::Big);
    assert_eq!(rep.verdict.label(), "big-endian");
    let swapped = discriminate_endianness(&byteswap_view(&recs), &part).unwrap();
    assert_eq!(swapped.verdict, Endianness::Little);
    assert!((swapped.score_little - rep.score_big).abs() < 1e-12);

    let blobs = build_windows(&window_packets(recs.clone(), 1 << 15).unwrap(), AnonMode::Off, None).unwrap();
    let matrices: Vec<_> = blobs.into_iter().map(|b| b.matrix).collect();
    let from_matrices = discriminate_endianness_matrices(&matrices, &part).unwrap();
    assert_eq!(from_matrices.big, rep.big);
    assert_eq!(from_matrices.little, rep.little);
}

#[test]
fn tables_from_records_and_matrices_agree() {
    let part = RangePartition::example();
    let recs = synth_traffic(&SynthSpec::uniform(50_000, 14, &part), &part).unwrap();
    let m = build_matrix(&recs, &Identity);
    assert_eq!(
        focus_table(&[m], &part).unwrap(),
        focus_table_from_records(&recs, &part).unwrap()
    );
    assert!(focus_table(&[], &part).is_err());
}
