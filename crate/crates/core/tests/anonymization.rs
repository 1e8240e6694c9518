use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tmfocus::anon::{anonymize_address, anonymize_prefix, build_anon_table, AnonKey, CryptoPan};
use tmfocus::cidr::Prefix;
use tmfocus::ingest::{synth_traffic, window_packets, SynthSpec};
use tmfocus::pipeline::{build_window, AnonMode};
use tmfocus::ranges::RangePartition;

fn key(seed: u64) -> AnonKey {
    let mut k = [0u8; 32];
    ChaCha8Rng::seed_from_u64(seed).fill(&mut k);
    AnonKey::from_bytes(k)
}

#[test]
fn injective_on_random_addresses() {
    let k = key(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inputs: HashSet<u32> = (0..10_000).map(|_| rng.random()).collect();
    let outputs: HashSet<u32> = inputs.iter().map(|&a| anonymize_address(&k, a)).collect();
    assert_eq!(inputs.len(), outputs.len());
}

#[test]
fn prefix_maps_to_the_image_of_its_members() {
    let k = key(3);
    let pan = CryptoPan::new(&k);
    let p = anonymize_prefix(&k, 0x0A00_0000, 8).unwrap();
    assert_eq!(p.len(), 8);
    assert_eq!(p, pan.anonymize_prefix("10.0.0.0/8".parse::<Prefix>().unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20_000 {
        let a = 0x0A00_0000 | (rng.random::<u32>() & 0x00FF_FFFF);
        assert!(p.contains(pan.anonymize(a)));
    }
    assert!(anonymize_prefix(&k, 0x0A00_0000, 33).is_err());
    assert_eq!(anonymize_prefix(&k, 0x1234_5678, 0).unwrap(), Prefix::whole_space());
}

#[test]
fn table_mode_equals_direct_mode_on_a_window() {
    let part = RangePartition::example();
    let recs = synth_traffic(&SynthSpec::gateway(1 << 16, 8), &part).unwrap();
    let w = &window_packets(recs.clone(), 1 << 16).unwrap()[0];
    let k = key(5);
    let pan = CryptoPan::new(&k);
    let direct = build_window(w, AnonMode::Direct, Some(&pan)).unwrap();
    let table = build_window(w, AnonMode::Table, Some(&pan)).unwrap();
    assert_eq!(direct.matrix, table.matrix);
    let t = build_anon_table(&k, recs.iter().flat_map(|r| [r.src, r.dst]));
    for (raw, anon) in t.iter() {
        assert_eq!(anon, pan.anonymize(raw));
    }
}

#[test]
fn anonymized_partition_classifies_consistently() {
    let part = RangePartition::example();
    let pan = CryptoPan::new(&key(6));
    let anon = part.anonymized(&pan).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20_000 {
        let a: u32 = rng.random();
        assert_eq!(part.classify(a), anon.classify(pan.anonymize(a)));
    }
}

#[test]
fn key_is_never_printed() {
    let mut raw = [0u8; 32];
    ChaCha8Rng::seed_from_u64(9).fill(&mut raw);
    let k = AnonKey::from_bytes(raw);
    let shown = format!("{k:?} {:?}", CryptoPan::new(&k));
    let hex: String = raw.iter().map(|b| format!("{b:02x}")).collect();
    assert!(!shown.contains(&hex[..8]), "{shown}");
    assert!(!shown.contains(&format!("{}, {}", raw[0], raw[1])), "{shown}");
}
