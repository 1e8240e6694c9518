use std::collections::BTreeMap;

use tmfocus::anon::Identity;
use tmfocus::ingest::{synth_traffic, SynthSpec};
use tmfocus::pipeline::build_matrix;
use tmfocus::ranges::{RangeId, RangePartition};

/// Least-squares slope of log10(links) against log10(d) over the head of
/// the histogram, where every `d` is well populated.
fn head_slope(hist: &BTreeMap<u64, u64>, d_hi: u64) -> f64 {
    let pts: Vec<(f64, f64)> = hist
        .range(1..=d_hi)
        .map(|(&d, &c)| ((d as f64).log10(), (c as f64).log10()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn link_degrees_follow_the_power_law() {
    let part = RangePartition::example();
    let recs = synth_traffic(&SynthSpec::gateway(1 << 20, 17), &part).unwrap();
    assert_eq!(recs.len(), 1 << 20);
    let m = build_matrix(&recs, &Identity);
    let mut hist = BTreeMap::new();
    for &v in m.values() {
        *hist.entry(v).or_insert(0u64) += 1;
    }
    let slope = head_slope(&hist, 16);
    assert!((slope + 2.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn gateway_mix_proportions() {
    let part = RangePartition::example();
    let recs = synth_traffic(&SynthSpec::gateway(1 << 18, 5), &part).unwrap();
    let mut counts = [[0u64; 4]; 4];
    for r in &recs {
        counts[part.classify(r.src).index()][part.classify(r.dst).index()] += 1;
    }
    let n = recs.len() as f64;
    let f = |a: RangeId, b: RangeId| counts[a.index()][b.index()] as f64 / n;
    // Heavy-tail link sizes make packet shares noisy; links are drawn at
    // the stated mix.
    assert!(f(RangeId::Assigned, RangeId::Other) + f(RangeId::Other, RangeId::Assigned) > 0.7);
    assert!(f(RangeId::Other, RangeId::Other) < 0.3);
}

#[test]
fn timestamps_increase() {
    let part = RangePartition::example();
    let recs = synth_traffic(&SynthSpec::uniform(10_000, 3, &part), &part).unwrap();
    assert!(recs.windows(2).all(|w| w[0].ts < w[1].ts));
}
