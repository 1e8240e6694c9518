use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PacketRecord;
use crate::calibration::ZipfMandelbrot;
use crate::error::{Error, Result};
use crate::hmatrix::RangeMask;
use crate::ranges::{RangeId, RangePartition};

/// Parameters for synthetic heavy-tail traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Distinct source addresses drawn per source range.
    pub n_src: u32,
    /// Distinct destination addresses drawn per destination range.
    pub n_dst: u32,
    pub alpha: f64,
    pub delta: f64,
    /// Packets to generate.
    pub count: u64,
    /// Relative weight of each `[source range][destination range]` pair.
    pub gateway_mix: [[f64; 4]; 4],
    pub seed: u64,
}

impl SynthSpec {
    /// 90% assigned <-> other split evenly by direction, 10% other <-> other.
    pub fn gateway(count: u64, seed: u64) -> Self {
        let mut mix = [[0.0; 4]; 4];
        mix[RangeId::Assigned.index()][RangeId::Other.index()] = 0.45;
        mix[RangeId::Other.index()][RangeId::Assigned.index()] = 0.45;
        mix[RangeId::Other.index()][RangeId::Other.index()] = 0.10;
        SynthSpec {
            n_src: 1 << 14,
            n_dst: 1 << 14,
            alpha: 2.0,
            delta: 0.0,
            count,
            gateway_mix: mix,
            seed,
        }
    }

    /// Pair weights proportional to range sizes: endpoints uniform over the
    /// whole space.
    pub fn uniform(count: u64, seed: u64, part: &RangePartition) -> Self {
        let mut mix = [[0.0; 4]; 4];
        for a in RangeId::ALL {
            for b in RangeId::ALL {
                mix[a.index()][b.index()] = part.fraction(a) * part.fraction(b);
            }
        }
        SynthSpec {
            gateway_mix: mix,
            ..SynthSpec::gateway(count, seed)
        }
    }
}

fn uniform_in<R: Rng>(mask: &RangeMask, rng: &mut R) -> u32 {
    let k = rng.random_range(0..mask.size());
    mask.nth(k).expect("index below mask size")
}

/// Generates `count` packets. Link multiplicities are drawn from the
/// Zipf-Mandelbrot law `(delta, alpha)` on `1..=count`, each new link takes
/// a fresh `(src, dst)` pair from the pools of its range pair, and the
/// packets of all links are shuffled into one stream. Timestamps tick one
/// microsecond per packet.
pub fn synth_traffic(spec: &SynthSpec, part: &RangePartition) -> Result<Vec<PacketRecord>> {
    if spec.alpha.is_nan() || spec.alpha <= 1.0 {
        return Err(Error::param(format!("alpha = {} must exceed 1", spec.alpha)));
    }
    if spec.gateway_mix.iter().flatten().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::param("mix weights must be nonnegative"));
    }
    if spec.count == 0 {
        return Ok(Vec::new());
    }
    if spec.n_src == 0 || spec.n_dst == 0 {
        return Err(Error::param("address pools must be nonempty"));
    }
    let weights: Vec<f64> = spec.gateway_mix.iter().flatten().copied().collect();
    let pairs = WeightedIndex::new(&weights).map_err(|_| Error::param("mix weights must have a positive sum"))?;
    let degrees = ZipfMandelbrot::new(spec.delta, spec.alpha, spec.count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut src_pools: [Vec<u32>; 4] = Default::default();
    let mut dst_pools: [Vec<u32>; 4] = Default::default();
    for id in RangeId::ALL {
        let row_used = spec.gateway_mix[id.index()].iter().any(|&w| w > 0.0);
        let col_used = spec.gateway_mix.iter().any(|row| row[id.index()] > 0.0);
        let mask = part.mask(id);
        if row_used {
            src_pools[id.index()] = (0..spec.n_src).map(|_| uniform_in(mask, &mut rng)).collect();
        }
        if col_used {
            dst_pools[id.index()] = (0..spec.n_dst).map(|_| uniform_in(mask, &mut rng)).collect();
        }
    }

    let mut used: HashSet<(u32, u32)> = HashSet::new();
    let mut links: Vec<((u32, u32), u64)> = Vec::new();
    let mut remaining = spec.count;
    while remaining > 0 {
        let d = degrees.sample(&mut rng).min(remaining);
        let k = pairs.sample(&mut rng);
        let (srcs, dsts) = (&src_pools[k / 4], &dst_pools[k % 4]);
        let mut pair = (0, 0);
        // Retry to keep one link per pair; a crowded pool eventually reuses one.
        for _ in 0..32 {
            pair = (
                srcs[rng.random_range(0..srcs.len())],
                dsts[rng.random_range(0..dsts.len())],
            );
            if !used.contains(&pair) {
                break;
            }
        }
        used.insert(pair);
        links.push((pair, d));
        remaining -= d;
    }

    let mut packets: Vec<(u32, u32)> = Vec::with_capacity(spec.count as usize);
    for &(pair, d) in &links {
        packets.extend(std::iter::repeat_n(pair, d as usize));
    }
    packets.shuffle(&mut rng);
    Ok(packets
        .into_iter()
        .enumerate()
        .map(|(t, (src, dst))| PacketRecord { src, dst, ts: t as u64 })
        .collect())
}
