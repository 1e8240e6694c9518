//! Link-degree histograms and Zipf-Mandelbrot calibration.
//!
//! The fit compares empirical and model probability mass per logarithmic
//! bin `[2^k, 2^(k+1))`; every occupied bin carries equal weight. Comparing
//! per-`d` fractions instead lets the sparsely occupied tail (where only
//! `d` values with at least one link are seen) drag the exponent far below
//! its true value.

mod zm;

pub use zm::{zm_pdf, zm_sum, ZipfMandelbrot};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmatrix::HypersparseMatrix;
use crate::ranges::RangeId;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DegreeHistogram {
    /// packets-per-link `d` → number of links.
    pub counts: BTreeMap<u64, u64>,
    pub window_nv: u64,
    pub direction: Option<(RangeId, RangeId)>,
}

impl DegreeHistogram {
    pub fn with_window(mut self, window_nv: u64, direction: Option<(RangeId, RangeId)>) -> Self {
        self.window_nv = window_nv;
        self.direction = direction;
        self
    }

    pub fn add_matrix(&mut self, a: &HypersparseMatrix) {
        for &v in a.values() {
            *self.counts.entry(v).or_insert(0) += 1;
        }
    }

    pub fn links(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn packets(&self) -> u64 {
        self.counts.iter().map(|(d, c)| d * c).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(d, fraction of links)` for every occupied `d`.
    pub fn fractions(&self) -> Vec<(u64, f64)> {
        let n = self.links() as f64;
        self.counts.iter().map(|(&d, &c)| (d, c as f64 / n)).collect()
    }

    /// `(bin k, links, packets)` per occupied logarithmic bin.
    pub fn log_bins(&self) -> Vec<(u32, u64, u64)> {
        let mut out: Vec<(u32, u64, u64)> = Vec::new();
        for (&d, &c) in &self.counts {
            let k = d.ilog2();
            match out.last_mut() {
                Some(last) if last.0 == k => {
                    last.1 += c;
                    last.2 += d * c;
                }
                _ => out.push((k, c, d * c)),
            }
        }
        out
    }
}

pub fn degree_histogram(a: &HypersparseMatrix) -> DegreeHistogram {
    let mut h = DegreeHistogram {
        window_nv: a.packet_total(),
        ..Default::default()
    };
    h.add_matrix(a);
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfMandelbrotFit {
    pub delta: f64,
    pub alpha: f64,
    pub d_max: u64,
    /// Mean squared log10 residual over occupied bins.
    pub fit_error: f64,
}

pub const DELTA_GRID: (f64, f64, f64) = (0.0, 16.0, 0.25);
pub const ALPHA_GRID: (f64, f64, f64) = (0.25, 4.0, 0.05);
const REFINE_STOP: f64 = 1e-3;

fn grid(axis: (f64, f64, f64)) -> Vec<f64> {
    let (lo, hi, step) = axis;
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// Every `(delta, alpha)` visited by the coarse search.
pub fn search_grid() -> Vec<(f64, f64)> {
    let alphas = grid(ALPHA_GRID);
    grid(DELTA_GRID)
        .into_iter()
        .flat_map(|d| alphas.iter().map(move |&a| (d, a)))
        .collect()
}

/// Empirical mass per occupied bin, prepared once per fit.
struct BinnedTarget {
    d_max: u64,
    /// `(lo, hi, log10 empirical mass)` per occupied bin.
    occupied: Vec<(u64, u64, f64)>,
    /// Bounds of every bin covering `1..=d_max`.
    all: Vec<(u64, u64)>,
}

impl BinnedTarget {
    fn new(points: &[(u64, f64)]) -> Result<Self> {
        let occupied_d = points.iter().filter(|p| p.1 > 0.0).count();
        if occupied_d < 3 {
            return Err(Error::InsufficientData(format!(
                "{occupied_d} occupied degree values, need at least 3"
            )));
        }
        if points.iter().any(|&(d, f)| d == 0 || f.is_nan() || f < 0.0) {
            return Err(Error::param("degrees must be >= 1 and fractions nonnegative"));
        }
        let d_max = points.iter().filter(|p| p.1 > 0.0).map(|p| p.0).max().unwrap();
        let bounds = |k: u32| (1u64 << k, ((1u64 << k) * 2 - 1).min(d_max));
        let all: Vec<(u64, u64)> = (0..=d_max.ilog2()).map(bounds).collect();
        let mut mass: BTreeMap<u32, f64> = BTreeMap::new();
        for &(d, f) in points.iter().filter(|p| p.1 > 0.0) {
            *mass.entry(d.ilog2()).or_insert(0.0) += f;
        }
        let total: f64 = mass.values().sum();
        let occupied = mass
            .into_iter()
            .map(|(k, m)| {
                let (lo, hi) = bounds(k);
                (lo, hi, (m / total).log10())
            })
            .collect();
        Ok(BinnedTarget { d_max, occupied, all })
    }

    fn residual(&self, delta: f64, alpha: f64) -> f64 {
        let norm: f64 = self.all.iter().map(|&(lo, hi)| zm_sum(lo, hi, delta, alpha)).sum();
        let log_norm = norm.log10();
        let sq: f64 = self
            .occupied
            .iter()
            .map(|&(lo, hi, emp)| {
                let model = zm_sum(lo, hi, delta, alpha).log10() - log_norm;
                (emp - model).powi(2)
            })
            .sum();
        sq / self.occupied.len() as f64
    }
}

/// Residual of the model `(delta, alpha)` against `(d, fraction)` points.
pub fn fit_residual(points: &[(u64, f64)], delta: f64, alpha: f64) -> Result<f64> {
    zm::check_params(delta, alpha)?;
    Ok(BinnedTarget::new(points)?.residual(delta, alpha))
}

/// Grid search over [`DELTA_GRID`] x [`ALPHA_GRID`], then pattern search
/// with step halving down to 1e-3.
pub fn fit_fractions(points: &[(u64, f64)]) -> Result<ZipfMandelbrotFit> {
    let target = BinnedTarget::new(points)?;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for (delta, alpha) in search_grid() {
        let r = target.residual(delta, alpha);
        if r < best.0 {
            best = (r, delta, alpha);
        }
    }
    let (mut sd, mut sa) = (DELTA_GRID.2, ALPHA_GRID.2);
    while sd >= REFINE_STOP || sa >= REFINE_STOP {
        let (_, d0, a0) = best;
        let mut moved = false;
        for (dd, da) in [
            (-1.0, -1.0),
            (-1.0, 0.0),
            (-1.0, 1.0),
            (0.0, -1.0),
            (0.0, 1.0),
            (1.0, -1.0),
            (1.0, 0.0),
            (1.0, 1.0),
        ] {
            let (d, a) = (d0 + dd * sd, a0 + da * sa);
            if d < 0.0 || a <= 0.0 {
                continue;
            }
            let r = target.residual(d, a);
            if r < best.0 {
                best = (r, d, a);
                moved = true;
            }
        }
        if !moved {
            sd /= 2.0;
            sa /= 2.0;
        }
    }
    Ok(ZipfMandelbrotFit {
        delta: best.1,
        alpha: best.2,
        d_max: target.d_max,
        fit_error: best.0,
    })
}

pub fn fit_zipf_mandelbrot(h: &DegreeHistogram) -> Result<ZipfMandelbrotFit> {
    fit_fractions(&h.fractions())
}

/// `(d, empirical fraction, model probability)` per occupied `d`.
pub fn plot_rows(h: &DegreeHistogram, fit: &ZipfMandelbrotFit) -> Result<Vec<(u64, f64, f64)>> {
    h.fractions()
        .into_iter()
        .map(|(d, f)| Ok((d, f, zm_pdf(d, fit.delta, fit.alpha, fit.d_max)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_example() {
        let a = HypersparseMatrix::from_pairs([(1, 2), (1, 2), (1, 3), (4, 2)]);
        let h = degree_histogram(&a);
        assert_eq!(h.counts, BTreeMap::from([(1, 2), (2, 1)]));
        let f = h.fractions();
        assert_eq!(f[0], (1, 2.0 / 3.0));
        assert_eq!(f[1], (2, 1.0 / 3.0));
        assert_eq!(h.packets(), 4);
        assert_eq!(h.log_bins(), vec![(0, 2, 2), (1, 1, 2)]);
        assert!(degree_histogram(&HypersparseMatrix::new()).is_empty());
    }

    #[test]
    fn needs_three_occupied_values() {
        let err = fit_fractions(&[(1, 0.9), (2, 0.1)]).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    fn exact_points(delta: f64, alpha: f64, d_max: u64) -> Vec<(u64, f64)> {
        (1..=d_max)
            .map(|d| (d, zm_pdf(d, delta, alpha, d_max).unwrap()))
            .collect()
    }

    #[test]
    fn noise_free_fractions_fit_exactly() {
        for &(delta, alpha) in &[(0.0, 2.0), (3.0, 1.5), (1.25, 0.8)] {
            let fit = fit_fractions(&exact_points(delta, alpha, 5000)).unwrap();
            assert!(fit.fit_error < 1e-10, "{fit:?}");
            assert!(
                (fit.alpha - alpha).abs() < 1e-6 && (fit.delta - delta).abs() < 1e-6,
                "{fit:?}"
            );
            assert_eq!(fit.d_max, 5000);
        }
    }

    #[test]
    fn fit_beats_every_grid_point() {
        let pts: Vec<(u64, f64)> = exact_points(2.1, 1.73, 3000)
            .into_iter()
            .map(|(d, p)| (d, p * (1.0 + 0.05 * ((d as f64).sin()))))
            .collect();
        let fit = fit_fractions(&pts).unwrap();
        for (d, a) in search_grid() {
            assert!(fit.fit_error <= fit_residual(&pts, d, a).unwrap());
        }
        assert_eq!(fit_fractions(&pts).unwrap(), fit);
    }
}
