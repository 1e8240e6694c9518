//! Closed-form detection model for heavy-tail backgrounds.
//!
//! An observation sits at multiplicative distance `x` from the background
//! model, inside `[1 - c_err, 1 / (1 - c_err)]`. Background observations
//! follow triangular densities peaking at `x = 1`; targets follow triangular
//! densities peaking at the domain edges. A cut `c_cut` labels everything in
//! `(1 - c_cut, 1 / (1 - c_cut))` as background and the rest as targets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Triangular densities and their cumulatives for a given `c_err`.
///
/// The lower cumulatives give the mass on `[x, 1]`, the higher cumulatives
/// the mass on `[1, x]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularModels {
    c_err: f64,
}

/// All eight closed forms evaluated at one point. Lower forms are `None`
/// above 1, higher forms `None` below 1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TriangularValues {
    pub p_back_low: Option<f64>,
    pub p_back_high: Option<f64>,
    pub p_tar_low: Option<f64>,
    pub p_tar_high: Option<f64>,
    pub cum_back_low: Option<f64>,
    pub cum_back_high: Option<f64>,
    pub cum_tar_low: Option<f64>,
    pub cum_tar_high: Option<f64>,
}

impl TriangularModels {
    pub fn new(c_err: f64) -> Result<Self> {
        if !(c_err > 0.0 && c_err < 1.0) {
            return Err(Error::param(format!("c_err = {c_err} must lie in (0, 1)")));
        }
        Ok(TriangularModels { c_err })
    }

    pub fn c_err(&self) -> f64 {
        self.c_err
    }

    pub fn x_min(&self) -> f64 {
        1.0 - self.c_err
    }

    pub fn x_max(&self) -> f64 {
        1.0 / (1.0 - self.c_err)
    }

    fn low_domain(&self, x: f64) -> Result<()> {
        if x < self.x_min() || x > 1.0 || x.is_nan() {
            return Err(Error::Domain(format!("x = {x} outside [{}, 1]", self.x_min())));
        }
        Ok(())
    }

    fn high_domain(&self, x: f64) -> Result<()> {
        if x < 1.0 || x > self.x_max() || x.is_nan() {
            return Err(Error::Domain(format!("x = {x} outside [1, {}]", self.x_max())));
        }
        Ok(())
    }

    pub fn p_back_low(&self, x: f64) -> Result<f64> {
        self.low_domain(x)?;
        let c = self.c_err;
        Ok(2.0 * (x - (1.0 - c)) / (c * c))
    }

    pub fn p_back_high(&self, x: f64) -> Result<f64> {
        self.high_domain(x)?;
        let c = self.c_err;
        Ok((2.0 / c) * (1.0 - c) * (x + (1.0 - x) / c))
    }

    pub fn p_tar_low(&self, x: f64) -> Result<f64> {
        self.low_domain(x)?;
        let c = self.c_err;
        Ok(2.0 * (1.0 - x) / (c * c))
    }

    pub fn p_tar_high(&self, x: f64) -> Result<f64> {
        self.high_domain(x)?;
        let c = self.c_err;
        Ok((2.0 / (c * c)) * (1.0 - c).powi(2) * (x - 1.0))
    }

    pub fn cum_back_low(&self, x: f64) -> Result<f64> {
        self.low_domain(x)?;
        let c = self.c_err;
        Ok((1.0 - x) * (2.0 * c + x - 1.0) / (c * c))
    }

    pub fn cum_back_high(&self, x: f64) -> Result<f64> {
        self.high_domain(x)?;
        let c = self.c_err;
        Ok((1.0 - c) * (x - 1.0) * (c * x + c - x + 1.0) / (c * c))
    }

    pub fn cum_tar_low(&self, x: f64) -> Result<f64> {
        self.low_domain(x)?;
        let c = self.c_err;
        Ok((x - 1.0).powi(2) / (c * c))
    }

    pub fn cum_tar_high(&self, x: f64) -> Result<f64> {
        self.high_domain(x)?;
        let c = self.c_err;
        Ok((c - 1.0).powi(2) * (x - 1.0).powi(2) / (c * c))
    }

    pub fn evaluate(&self, x: f64) -> Result<TriangularValues> {
        if x < self.x_min() || x > self.x_max() || x.is_nan() {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.x_min(),
                self.x_max()
            )));
        }
        Ok(TriangularValues {
            p_back_low: self.p_back_low(x).ok(),
            p_back_high: self.p_back_high(x).ok(),
            p_tar_low: self.p_tar_low(x).ok(),
            p_tar_high: self.p_tar_high(x).ok(),
            cum_back_low: self.cum_back_low(x).ok(),
            cum_back_high: self.cum_back_high(x).ok(),
            cum_tar_low: self.cum_tar_low(x).ok(),
            cum_tar_high: self.cum_tar_high(x).ok(),
        })
    }
}

pub fn triangular_models(c_err: f64, x: f64) -> Result<TriangularValues> {
    TriangularModels::new(c_err)?.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    c_err: f64,
    c_cut: f64,
}

impl DetectionParams {
    pub fn new(c_err: f64, c_cut: f64) -> Result<Self> {
        TriangularModels::new(c_err)?;
        if !(c_cut > 0.0 && c_cut < c_err) {
            return Err(Error::param(format!("c_cut = {c_cut} must lie in (0, {c_err})")));
        }
        Ok(DetectionParams { c_err, c_cut })
    }

    pub fn c_err(&self) -> f64 {
        self.c_err
    }

    pub fn c_cut(&self) -> f64 {
        self.c_cut
    }

    pub fn x_min(&self) -> f64 {
        1.0 - self.c_err
    }

    pub fn x_max(&self) -> f64 {
        1.0 / (1.0 - self.c_err)
    }

    pub fn x_cut_min(&self) -> f64 {
        1.0 - self.c_cut
    }

    pub fn x_cut_max(&self) -> f64 {
        1.0 / (1.0 - self.c_cut)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbs {
    /// Target labeled target (detection).
    pub p_tt: f64,
    /// Target labeled background (miss).
    pub p_tb: f64,
    /// Background labeled target (false alarm).
    pub p_bt: f64,
    /// Background labeled background.
    pub p_bb: f64,
}

impl OutcomeProbs {
    pub fn p_det(&self) -> f64 {
        self.p_tt
    }

    pub fn p_fa(&self) -> f64 {
        self.p_bt
    }
}

/// Outcome probabilities for any cut in the closed interval `[0, c_err]`;
/// the endpoints are the continuous limits of the open-interval formulas.
fn outcomes_closed(models: &TriangularModels, c_cut: f64) -> Result<OutcomeProbs> {
    let x_lo = (1.0 - c_cut).max(models.x_min());
    let x_hi = (1.0 / (1.0 - c_cut)).min(models.x_max());
    let tar_low = models.cum_tar_low(x_lo)?;
    let tar_high = models.cum_tar_high(x_hi)?;
    let back_low = models.cum_back_low(x_lo)?;
    let back_high = models.cum_back_high(x_hi)?;
    Ok(OutcomeProbs {
        p_tt: (1.0 - tar_low + 1.0 - tar_high) / 2.0,
        p_tb: (tar_low + tar_high) / 2.0,
        p_bt: (1.0 - back_low + 1.0 - back_high) / 2.0,
        p_bb: (back_low + back_high) / 2.0,
    })
}

pub fn outcome_probs(p: &DetectionParams) -> OutcomeProbs {
    let models = TriangularModels { c_err: p.c_err };
    outcomes_closed(&models, p.c_cut).expect("validated cut lies inside both domains")
}

/// Probability that a background observation lands in the background class
/// exactly `k` times out of `n_samp` independent samples.
pub fn background_count_prob(p_bb: f64, n_samp: u32, k: u32) -> f64 {
    if k > n_samp {
        return 0.0;
    }
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (n_samp - i) as f64 / (i + 1) as f64;
    }
    binom * p_bb.powi(k as i32) * (1.0 - p_bb).powi((n_samp - k) as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RocVariant {
    Baseline,
    /// Detections must persist over `n_samp` consecutive samples.
    Coherent {
        n_samp: u32,
    },
    /// Model right on a fraction `f` of the observations; the rest all flagged.
    MismatchAll {
        f: f64,
    },
    /// Model right on a fraction `f`; the rest never flagged.
    MismatchNone {
        f: f64,
    },
}

impl RocVariant {
    pub fn name(&self) -> &'static str {
        match self {
            RocVariant::Baseline => "baseline",
            RocVariant::Coherent { .. } => "coherent",
            RocVariant::MismatchAll { .. } => "mismatch_all",
            RocVariant::MismatchNone { .. } => "mismatch_none",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RocVariant::Coherent { n_samp: 0 } => Err(Error::param("N_samp must be at least 1")),
            RocVariant::MismatchAll { f } | RocVariant::MismatchNone { f } if !(f > 0.0 && f <= 1.0) => {
                Err(Error::param(format!("f = {f} must lie in (0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, o: &OutcomeProbs) -> (f64, f64) {
        let (fa, det) = (o.p_bt, o.p_tt);
        match *self {
            RocVariant::Baseline => (fa, det),
            RocVariant::Coherent { n_samp } => (fa.powi(n_samp as i32), det),
            RocVariant::MismatchAll { f } => (fa * f + 1.0 - f, det * f + 1.0 - f),
            RocVariant::MismatchNone { f } => (fa * f, det * f),
        }
    }
}

impl fmt::Display for RocVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub c_cut: f64,
    pub p_fa: f64,
    pub p_det: f64,
    pub variant: RocVariant,
}

/// One ROC point per cut. Cuts may include the limits `0` and `c_err`.
pub fn roc_curve(c_err: f64, cut_grid: &[f64], variant: RocVariant) -> Result<Vec<RocPoint>> {
    let models = TriangularModels::new(c_err)?;
    variant.validate()?;
    cut_grid
        .iter()
        .map(|&c_cut| {
            if !(0.0..=c_err).contains(&c_cut) {
                return Err(Error::param(format!("c_cut = {c_cut} outside [0, {c_err}]")));
            }
            let (p_fa, p_det) = variant.apply(&outcomes_closed(&models, c_cut)?);
            Ok(RocPoint {
                c_cut,
                p_fa,
                p_det,
                variant,
            })
        })
        .collect()
}

/// `n` evenly spaced cuts spanning `[0, c_err]` inclusive.
pub fn cut_grid(c_err: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![c_err / 2.0],
        _ => (0..n).map(|k| (c_err * k as f64 / (n - 1) as f64).min(c_err)).collect(),
    }
}

/// Fraction of logarithmic bins a single-bin model gets right.
pub fn fdmax(d_max: u64) -> Result<f64> {
    if d_max < 2 {
        return Err(Error::param(format!("d_max = {d_max} must be at least 2")));
    }
    Ok(1.0 / (d_max as f64).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCurveRow {
    pub d: u64,
    pub p_zm: f64,
    pub p_gauss: f64,
    pub zm_lower: f64,
    pub zm_upper: f64,
    pub gauss_lower: f64,
    pub gauss_upper: f64,
}

/// Heavy-tail and light-tail reference curves with multiplicative error
/// bounds `[(1 - c_err) p, p / (1 - c_err)]`. The Zipf-Mandelbrot curve is
/// normalized over `1..=max(d_grid)`; `sigma` is a standard deviation.
pub fn model_curves(zm: (f64, f64), gauss: (f64, f64), c_err: f64, d_grid: &[u64]) -> Result<Vec<ModelCurveRow>> {
    TriangularModels::new(c_err)?;
    let (mu, sigma) = gauss;
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::param("sigma must be positive"));
    }
    let d_max = d_grid.iter().copied().max().unwrap_or(1);
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    d_grid
        .iter()
        .map(|&d| {
            let p_zm = crate::calibration::zm_pdf(d, zm.0, zm.1, d_max)?;
            let z = (d as f64 - mu) / sigma;
            let p_gauss = norm * (-0.5 * z * z).exp();
            Ok(ModelCurveRow {
                d,
                p_zm,
                p_gauss,
                zm_lower: (1.0 - c_err) * p_zm,
                zm_upper: p_zm / (1.0 - c_err),
                gauss_lower: (1.0 - c_err) * p_gauss,
                gauss_upper: p_gauss / (1.0 - c_err),
            })
        })
        .collect()
}

pub const FIG_DEFAULTS: FigureDefaults = FigureDefaults {
    zm_delta: 0.0,
    zm_alpha: 2.0,
    gauss_mu: 1.0,
    gauss_sigma: 0.43,
    c_err: 2.0 / 3.0,
    c_cut: 1.0 / 3.0,
    n_samp: 8,
    d_max: 1 << 20,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureDefaults {
    pub zm_delta: f64,
    pub zm_alpha: f64,
    pub gauss_mu: f64,
    pub gauss_sigma: f64,
    pub c_err: f64,
    pub c_cut: f64,
    pub n_samp: u32,
    pub d_max: u64,
}
