//! Zipf-Mandelbrot law `p(d) ∝ (d + δ)^-α` on the support `1..=d_max`.

use rand::Rng;

use crate::error::{Error, Result};

/// Terms summed exactly before switching to Euler-Maclaurin.
const EXACT_TERMS: u64 = 1024;

#[inline]
fn term(d: f64, delta: f64, alpha: f64) -> f64 {
    (d + delta).powf(-alpha)
}

/// `∫ (x + δ)^-α dx` over `[a, b]`.
fn integral(a: f64, b: f64, delta: f64, alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        ((b + delta) / (a + delta)).ln()
    } else {
        let e = 1.0 - alpha;
        ((b + delta).powf(e) - (a + delta).powf(e)) / e
    }
}

/// `Σ_{d=lo}^{hi} (d + δ)^-α`. Exact for the first [`EXACT_TERMS`] terms;
/// the remainder uses Euler-Maclaurin through the third-derivative term,
/// whose truncation error is far below f64 resolution once `d > 1024`.
pub fn zm_sum(lo: u64, hi: u64, delta: f64, alpha: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    let split = hi.min(lo.saturating_add(EXACT_TERMS - 1));
    let mut s: f64 = (lo..=split).map(|d| term(d as f64, delta, alpha)).sum();
    if split < hi {
        let (a, b) = ((split + 1) as f64, hi as f64);
        let f = |x: f64| term(x, delta, alpha);
        let f1 = |x: f64| -alpha * (x + delta).powf(-alpha - 1.0);
        let f3 = |x: f64| -alpha * (alpha + 1.0) * (alpha + 2.0) * (x + delta).powf(-alpha - 3.0);
        s += integral(a, b, delta, alpha) + (f(a) + f(b)) / 2.0 + (f1(b) - f1(a)) / 12.0 - (f3(b) - f3(a)) / 720.0;
    }
    s
}

pub(crate) fn check_params(delta: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("exponent {alpha} must be positive")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("offset {delta} must be nonnegative")));
    }
    Ok(())
}

/// Normalized probability of `d` packets on a link.
pub fn zm_pdf(d: u64, delta: f64, alpha: f64, d_max: u64) -> Result<f64> {
    check_params(delta, alpha)?;
    if d == 0 || d > d_max {
        return Err(Error::param(format!("d = {d} outside support 1..={d_max}")));
    }
    Ok(term(d as f64, delta, alpha) / zm_sum(1, d_max, delta, alpha))
}

/// Sampler for the bounded law. The head `1..=1024` is drawn from an exact
/// cumulative table; the tail from the continuous density on
/// `[1024.5, d_max + 0.5)` rounded to the nearest integer.
#[derive(Debug, Clone)]
pub struct ZipfMandelbrot {
    delta: f64,
    alpha: f64,
    d_max: u64,
    head_cdf: Vec<f64>,
    tail_mass: f64,
}

impl ZipfMandelbrot {
    pub fn new(delta: f64, alpha: f64, d_max: u64) -> Result<Self> {
        check_params(delta, alpha)?;
        if d_max == 0 {
            return Err(Error::param("d_max must be at least 1"));
        }
        let head = d_max.min(EXACT_TERMS);
        let mut acc = 0.0;
        let head_cdf = (1..=head)
            .map(|d| {
                acc += term(d as f64, delta, alpha);
                acc
            })
            .collect();
        let tail_mass = if d_max > head {
            integral(head as f64 + 0.5, d_max as f64 + 0.5, delta, alpha)
        } else {
            0.0
        };
        Ok(ZipfMandelbrot {
            delta,
            alpha,
            d_max,
            head_cdf,
            tail_mass,
        })
    }

    pub fn d_max(&self) -> u64 {
        self.d_max
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let head_mass = *self.head_cdf.last().unwrap();
        let u = rng.random::<f64>() * (head_mass + self.tail_mass);
        if u < head_mass {
            return self.head_cdf.partition_point(|&c| c <= u) as u64 + 1;
        }
        let a = self.head_cdf.len() as f64 + 0.5;
        let b = self.d_max as f64 + 0.5;
        let v: f64 = rng.random();
        let (delta, alpha) = (self.delta, self.alpha);
        let x = if (alpha - 1.0).abs() < 1e-12 {
            (a + delta) * ((b + delta) / (a + delta)).powf(v) - delta
        } else {
            let e = 1.0 - alpha;
            let (pa, pb) = ((a + delta).powf(e), (b + delta).powf(e));
            (pa + v * (pb - pa)).powf(1.0 / e) - delta
        };
        (x.round() as u64).clamp(self.head_cdf.len() as u64 + 1, self.d_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_support() {
        assert!((zm_pdf(1, 0.0, 2.0, 2).unwrap() - 0.8).abs() < 1e-15);
        assert!((zm_pdf(2, 0.0, 2.0, 2).unwrap() - 0.2).abs() < 1e-15);
        assert!(zm_pdf(3, 0.0, 2.0, 2).is_err());
        assert!(zm_pdf(0, 0.0, 2.0, 2).is_err());
        assert!(zm_pdf(1, -1.0, 2.0, 2).is_err());
        assert!(zm_pdf(1, 0.0, 0.0, 2).is_err());
    }

    #[test]
    fn strictly_decreasing() {
        for &(delta, alpha) in &[(0.0, 0.3), (2.5, 1.0), (10.0, 3.0)] {
            let p: Vec<f64> = (1..=50).map(|d| zm_pdf(d, delta, alpha, 50).unwrap()).collect();
            assert!(p.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn large_offset_is_nearly_uniform() {
        let p: Vec<f64> = (1..=4).map(|d| zm_pdf(d, 1e6, 2.0, 4).unwrap()).collect();
        let spread = p.iter().cloned().fold(f64::MIN, f64::max) - p.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-5);
    }

    #[test]
    fn tail_sum_matches_brute_force() {
        for &(delta, alpha) in &[(0.0, 2.0), (3.0, 1.5), (0.5, 1.0), (7.0, 0.4)] {
            let exact: f64 = (1..=200_000u64).map(|d| term(d as f64, delta, alpha)).sum();
            let fast = zm_sum(1, 200_000, delta, alpha);
            assert!(
                (fast / exact - 1.0).abs() < 1e-12,
                "({delta},{alpha}) {fast} vs {exact}"
            );
            let part: f64 = (5000..=90_000u64).map(|d| term(d as f64, delta, alpha)).sum();
            assert!((zm_sum(5000, 90_000, delta, alpha) / part - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_matches_pdf() {
        let zm = ZipfMandelbrot::new(1.0, 2.0, 1 << 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let mut hits = [0u64; 5];
        let mut tail = 0u64;
        for _ in 0..n {
            let d = zm.sample(&mut rng);
            assert!((1..=1 << 20).contains(&d));
            if d <= 5 {
                hits[d as usize - 1] += 1;
            }
            if d > 1024 {
                tail += 1;
            }
        }
        for (k, &h) in hits.iter().enumerate() {
            let p = zm_pdf(k as u64 + 1, 1.0, 2.0, 1 << 20).unwrap();
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((h as f64 - n as f64 * p).abs() < 4.0 * sigma, "d={}", k + 1);
        }
        let p_tail = zm_sum(1025, 1 << 20, 1.0, 2.0) / zm_sum(1, 1 << 20, 1.0, 2.0);
        let sigma = (n as f64 * p_tail).sqrt();
        assert!((tail as f64 - n as f64 * p_tail).abs() < 4.0 * sigma);
    }
}
