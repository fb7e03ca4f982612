//! Kolmogorov–Smirnov statistics and their asymptotic null laws.

use statrs::function::erf::erfc;

use super::{TestReport, Verdict};
use crate::error::{Error, Result};

pub const MIN_KS_SAMPLES: usize = 10;

const SERIES_CUTOFF: f64 = 1e-12;

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `P(K > lambda)` for the Kolmogorov distribution `K = sup |bridge|`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // Jacobi theta form converges fast for small lambda
        let t = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1.. {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * t).exp();
            sum += term;
            if term < SERIES_CUTOFF {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < SERIES_CUTOFF {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// `P(sup_{0<=t<=1} |B(t)| > c)` for standard Brownian motion `B`.
pub fn sup_brownian_sf(c: f64) -> f64 {
    if c <= 0.0 {
        return 1.0;
    }
    let upper = |x: f64| 0.5 * erfc(x / std::f64::consts::SQRT_2);
    let p = if c < 1.0 {
        let t = std::f64::consts::PI.powi(2) / (8.0 * c * c);
        let mut sum = 0.0;
        for k in 0.. {
            let j = (2 * k + 1) as f64;
            let term = (-j * j * t).exp() / j;
            sum += if k % 2 == 0 { term } else { -term };
            if term < SERIES_CUTOFF {
                break;
            }
        }
        1.0 - 4.0 / std::f64::consts::PI * sum
    } else {
        let mut sum = 0.0;
        for k in 0.. {
            let term = upper((2 * k + 1) as f64 * c);
            sum += if k % 2 == 0 { term } else { -term };
            if term < SERIES_CUTOFF {
                break;
            }
        }
        4.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// `sup |F_n - F|` over the sample.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let xs = sorted(xs);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// `sup |F_x - F_y|` between two empirical distribution functions.
pub fn ks_two_sample_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let xs = sorted(xs);
    let ys = sorted(ys);
    sorted_two_sample_statistic(&xs, &ys)
}

pub(crate) fn sorted_two_sample_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

fn require(n: usize) -> Result<()> {
    if n < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_KS_SAMPLES, got: n });
    }
    Ok(())
}

/// One-sample KS test of `xs` against a continuous `cdf`, asymptotic p-value.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<TestReport> {
    require(xs.len())?;
    let d = ks_statistic(xs, cdf);
    let p = kolmogorov_sf((xs.len() as f64).sqrt() * d);
    Ok(TestReport::new("ks_one_sample", d, p, xs.len(), alpha))
}

/// Two-sample KS test with effective size `n m / (n + m)`.
pub fn ks_two_sample(xs: &[f64], ys: &[f64], alpha: f64) -> Result<TestReport> {
    require(xs.len())?;
    require(ys.len())?;
    let d = ks_two_sample_statistic(xs, ys);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let p = kolmogorov_sf((n * m / (n + m)).sqrt() * d);
    Ok(TestReport::new("ks_two_sample", d, p, xs.len().min(ys.len()), alpha))
}

/// KS distance between a sample and its mirror image `-xs`, with the p-value
/// taken from the exact asymptotic law of that paired statistic:
/// `sqrt(n) D` converges to `sup_{[0,1]} |B|` under a symmetric continuous law.
pub fn ks_symmetry(xs: &[f64], alpha: f64) -> Result<TestReport> {
    require(xs.len())?;
    let sorted_xs = sorted(xs);
    let mirrored: Vec<f64> = sorted_xs.iter().rev().map(|x| -x).collect();
    let d = sorted_two_sample_statistic(&sorted_xs, &mirrored);
    let p = sup_brownian_sf((xs.len() as f64).sqrt() * d);
    Ok(TestReport::new("ks_symmetry", d, p, xs.len(), alpha))
}

impl TestReport {
    pub(crate) fn new(test: &str, statistic: f64, p_value: f64, n: usize, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport {
            test: test.to_string(),
            l: None,
            m: None,
            statistic,
            p_value,
            n,
            alpha,
            verdict: Verdict::from_p(p_value, alpha),
        }
    }
}
