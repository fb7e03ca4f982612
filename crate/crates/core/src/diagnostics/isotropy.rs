use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::ks::{ks_one_sample, ks_symmetry, sorted_two_sample_statistic};
use super::{Ensemble, PolarSample, TestReport, Verdict};
use crate::error::{Error, Result};
use crate::harmonics::HarmonicIndex;
use crate::wigner::{wigner_d_matrix, EulerAngles};

/// Smallest ensemble accepted by the ensemble diagnostics.
pub const MIN_REPLICATES: usize = 100;

/// Monte Carlo draws used to calibrate the rotation-mixing statistic.
pub const MIXING_NULL_REPLICATES: usize = 999;

const MIXING_NULL_SEED: u64 = 0x6d69_7869_6e67_0001;

fn require_replicates(e: &Ensemble) -> Result<()> {
    if e.len() < MIN_REPLICATES {
        return Err(Error::TooFewSamples { need: MIN_REPLICATES, got: e.len() });
    }
    Ok(())
}

fn require_degree(e: &Ensemble, l: usize) -> Result<()> {
    if l > e.lmax() {
        return Err(Error::DegreeAbsent(l));
    }
    Ok(())
}

fn require_order(l: usize, m: i64) -> Result<()> {
    HarmonicIndex::new(l, m)?;
    if m == 0 {
        return Err(Error::PhaseDegenerate);
    }
    Ok(())
}

fn nonzero_power(values: &[Complex64], l: usize) -> Result<()> {
    if values.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::ZeroSpectrum(l));
    }
    Ok(())
}

/// Sample second moments of one degree block against the `C_l I` prediction
/// and of the cross block `(l, l+1)` against zero.
#[derive(Debug, Clone)]
pub struct CovarianceSummary {
    pub l: usize,
    pub n: usize,
    /// `Ê[a_l a_l^*]`, row-major, ascending orders.
    pub covariance: Vec<Complex64>,
    /// `Ê[a_l a_{l+1}^*]`, `(2l+1) × (2l+3)` row-major.
    pub cross_covariance: Vec<Complex64>,
    /// Mean of the diagonal of `covariance`.
    pub c_hat: f64,
    pub c_hat_next: f64,
    pub max_offdiag_corr: f64,
    /// `max_m |Γ_mm / c_hat - 1|`.
    pub diagonal_spread: f64,
    pub cross_max_corr: f64,
    /// `5 / sqrt(N)`.
    pub threshold: f64,
}

impl CovarianceSummary {
    pub fn flagged(&self) -> bool {
        self.max_offdiag_corr > self.threshold
            || self.diagonal_spread > self.threshold
            || self.cross_max_corr > self.threshold
    }

    pub fn within_block_flagged(&self) -> bool {
        self.max_offdiag_corr > self.threshold || self.diagonal_spread > self.threshold
    }

    pub fn report(&self, alpha: f64) -> TestReport {
        let stat = self.max_offdiag_corr.max(self.diagonal_spread).max(self.cross_max_corr);
        TestReport {
            test: "covariance".into(),
            l: Some(self.l),
            m: None,
            statistic: stat,
            p_value: f64::NAN,
            n: self.n,
            alpha,
            verdict: Verdict::from_flags(self.flagged()),
        }
    }
}

fn second_moments(blocks_a: &[Vec<Complex64>], blocks_b: &[Vec<Complex64>]) -> Vec<Complex64> {
    let (ra, rb) = (blocks_a[0].len(), blocks_b[0].len());
    let mut acc = vec![Complex64::new(0.0, 0.0); ra * rb];
    for (a, b) in blocks_a.iter().zip(blocks_b) {
        for i in 0..ra {
            for j in 0..rb {
                acc[i * rb + j] += a[i] * b[j].conj();
            }
        }
    }
    let n = blocks_a.len() as f64;
    acc.iter().map(|v| v / n).collect()
}

/// Second-order structure of degree `l` and its coupling to degree `l + 1`.
pub fn covariance_diagnostic(e: &Ensemble, l: usize) -> Result<CovarianceSummary> {
    require_replicates(e)?;
    require_degree(e, l + 1)?;
    let blocks: Vec<Vec<Complex64>> =
        e.sets().iter().map(|s| s.block_full(l)).collect::<Result<_>>()?;
    if blocks.iter().all(|b| *b == blocks[0]) {
        return Err(Error::DegenerateEnsemble(format!(
            "all {} replicates share the same degree-{l} block",
            e.len()
        )));
    }
    let next: Vec<Vec<Complex64>> =
        e.sets().iter().map(|s| s.block_full(l + 1)).collect::<Result<_>>()?;

    let dim = 2 * l + 1;
    let cov = second_moments(&blocks, &blocks);
    let cross = second_moments(&blocks, &next);
    let diag: Vec<f64> = (0..dim).map(|i| cov[i * dim + i].re).collect();
    let c_hat = diag.iter().sum::<f64>() / dim as f64;
    let dim_next = dim + 2;
    let c_hat_next = (0..dim_next).map(|i| {
        next.iter().map(|b| b[i].norm_sqr()).sum::<f64>() / e.len() as f64
    }).sum::<f64>() / dim_next as f64;

    let mut max_offdiag_corr: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                let denom = (diag[i] * diag[j]).sqrt();
                if denom > 0.0 {
                    max_offdiag_corr = max_offdiag_corr.max(cov[i * dim + j].norm() / denom);
                }
            }
        }
    }
    let diagonal_spread = diag.iter().map(|d| (d / c_hat - 1.0).abs()).fold(0.0, f64::max);
    let cross_denom = (c_hat * c_hat_next).sqrt();
    let cross_max_corr = if cross_denom > 0.0 {
        cross.iter().map(|v| v.norm() / cross_denom).fold(0.0, f64::max)
    } else {
        0.0
    };

    Ok(CovarianceSummary {
        l,
        n: e.len(),
        covariance: cov,
        cross_covariance: cross,
        c_hat,
        c_hat_next,
        max_offdiag_corr,
        diagonal_spread,
        cross_max_corr,
        threshold: 5.0 / (e.len() as f64).sqrt(),
    })
}

/// KS test of the phases of `a_lm` against the uniform law on `[-π, π)`.
pub fn phase_uniformity_test(e: &Ensemble, l: usize, m: i64, alpha: f64) -> Result<TestReport> {
    require_order(l, m)?;
    require_replicates(e)?;
    require_degree(e, l)?;
    let values = e.coefficient(l, m)?;
    nonzero_power(&values, l)?;
    let phases: Vec<f64> = values.iter().map(|z| PolarSample::from_complex(*z).theta).collect();
    let report = ks_one_sample(&phases, |t| ((t + PI) / (2.0 * PI)).clamp(0.0, 1.0), alpha)?;
    Ok(report.named("phase").at(l, m))
}

/// Standard Cauchy distribution function.
pub fn cauchy_cdf(x: f64) -> f64 {
    0.5 + x.atan() / PI
}

/// KS test of `Re a_lm / Im a_lm` against the standard Cauchy law. Replicates
/// with `Im a_lm == 0` exactly are dropped.
pub fn cauchy_ratio_test(e: &Ensemble, l: usize, m: i64, alpha: f64) -> Result<TestReport> {
    require_order(l, m)?;
    require_replicates(e)?;
    require_degree(e, l)?;
    let values = e.coefficient(l, m)?;
    nonzero_power(&values, l)?;
    let ratios: Vec<f64> = values.iter().filter(|z| z.im != 0.0).map(|z| z.re / z.im).collect();
    let report = ks_one_sample(&ratios, cauchy_cdf, alpha)?;
    Ok(report.named("cauchy_ratio").at(l, m))
}

/// Sign-flip symmetry of `Re a_lm` and `Im a_lm`. Each part is compared with
/// its mirror image; the two p-values are combined with the Šidák rule so the
/// joint test keeps level `alpha`. For `m = 0` only the real part exists.
pub fn symmetry_test(e: &Ensemble, l: usize, m: i64, alpha: f64) -> Result<TestReport> {
    HarmonicIndex::new(l, m)?;
    require_replicates(e)?;
    require_degree(e, l)?;
    let values = e.coefficient(l, m)?;
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let mut parts = vec![ks_symmetry(&re, alpha)?];
    if m != 0 {
        let im: Vec<f64> = values.iter().map(|z| z.im).collect();
        parts.push(ks_symmetry(&im, alpha)?);
    }
    let p_min = parts.iter().map(|r| r.p_value).fold(1.0, f64::min);
    let p = 1.0 - (1.0 - p_min).powi(parts.len() as i32);
    let stat = parts.iter().map(|r| r.statistic).fold(0.0, f64::max);
    Ok(TestReport::new("symmetry", stat, p, e.len(), alpha).at(l, m))
}

/// Empirical `E[Z1 conj(Z2)]` and `E[Z1 Z2]` for two coefficients.
#[derive(Debug, Clone)]
pub struct CorrelationSummary {
    pub first: HarmonicIndex,
    pub second: HarmonicIndex,
    pub n: usize,
    pub conj_moment: Complex64,
    pub plain_moment: Complex64,
    /// Moduli divided by `sqrt(Ê|Z1|^2 Ê|Z2|^2)`.
    pub conj_normalized: f64,
    pub plain_normalized: f64,
    pub threshold: f64,
    pub note: String,
}

impl CorrelationSummary {
    pub fn flagged(&self) -> bool {
        self.conj_normalized > self.threshold || self.plain_normalized > self.threshold
    }

    pub fn report(&self, alpha: f64) -> TestReport {
        TestReport {
            test: "independence".into(),
            l: Some(self.first.l()),
            m: Some(self.first.m()),
            statistic: self.conj_normalized.max(self.plain_normalized),
            p_value: f64::NAN,
            n: self.n,
            alpha,
            verdict: Verdict::from_flags(self.flagged()),
        }
    }
}

/// Both complex moments that must vanish for two centered jointly Gaussian
/// coefficients to be independent.
pub fn complex_correlation_test(
    e: &Ensemble,
    first: HarmonicIndex,
    second: HarmonicIndex,
) -> Result<CorrelationSummary> {
    if first == second {
        return Err(Error::IdenticalIndices);
    }
    require_replicates(e)?;
    let z1 = e.coefficient(first.l(), first.m())?;
    let z2 = e.coefficient(second.l(), second.m())?;
    let n = e.len() as f64;
    let conj_moment: Complex64 = z1.iter().zip(&z2).map(|(a, b)| a * b.conj()).sum::<Complex64>() / n;
    let plain_moment: Complex64 = z1.iter().zip(&z2).map(|(a, b)| a * b).sum::<Complex64>() / n;
    let p1 = z1.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    let p2 = z2.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    let denom = (p1 * p2).sqrt();
    let scale = |v: Complex64| if denom > 0.0 { v.norm() / denom } else { 0.0 };
    let threshold = 5.0 / n.sqrt();
    let (conj_normalized, plain_normalized) = (scale(conj_moment), scale(plain_moment));
    let note = if conj_normalized <= threshold && plain_normalized <= threshold {
        "both moments vanish within 5/sqrt(N): independent if the pair is jointly Gaussian, \
         otherwise only uncorrelated"
            .to_string()
    } else {
        "nonzero complex moment: the coefficients are correlated, hence dependent".to_string()
    };
    Ok(CorrelationSummary {
        first,
        second,
        n: e.len(),
        conj_moment,
        plain_moment,
        conj_normalized,
        plain_normalized,
        threshold,
        note,
    })
}

/// Compares `Re a_lm` before and after rotating every replicate's degree-`l`
/// block by `D^l(g)`, with [`MIXING_NULL_REPLICATES`] calibration draws.
pub fn rotation_mixing_gaussianity_test(
    e: &Ensemble,
    l: usize,
    m: i64,
    g: &EulerAngles,
    alpha: f64,
) -> Result<TestReport> {
    rotation_mixing_with_replicates(e, l, m, g, alpha, MIXING_NULL_REPLICATES)
}

/// Rotation-mixing test with an explicit number of calibration draws.
///
/// The statistic is the two-sample KS distance between the pooled real and
/// imaginary parts of `a_lm` and those of `b_lm`, `b = a D^l(g)`. Both
/// samples come from the same replicates, so the independent-samples
/// Kolmogorov law does not apply. The p-value is the Monte Carlo tail
/// probability of the same statistic on simulated Gaussian isotropic blocks
/// rotated by the same `D^l(g)`.
pub fn rotation_mixing_with_replicates(
    e: &Ensemble,
    l: usize,
    m: i64,
    g: &EulerAngles,
    alpha: f64,
    null_replicates: usize,
) -> Result<TestReport> {
    require_order(l, m)?;
    if m < 0 {
        return Err(Error::InvalidIndex { l: l as i64, m });
    }
    if g.beta() < 1e-9 || PI - g.beta() < 1e-9 {
        return Err(Error::DegenerateRotation(g.beta()));
    }
    require_replicates(e)?;
    require_degree(e, l)?;
    let d = wigner_d_matrix(l, g);
    let offset = (m + l as i64) as usize;

    let column: Vec<Complex64> = (-(l as i64)..=l as i64).map(|j| d.get(j, m)).collect();

    let blocks: Vec<Vec<Complex64>> =
        e.sets().iter().map(|s| s.block_full(l)).collect::<Result<_>>()?;
    nonzero_power(&blocks.iter().map(|b| b[offset]).collect::<Vec<_>>(), l)?;
    let observed = mixing_statistic(blocks.iter().map(|b| mixed_pair(b, &column, offset)));

    let n = e.len();
    let null = mixing_null(n, l, &column, offset, null_replicates);
    let exceed = null.len() - null.partition_point(|&v| v < observed);
    let p = (1 + exceed) as f64 / (null_replicates + 1) as f64;
    Ok(TestReport::new("rotation_mixing", observed, p, n, alpha).at(l, m))
}

type NullKey = (usize, usize, usize, usize, Vec<(u64, u64)>);

/// Sorted null statistics, cached per configuration: the null depends only
/// on `(N, l, m, D^l(g))` and the fixed calibration seed.
fn mixing_null(n: usize, l: usize, column: &[Complex64], offset: usize, reps: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, Arc<Vec<f64>>>>> = OnceLock::new();
    let key = (n, l, offset, reps, column.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return hit.clone();
    }
    let mut stats: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(MIXING_NULL_SEED.wrapping_add(i));
            let mut block = vec![Complex64::new(0.0, 0.0); 2 * l + 1];
            mixing_statistic((0..n).map(|_| {
                fill_gaussian_block(&mut block, l, &mut rng);
                mixed_pair(&block, column, offset)
            }))
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let stats = Arc::new(stats);
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, stats.clone());
    stats
}

/// `(a_lm, b_lm)`; `column` is the order-`m` column of `D^l(g)`.
fn mixed_pair(block: &[Complex64], column: &[Complex64], offset: usize) -> (Complex64, Complex64) {
    (block[offset], block.iter().zip(column).map(|(x, c)| x * c).sum())
}

fn mixing_statistic(pairs: impl Iterator<Item = (Complex64, Complex64)>) -> f64 {
    let mut before = Vec::new();
    let mut after = Vec::new();
    for (a, b) in pairs {
        before.extend([a.re, a.im]);
        after.extend([b.re, b.im]);
    }
    before.sort_by(f64::total_cmp);
    after.sort_by(f64::total_cmp);
    sorted_two_sample_statistic(&before, &after)
}

/// Full degree-`l` block of a unit-spectrum Gaussian field.
fn fill_gaussian_block<R: Rng>(block: &mut [Complex64], l: usize, rng: &mut R) {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    block[l] = Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0);
    for k in 1..=l {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let z = Complex64::new(sd * re, sd * im);
        block[l + k] = z;
        block[l - k] = if k % 2 == 0 { z.conj() } else { -z.conj() };
    }
}

/// Median over consecutive batches of the raw moment `mean(|x|^order)`, one
/// entry per batch size. A finite moment levels off as the batch grows; an
/// infinite one keeps climbing.
pub fn batch_moment_profile(xs: &[f64], batch_sizes: &[usize], order: i32) -> Result<Vec<f64>> {
    batch_sizes
        .iter()
        .map(|&b| {
            if b == 0 || b > xs.len() {
                return Err(Error::TooFewSamples { need: b.max(1), got: xs.len() });
            }
            let mut per_batch: Vec<f64> = xs
                .chunks_exact(b)
                .map(|c| c.iter().map(|x| x.abs().powi(order)).sum::<f64>() / b as f64)
                .collect();
            per_batch.sort_by(f64::total_cmp);
            let k = per_batch.len();
            Ok(if k % 2 == 1 {
                per_batch[k / 2]
            } else {
                0.5 * (per_batch[k / 2 - 1] + per_batch[k / 2])
            })
        })
        .collect()
}
