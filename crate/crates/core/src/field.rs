//! Power spectra, band-limited coefficient sets, coefficient samplers and
//! the synthesis/analysis pair on a [`QuadratureGrid`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harmonics::{LegendreTable, QuadratureGrid};

/// Seeded generator used by every sampler: ChaCha with 8 rounds, seeded
/// through `SeedableRng::seed_from_u64`.
pub type FieldRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> FieldRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Angular power spectrum `C_0..=C_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    c: Vec<f64>,
}

impl PowerSpectrum {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::Domain("power spectrum needs at least C_0".into()));
        }
        if let Some((l, v)) = c.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("C_{l} = {v} is not a finite nonnegative value")));
        }
        Ok(Self { c })
    }

    /// `C_l = value` for every `l <= lmax`.
    pub fn flat(lmax: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; lmax + 1])
    }

    pub fn lmax(&self) -> usize {
        self.c.len() - 1
    }

    pub fn get(&self, l: usize) -> f64 {
        self.c[l]
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    pub fn truncated(&self, lmax: usize) -> Result<Self> {
        if lmax > self.lmax() {
            return Err(Error::Config(format!(
                "requested lmax {lmax} exceeds spectrum lmax {}",
                self.lmax()
            )));
        }
        Ok(Self { c: self.c[..=lmax].to_vec() })
    }
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Coefficients `a_lm` of a real band-limited field, stored for `m >= 0` only.
/// Negative orders follow from `a_{l,-m} = (-1)^m conj(a_lm)`; `a_l0` is real.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    lmax: usize,
    data: Vec<Complex64>,
}

impl CoefficientSet {
    pub fn zeros(lmax: usize) -> Self {
        Self { lmax, data: vec![Complex64::new(0.0, 0.0); tri(lmax, lmax) + 1] }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    fn check(&self, l: usize, m: i64) -> Result<()> {
        if l > self.lmax {
            return Err(Error::DegreeAbsent(l));
        }
        if m.unsigned_abs() as usize > l {
            return Err(Error::InvalidIndex { l: l as i64, m });
        }
        Ok(())
    }

    /// `a_lm` for any `|m| <= l`.
    pub fn get(&self, l: usize, m: i64) -> Result<Complex64> {
        self.check(l, m)?;
        let stored = self.data[tri(l, m.unsigned_abs() as usize)];
        Ok(if m >= 0 {
            stored
        } else if m % 2 == 0 {
            stored.conj()
        } else {
            -stored.conj()
        })
    }

    /// Stored value for `0 <= m <= l`.
    pub fn stored(&self, l: usize, m: usize) -> Complex64 {
        self.data[tri(l, m)]
    }

    /// Sets `a_lm` for `m >= 0`. A nonzero imaginary part at `m = 0` is rejected.
    pub fn set(&mut self, l: usize, m: i64, value: Complex64) -> Result<()> {
        self.check(l, m)?;
        if m < 0 {
            return Err(Error::Domain("negative orders are derived, not stored".into()));
        }
        if m == 0 && value.im != 0.0 {
            return Err(Error::Domain(format!(
                "a_({l},0) must be real, got imaginary part {}",
                value.im
            )));
        }
        self.data[tri(l, m as usize)] = value;
        Ok(())
    }

    /// Degree-`l` block in ascending order `m = -l..=l`.
    pub fn block_full(&self, l: usize) -> Result<Vec<Complex64>> {
        if l > self.lmax {
            return Err(Error::DegreeAbsent(l));
        }
        let li = l as i64;
        (-li..=li).map(|m| self.get(l, m)).collect()
    }

    /// Overwrites degree `l` from an ascending full block. The `m >= 0` half is
    /// kept; the imaginary part of `a_l0` is dropped.
    pub fn set_block_full(&mut self, l: usize, block: &[Complex64]) -> Result<()> {
        if l > self.lmax {
            return Err(Error::DegreeAbsent(l));
        }
        if block.len() != 2 * l + 1 {
            return Err(Error::Domain(format!(
                "degree {l} block needs {} entries, got {}",
                2 * l + 1,
                block.len()
            )));
        }
        self.data[tri(l, 0)] = Complex64::new(block[l].re, 0.0);
        for m in 1..=l {
            self.data[tri(l, m)] = block[l + m];
        }
        Ok(())
    }

    /// `Σ_l Σ_{m=-l..l} |a_lm|^2`.
    pub fn squared_norm(&self) -> f64 {
        (0..=self.lmax)
            .map(|l| {
                self.stored(l, 0).norm_sqr()
                    + 2.0 * (1..=l).map(|m| self.stored(l, m).norm_sqr()).sum::<f64>()
            })
            .sum()
    }

    /// Largest `|a_lm - b_lm|` over stored entries; sets must share `lmax`.
    pub fn max_abs_diff(&self, other: &CoefficientSet) -> f64 {
        assert_eq!(self.lmax, other.lmax, "band limits differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Shape of the per-coefficient law. All are centered and scaled to the
/// variance demanded by the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    Gaussian,
    Laplace,
    Uniform,
    Rademacher,
}

impl Distribution {
    pub fn label(&self) -> &'static str {
        match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Laplace => "laplace",
            Distribution::Uniform => "uniform",
            Distribution::Rademacher => "rademacher",
        }
    }

    /// Unit-variance centered draw.
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Gaussian => rng.sample(StandardNormal),
            Distribution::Laplace => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
            }
            Distribution::Uniform => {
                let u: f64 = rng.sample(Open01);
                3f64.sqrt() * (2.0 * u - 1.0)
            }
            Distribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Distribution::Gaussian),
            "laplace" => Ok(Distribution::Laplace),
            "uniform" => Ok(Distribution::Uniform),
            "rademacher" => Ok(Distribution::Rademacher),
            other => Err(Error::UnknownDistribution(other.to_string())),
        }
    }
}

/// Fills one degree with independent draws: `a_l0` with variance `c`, and
/// `Re a_lm`, `Im a_lm` each with variance `c/2` for `m >= 1`.
fn fill_degree<R: Rng>(set: &mut CoefficientSet, l: usize, c: f64, dist: Distribution, rng: &mut R) {
    let sd0 = c.sqrt();
    let sd = (0.5 * c).sqrt();
    set.data[tri(l, 0)] = Complex64::new(sd0 * dist.draw(rng), 0.0);
    for m in 1..=l {
        let re = sd * dist.draw(rng);
        let im = sd * dist.draw(rng);
        set.data[tri(l, m)] = Complex64::new(re, im);
    }
}

/// Independent coefficients with the given law, degree by degree in
/// increasing `(l, m)` order, real part before imaginary part.
pub fn sample_coeffs(spec: &PowerSpectrum, dist: Distribution, seed: u64) -> CoefficientSet {
    let mut rng = rng_from_seed(seed);
    let mut set = CoefficientSet::zeros(spec.lmax());
    for l in 0..=spec.lmax() {
        fill_degree(&mut set, l, spec.get(l), dist, &mut rng);
    }
    set
}

/// Coefficients of an isotropic Gaussian field with spectrum `spec`.
pub fn sample_gaussian_coeffs(spec: &PowerSpectrum, seed: u64) -> CoefficientSet {
    sample_coeffs(spec, Distribution::Gaussian, seed)
}

/// Independent non-Gaussian coefficients with the Gaussian sampler's first two
/// moments. `dist` is one of `laplace`, `uniform`, `rademacher`.
pub fn sample_independent_nongaussian(
    spec: &PowerSpectrum,
    dist: &str,
    seed: u64,
) -> Result<CoefficientSet> {
    match dist.parse()? {
        Distribution::Gaussian => Err(Error::UnknownDistribution(format!(
            "{dist} (not a non-Gaussian law)"
        ))),
        d => Ok(sample_coeffs(spec, d, seed)),
    }
}

/// Real field values on a quadrature grid, row-major `N_theta × N_phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    grid: QuadratureGrid,
    values: Vec<f64>,
}

impl FieldGrid {
    pub fn new(grid: QuadratureGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_theta() * grid.n_phi();
        if values.len() != expected {
            return Err(Error::Domain(format!(
                "grid has {expected} points but {} values were given",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i_theta: usize, i_phi: usize) -> f64 {
        self.values[i_theta * self.grid.n_phi() + i_phi]
    }

    /// Quadrature of `T^2` over the sphere.
    pub fn squared_integral(&self) -> f64 {
        let n_phi = self.grid.n_phi();
        let dphi = self.grid.phi_weight();
        self.grid
            .theta_weights()
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let ring: f64 = self.values[i * n_phi..(i + 1) * n_phi].iter().map(|v| v * v).sum();
                w * dphi * ring
            })
            .sum()
    }
}

/// `T(θ, φ) = Σ_l Σ_{m=-l..l} a_lm Y_lm(θ, φ)` on every grid point.
pub fn synthesize(a: &CoefficientSet, grid: &QuadratureGrid) -> Result<FieldGrid> {
    let lmax = a.lmax();
    if grid.lmax_exact() < lmax {
        return Err(Error::GridTooCoarse { need: lmax, have: grid.lmax_exact() });
    }
    let n_phi = grid.n_phi();
    let mut values = Vec::with_capacity(grid.n_theta() * n_phi);
    let mut ring = vec![Complex64::new(0.0, 0.0); lmax + 1];
    for &x in grid.cos_thetas() {
        let table = LegendreTable::new(lmax, x)?;
        for (m, f) in ring.iter_mut().enumerate() {
            *f = (m..=lmax).map(|l| a.stored(l, m) * table.get(l, m)).sum();
        }
        for &phi in grid.phis() {
            let mut total = ring[0];
            let mut scale = ring[0].norm();
            for (m, f) in ring.iter().enumerate().skip(1) {
                let e = Complex64::from_polar(1.0, m as f64 * phi);
                let pos = f * e;
                // order -m: (-1)^m conj(F_m) times (-1)^m conj(e)
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let neg = (f.conj() * sign) * (e.conj() * sign);
                total += pos + neg;
                scale += 2.0 * pos.norm();
            }
            if total.im.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::ImaginaryResidue(total.im));
            }
            values.push(total.re);
        }
    }
    FieldGrid::new(grid.clone(), values)
}

/// `a_lm = ∫ T conj(Y_lm) dx` evaluated by the grid quadrature.
pub fn analyze(f: &FieldGrid, lmax: usize) -> Result<CoefficientSet> {
    let grid = f.grid();
    if grid.lmax_exact() < lmax {
        return Err(Error::GridTooCoarse { need: lmax, have: grid.lmax_exact() });
    }
    let n_phi = grid.n_phi();
    let dphi = grid.phi_weight();
    let mut out = CoefficientSet::zeros(lmax);
    let mut ring = vec![Complex64::new(0.0, 0.0); lmax + 1];
    for (i, (&x, &w)) in grid.cos_thetas().iter().zip(grid.theta_weights()).enumerate() {
        let row = &f.values()[i * n_phi..(i + 1) * n_phi];
        for (m, g) in ring.iter_mut().enumerate() {
            *g = row
                .iter()
                .zip(grid.phis())
                .map(|(t, &phi)| Complex64::from_polar(*t, -(m as f64) * phi))
                .sum::<Complex64>()
                * dphi;
        }
        let table = LegendreTable::new(lmax, x)?;
        for l in 0..=lmax {
            for (m, g) in ring.iter().enumerate().take(l + 1) {
                out.data[tri(l, m)] += g * (w * table.get(l, m));
            }
        }
    }
    for l in 0..=lmax {
        out.data[tri(l, 0)].im = 0.0;
    }
    Ok(out)
}

/// Three-degree field whose last degree is multiplied by one shared
/// Cauchy variable `η`: finite variance at `l1`, `l2`, infinite at `l3`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTailFieldSpec {
    degrees: [usize; 3],
    base_spectrum: [f64; 3],
    eta_scale: f64,
}

impl HeavyTailFieldSpec {
    pub fn new(l1: usize, l2: usize, l3: usize, base_spectrum: [f64; 3], eta_scale: f64) -> Result<Self> {
        if l1 == l2 || l1 == l3 || l2 == l3 {
            return Err(Error::Domain(format!("degrees {l1}, {l2}, {l3} must be distinct")));
        }
        if base_spectrum.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Domain("base spectrum values must be positive".into()));
        }
        if !(eta_scale.is_finite() && eta_scale >= 0.0) {
            return Err(Error::Domain(format!("eta scale {eta_scale} must be finite and >= 0")));
        }
        Ok(Self { degrees: [l1, l2, l3], base_spectrum, eta_scale })
    }

    pub fn degrees(&self) -> [usize; 3] {
        self.degrees
    }

    pub fn base_spectrum(&self) -> [f64; 3] {
        self.base_spectrum
    }

    pub fn eta_scale(&self) -> f64 {
        self.eta_scale
    }

    pub fn lmax(&self) -> usize {
        *self.degrees.iter().max().unwrap()
    }
}

/// One realization: Gaussian blocks at `l1`, `l2` and `η ×` Gaussian block at `l3`.
pub fn build_heavy_tail_realization(spec: &HeavyTailFieldSpec, seed: u64) -> CoefficientSet {
    let mut rng = rng_from_seed(seed);
    let mut set = CoefficientSet::zeros(spec.lmax());
    for (&l, &c) in spec.degrees.iter().zip(&spec.base_spectrum) {
        fill_degree(&mut set, l, c, Distribution::Gaussian, &mut rng);
    }
    let u: f64 = rng.sample(Open01);
    let eta = spec.eta_scale * (PI * (u - 0.5)).tan();
    let l3 = spec.degrees[2];
    for m in 0..=l3 {
        set.data[tri(l3, m)] *= eta;
    }
    set
}
