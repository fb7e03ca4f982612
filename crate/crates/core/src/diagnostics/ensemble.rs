use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{build_heavy_tail_realization, sample_coeffs, CoefficientSet, Distribution, HeavyTailFieldSpec, PowerSpectrum};

/// `N >= 2` independent replicates sharing a band limit, tagged with the
/// sampler label and the seed of replicate 0 (replicate `i` uses `seed_base + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    sets: Vec<CoefficientSet>,
    sampler: String,
    seed_base: u64,
}

impl Ensemble {
    pub fn new(sets: Vec<CoefficientSet>, sampler: impl Into<String>, seed_base: u64) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::TooFewSamples { need: 2, got: sets.len() });
        }
        let lmax = sets[0].lmax();
        if let Some(bad) = sets.iter().find(|s| s.lmax() != lmax) {
            return Err(Error::MixedProvenance(format!(
                "replicates have band limits {lmax} and {}",
                bad.lmax()
            )));
        }
        Ok(Self { sets, sampler: sampler.into(), seed_base })
    }

    /// Replicates of [`sample_coeffs`], generated in parallel and ordered by index.
    pub fn sample(spec: &PowerSpectrum, dist: Distribution, n: usize, seed_base: u64) -> Result<Self> {
        let sets = (0..n as u64)
            .into_par_iter()
            .map(|i| sample_coeffs(spec, dist, seed_base.wrapping_add(i)))
            .collect();
        Self::new(sets, dist.label(), seed_base)
    }

    /// Replicates of [`build_heavy_tail_realization`].
    pub fn heavy_tail(spec: &HeavyTailFieldSpec, n: usize, seed_base: u64) -> Result<Self> {
        let sets = (0..n as u64)
            .into_par_iter()
            .map(|i| build_heavy_tail_realization(spec, seed_base.wrapping_add(i)))
            .collect();
        Self::new(sets, "heavy-tail", seed_base)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn lmax(&self) -> usize {
        self.sets[0].lmax()
    }

    pub fn sampler(&self) -> &str {
        &self.sampler
    }

    pub fn seed_base(&self) -> u64 {
        self.seed_base
    }

    pub fn sets(&self) -> &[CoefficientSet] {
        &self.sets
    }

    pub fn into_sets(self) -> Vec<CoefficientSet> {
        self.sets
    }

    /// `a_lm` across replicates, negative `m` reconstructed.
    pub fn coefficient(&self, l: usize, m: i64) -> Result<Vec<Complex64>> {
        self.sets.iter().map(|s| s.get(l, m)).collect()
    }

    /// Concatenates ensembles with identical sampler and band limit.
    pub fn merge(parts: Vec<Ensemble>) -> Result<Self> {
        let mut iter = parts.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Config("no ensemble to merge".into()))?;
        let Ensemble { mut sets, sampler, seed_base } = first;
        for part in iter {
            if part.sampler != sampler {
                return Err(Error::MixedProvenance(format!(
                    "samplers '{}' and '{}' differ",
                    sampler, part.sampler
                )));
            }
            if part.lmax() != sets[0].lmax() {
                return Err(Error::MixedProvenance(format!(
                    "band limits {} and {} differ",
                    sets[0].lmax(),
                    part.lmax()
                )));
            }
            sets.extend(part.sets);
        }
        Self::new(sets, sampler, seed_base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_size_and_band_limit() {
        assert!(Ensemble::new(vec![CoefficientSet::zeros(2)], "x", 0).is_err());
        assert!(matches!(
            Ensemble::new(vec![CoefficientSet::zeros(2), CoefficientSet::zeros(3)], "x", 0),
            Err(Error::MixedProvenance(_))
        ));
    }

    #[test]
    fn parallel_generation_is_ordered() {
        let spec = PowerSpectrum::flat(3, 1.0).unwrap();
        let e = Ensemble::sample(&spec, Distribution::Gaussian, 64, 10).unwrap();
        for (i, s) in e.sets().iter().enumerate() {
            assert_eq!(*s, sample_coeffs(&spec, Distribution::Gaussian, 10 + i as u64));
        }
    }

    #[test]
    fn merge_rejects_mixed_samplers() {
        let spec = PowerSpectrum::flat(2, 1.0).unwrap();
        let a = Ensemble::sample(&spec, Distribution::Gaussian, 4, 0).unwrap();
        let b = Ensemble::sample(&spec, Distribution::Uniform, 4, 0).unwrap();
        assert!(matches!(Ensemble::merge(vec![a.clone(), b]), Err(Error::MixedProvenance(_))));
        assert_eq!(Ensemble::merge(vec![a.clone(), a]).unwrap().len(), 8);
    }
}
