//! Monte Carlo diagnostics for coefficient ensembles: second-order structure,
//! phase and ratio laws, marginal symmetry, complex correlations, and the
//! rotation-mixing test that separates Gaussian from independent
//! non-Gaussian coefficients.

mod ensemble;
mod isotropy;
pub mod ks;

use std::fmt;

use num_complex::Complex64;

pub use ensemble::Ensemble;
pub use isotropy::{
    batch_moment_profile, cauchy_cdf, cauchy_ratio_test, complex_correlation_test,
    covariance_diagnostic, phase_uniformity_test, rotation_mixing_gaussianity_test,
    rotation_mixing_with_replicates, symmetry_test, CorrelationSummary, CovarianceSummary,
    MIN_REPLICATES, MIXING_NULL_REPLICATES,
};
pub use ks::{ks_one_sample, ks_symmetry, ks_two_sample, kolmogorov_sf, sup_brownian_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Reject,
    /// The run was too small to support either conclusion.
    Inconclusive,
}

impl Verdict {
    pub fn from_p(p_value: f64, alpha: f64) -> Self {
        if p_value < alpha {
            Verdict::Reject
        } else {
            Verdict::Pass
        }
    }

    pub fn from_flags(flagged: bool) -> Self {
        if flagged {
            Verdict::Reject
        } else {
            Verdict::Pass
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Reject => "reject",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub test: String,
    pub l: Option<usize>,
    pub m: Option<i64>,
    pub statistic: f64,
    /// In `[0, 1]`; `NaN` for moment-flag diagnostics that have no p-value.
    pub p_value: f64,
    pub n: usize,
    pub alpha: f64,
    pub verdict: Verdict,
}

impl TestReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub(crate) fn at(mut self, l: usize, m: i64) -> Self {
        self.l = Some(l);
        self.m = Some(m);
        self
    }

    pub(crate) fn named(mut self, test: &str) -> Self {
        self.test = test.to_string();
        self
    }
}

/// Polar form `r e^{iθ}` of one coefficient, `θ ∈ [-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarSample {
    pub r: f64,
    pub theta: f64,
}

impl PolarSample {
    pub fn from_complex(z: Complex64) -> Self {
        let theta = z.im.atan2(z.re);
        let theta = if theta >= std::f64::consts::PI { -std::f64::consts::PI } else { theta };
        PolarSample { r: z.norm(), theta }
    }
}
