//! Wigner small-d and D matrices, and rotation of coefficient blocks.
//!
//! `D^l_{m m'}(α, β, γ) = e^{-i m α} d^l_{m m'}(β) e^{-i m' γ}`, rows and columns
//! in ascending order `m = -l..=l`. The matrix acts on harmonic vectors as
//! `Y_l(g·x) = D^l(g) Y_l(x)`, where `g·x` applies
//! `R_z(-α) R_y(β) R_z(-γ)` to the unit vector of `x`.
//!
//! `d^l(β)` is evaluated through Jacobi polynomials (three-term recurrence)
//! with log-factorial prefactors, so it never forms `(2l)!` directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::field::CoefficientSet;
use crate::harmonics::{wrap_two_pi, SphericalPoint};

pub type Matrix3 = [[f64; 3]; 3];

/// z-y-z Euler angles, `α, γ ∈ [0, 2π)`, `β ∈ [0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl EulerAngles {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let two_pi = 2.0 * PI;
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidAngles("non-finite angle".into()));
        }
        if !(0.0..two_pi).contains(&alpha) || !(0.0..two_pi).contains(&gamma) {
            return Err(Error::InvalidAngles(format!(
                "alpha={alpha}, gamma={gamma} must lie in [0, 2pi)"
            )));
        }
        if !(0.0..=PI).contains(&beta) {
            return Err(Error::InvalidAngles(format!("beta={beta} must lie in [0, pi]")));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// Like [`new`](Self::new) but reduces `alpha` and `gamma` modulo 2π first.
    pub fn wrapped(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(wrap_two_pi(alpha), beta, wrap_two_pi(gamma))
    }

    pub fn identity() -> Self {
        Self { alpha: 0.0, beta: 0.0, gamma: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The 3×3 rotation `R_z(-α) R_y(β) R_z(-γ)` realizing this element on `R^3`.
    pub fn rotation_matrix(&self) -> Matrix3 {
        mat_mul(&mat_mul(&rot_z(-self.alpha), &rot_y(self.beta)), &rot_z(-self.gamma))
    }

    /// Recovers the angles of a rotation matrix. At the gimbal poles
    /// `β ∈ {0, π}` the split between `α` and `γ` is fixed by `γ = 0`.
    pub fn from_rotation_matrix(r: &Matrix3) -> Result<Self> {
        // r = R_z(a) R_y(b) R_z(c) with a = -alpha, c = -gamma
        let cb = r[2][2].clamp(-1.0, 1.0);
        let beta = cb.acos();
        let sb = (r[0][2].powi(2) + r[1][2].powi(2)).sqrt();
        let (a, c) = if sb < 1e-12 {
            if cb > 0.0 {
                (r[1][0].atan2(r[0][0]), 0.0)
            } else {
                ((-r[1][0]).atan2(-r[0][0]), 0.0)
            }
        } else {
            (r[1][2].atan2(r[0][2]), r[2][1].atan2(-r[2][0]))
        };
        let beta = if sb < 1e-12 { if cb > 0.0 { 0.0 } else { PI } } else { beta };
        Self::wrapped(-a, beta, -c)
    }

    /// Group product `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &EulerAngles) -> Result<EulerAngles> {
        Self::from_rotation_matrix(&mat_mul(&self.rotation_matrix(), &other.rotation_matrix()))
    }

    pub fn rotate_point(&self, p: SphericalPoint) -> Result<SphericalPoint> {
        SphericalPoint::from_unit_vector(mat_vec(&self.rotation_matrix(), p.to_unit_vector()))
    }
}

fn rot_z(t: f64) -> Matrix3 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(t: f64) -> Matrix3 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(a: &Matrix3, v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (0..3).map(|k| a[i][k] * v[k]).sum();
    }
    out
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` by the standard three-term recurrence.
fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let mut p_prev = 1.0;
    if n == 0 {
        return p_prev;
    }
    let mut p = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let next = (c2 * p - c3 * p_prev) / c1;
        p_prev = p;
        p = next;
    }
    p
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn check_order(l: usize, m: i64) -> Result<()> {
    if m.unsigned_abs() as usize > l {
        return Err(Error::InvalidIndex { l: l as i64, m });
    }
    Ok(())
}

/// Wigner small-d element `d^l_{m mp}(β)`. Exactly `δ_{m,mp}` at `β = 0`.
pub fn wigner_small_d(l: usize, m: i64, mp: i64, beta: f64) -> Result<f64> {
    check_order(l, m)?;
    check_order(l, mp)?;
    if !(0.0..=PI).contains(&beta) {
        return Err(Error::InvalidAngles(format!("beta={beta} must lie in [0, pi]")));
    }
    Ok(small_d_unchecked(l as i64, m, mp, beta))
}

fn small_d_unchecked(j: i64, m_row: i64, m_col: i64, beta: f64) -> f64 {
    if beta == 0.0 {
        return if m_row == m_col { 1.0 } else { 0.0 };
    }
    let k = (j + m_col).min(j - m_col).min(j + m_row).min(j - m_row);
    let (a, lambda) = if k == j + m_col {
        (m_row - m_col, m_row - m_col)
    } else if k == j - m_col || k == j + m_row {
        (m_col - m_row, 0)
    } else {
        (m_row - m_col, m_row - m_col)
    };
    let b = 2 * j - 2 * k - a;
    let ln_norm = 0.5
        * (ln_binomial((2 * j - k) as u64, (k + a) as u64)
            - ln_binomial((k + b) as u64, b as u64));
    let (s, c) = (0.5 * beta).sin_cos();
    let sign = if lambda.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * ln_norm.exp()
        * s.powi(a as i32)
        * c.powi(b as i32)
        * jacobi(k as usize, a as f64, b as f64, beta.cos())
}

/// Dense `(2l+1)×(2l+1)` complex matrix in ascending-order indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerDMatrix {
    l: usize,
    entries: Vec<Complex64>,
}

impl WignerDMatrix {
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        2 * self.l + 1
    }

    /// Entry `D_{m, mp}`.
    pub fn get(&self, m: i64, mp: i64) -> Complex64 {
        let l = self.l as i64;
        self.entries[((m + l) as usize) * self.dim() + (mp + l) as usize]
    }

    /// Row-major entries, `(row, col)` at `row * dim + col`.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn mul(&self, other: &WignerDMatrix) -> WignerDMatrix {
        assert_eq!(self.l, other.l, "degree mismatch");
        let n = self.dim();
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                for j in 0..n {
                    entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        WignerDMatrix { l: self.l, entries }
    }

    pub fn conj_transpose(&self) -> WignerDMatrix {
        let n = self.dim();
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        WignerDMatrix { l: self.l, entries }
    }

    pub fn max_abs_diff(&self, other: &WignerDMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |D D* - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.mul(&self.conj_transpose());
        let n = self.dim();
        prod.entries
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let target = if k / n == k % n { 1.0 } else { 0.0 };
                (v - target).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `D v` for a column vector in ascending order.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| self.entries[i * n + j] * v[j]).sum())
            .collect()
    }

    /// `v D` for a row vector in ascending order.
    pub fn apply_row(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|j| (0..n).map(|i| v[i] * self.entries[i * n + j]).sum())
            .collect()
    }
}

/// `D^l(g)`.
pub fn wigner_d_matrix(l: usize, g: &EulerAngles) -> WignerDMatrix {
    let li = l as i64;
    let n = 2 * l + 1;
    let mut entries = Vec::with_capacity(n * n);
    for m in -li..=li {
        let left = Complex64::from_polar(1.0, -(m as f64) * g.alpha);
        for mp in -li..=li {
            let right = Complex64::from_polar(1.0, -(mp as f64) * g.gamma);
            let d = small_d_unchecked(li, m, mp, g.beta);
            entries.push(left * d * right);
        }
    }
    WignerDMatrix { l, entries }
}

/// `b_m = Σ_{m'} a_{l m'} D^l_{m' m}(g)`, the degree-`l` block treated as a
/// row vector. Returned in ascending order `m = -l..=l`.
pub fn rotate_coeffs(a: &CoefficientSet, l: usize, g: &EulerAngles) -> Result<Vec<Complex64>> {
    let block = a.block_full(l)?;
    Ok(wigner_d_matrix(l, g).apply_row(&block))
}

/// Every degree block of `a` rotated by [`rotate_coeffs`].
pub fn rotate_coefficient_set(a: &CoefficientSet, g: &EulerAngles) -> Result<CoefficientSet> {
    let mut out = CoefficientSet::zeros(a.lmax());
    for l in 0..=a.lmax() {
        out.set_block_full(l, &rotate_coeffs(a, l, g)?)?;
    }
    Ok(out)
}

/// `max |D(g1) D(g2) - D(g1 ∘ g2)|` with the product formed on 3×3 matrices.
pub fn compose_check(l: usize, g1: &EulerAngles, g2: &EulerAngles) -> Result<f64> {
    let g12 = g1.compose(g2)?;
    let lhs = wigner_d_matrix(l, g1).mul(&wigner_d_matrix(l, g2));
    Ok(lhs.max_abs_diff(&wigner_d_matrix(l, &g12)))
}
