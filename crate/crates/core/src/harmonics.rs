//! Associated Legendre functions, spherical harmonics and the
//! Gauss–Legendre × equiangular quadrature grid.
//!
//! Normalized functions are produced by the three-term recurrence in the
//! degree, started from a diagonal value that is itself built as a running
//! product of ratios. No factorial is ever formed, so the values stay finite
//! far beyond the degree where `(l+m)!` overflows a double.
//!
//! Conventions:
//! - the Condon–Shortley factor `(-1)^m` lives inside `P_lm`;
//! - `Y_{l,-m} = (-1)^m conj(Y_lm)`;
//! - vectors over the order are stored in ascending order `m = -l..=l`, so
//!   order `m` sits at offset `m + l`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Point on the unit sphere, colatitude `theta ∈ [0, π]`, longitude `phi ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    theta: f64,
    phi: f64,
}

impl SphericalPoint {
    /// Builds a point, reducing `phi` modulo 2π. Rejects colatitudes outside `[0, π]`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Domain(format!("non-finite coordinates ({theta}, {phi})")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain(format!("colatitude {theta} outside [0, pi]")));
        }
        Ok(Self { theta, phi: wrap_two_pi(phi) })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn to_unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Inverse of [`to_unit_vector`](Self::to_unit_vector); the input is normalized first.
    pub fn from_unit_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("cannot project the zero vector onto the sphere".into()));
        }
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        Self::new(z.acos(), v[1].atan2(v[0]))
    }
}

pub(crate) fn wrap_two_pi(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Degree/order pair `(l, m)` with `|m| <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    l: usize,
    m: i64,
}

impl HarmonicIndex {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::InvalidIndex { l: l as i64, m });
        }
        Ok(Self { l, m })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    /// Position of this order inside an ascending `m = -l..=l` vector.
    pub fn offset(&self) -> usize {
        (self.m + self.l as i64) as usize
    }
}

fn check_argument(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("Legendre argument {x} outside [-1, 1]")));
    }
    Ok(())
}

/// Normalized diagonal value `N_mm P_mm(x)` given `s = sqrt(1 - x^2)`.
fn diagonal_start(m: usize, s: f64) -> f64 {
    let mut p = (0.25 / PI).sqrt();
    for k in 1..=m {
        let k = k as f64;
        p *= -((2.0 * k + 1.0) / (2.0 * k)).sqrt() * s;
    }
    p
}

/// Runs the degree recurrence for fixed order `m`, calling `emit(l, value)`
/// for `l = m..=lmax`.
fn run_column(lmax: usize, m: usize, x: f64, mut emit: impl FnMut(usize, f64)) {
    let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut p_prev = diagonal_start(m, s);
    emit(m, p_prev);
    if lmax == m {
        return;
    }
    let mf = m as f64;
    let mut p_cur = x * (2.0 * mf + 3.0).sqrt() * p_prev;
    emit(m + 1, p_cur);
    for l in (m + 2)..=lmax {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lm1 = lf - 1.0;
        let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
        let p_next = a * (x * p_cur - b * p_prev);
        emit(l, p_next);
        p_prev = p_cur;
        p_cur = p_next;
    }
}

/// `N_lm P_lm(x)` with `N_lm = sqrt((2l+1)/(4π) (l-m)!/(l+m)!)`, Condon–Shortley
/// phase included. Only `m >= 0` is accepted here; negative orders are handled
/// at the harmonic level.
pub fn assoc_legendre_normalized(idx: HarmonicIndex, x: f64) -> Result<f64> {
    check_argument(x)?;
    if idx.m < 0 {
        return Err(Error::Domain(format!(
            "normalized Legendre function takes m >= 0, got m={}",
            idx.m
        )));
    }
    let mut out = 0.0;
    run_column(idx.l, idx.m as usize, x, |l, v| {
        if l == idx.l {
            out = v;
        }
    });
    Ok(out)
}

/// All `N_lm P_lm(x)` for `0 <= m <= l <= lmax`, packed triangularly.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    lmax: usize,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn new(lmax: usize, x: f64) -> Result<Self> {
        check_argument(x)?;
        let mut values = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
        for m in 0..=lmax {
            run_column(lmax, m, x, |l, v| values[l * (l + 1) / 2 + m] = v);
        }
        Ok(Self { lmax, values })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Value at `(l, m)`, `0 <= m <= l <= lmax`.
    pub fn get(&self, l: usize, m: usize) -> f64 {
        debug_assert!(m <= l && l <= self.lmax);
        self.values[l * (l + 1) / 2 + m]
    }
}

fn apply_order(lambda: f64, m: i64, phi: f64) -> Complex64 {
    if m == 0 {
        return Complex64::new(lambda, 0.0);
    }
    let mabs = m.unsigned_abs() as f64;
    let (s, c) = (mabs * phi).sin_cos();
    let positive = Complex64::new(lambda * c, lambda * s);
    if m > 0 {
        positive
    } else if m % 2 == 0 {
        positive.conj()
    } else {
        -positive.conj()
    }
}

/// Complex spherical harmonic `Y_lm(theta, phi)`.
pub fn sph_harm(idx: HarmonicIndex, p: SphericalPoint) -> Complex64 {
    let m_abs = idx.m.unsigned_abs() as usize;
    let mut lambda = 0.0;
    run_column(idx.l, m_abs, p.theta.cos(), |l, v| {
        if l == idx.l {
            lambda = v;
        }
    });
    apply_order(lambda, idx.m, p.phi)
}

/// `(Y_{l,-l}, ..., Y_{l,l})(p)`, ascending order.
pub fn sph_harm_vector(l: usize, p: SphericalPoint) -> Vec<Complex64> {
    let x = p.theta.cos();
    let mut lambdas = vec![0.0; l + 1];
    for (m, slot) in lambdas.iter_mut().enumerate() {
        run_column(l, m, x, |deg, v| {
            if deg == l {
                *slot = v;
            }
        });
    }
    (-(l as i64)..=l as i64)
        .map(|m| apply_order(lambdas[m.unsigned_abs() as usize], m, p.phi))
        .collect()
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes in descending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(n, x);
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm1) = legendre_pair(n, x);
        if p.abs() > 0.0 {
            dp = nf * (x * p - pm1) / (x * x - 1.0);
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        let j = n - 1 - i;
        if i == j {
            nodes[i] = 0.0;
            weights[i] = w;
        } else {
            nodes[i] = x;
            nodes[j] = -x;
            weights[i] = w;
            weights[j] = w;
        }
    }
    (nodes, weights)
}

/// `(P_n(x), P_{n-1}(x))` for the unnormalized Legendre polynomials.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Gauss–Legendre nodes in `cos(theta)` times equispaced longitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    thetas: Vec<f64>,
    cos_thetas: Vec<f64>,
    theta_weights: Vec<f64>,
    phis: Vec<f64>,
    lmax_exact: usize,
}

/// Grid integrating products of two harmonics of degree `<= lmax` exactly:
/// `lmax + 1` colatitude nodes and `2 lmax + 1` longitudes.
pub fn make_grid(lmax: usize) -> QuadratureGrid {
    let (nodes, weights) = gauss_legendre(lmax + 1);
    QuadratureGrid::from_parts(nodes, weights, 2 * lmax + 1)
        .expect("Gauss-Legendre nodes are always valid")
}

impl QuadratureGrid {
    /// Rebuilds a grid from stored `cos(theta)` nodes, weights and a longitude count.
    pub fn from_parts(cos_thetas: Vec<f64>, theta_weights: Vec<f64>, n_phi: usize) -> Result<Self> {
        if cos_thetas.is_empty() || n_phi == 0 {
            return Err(Error::Domain("grid needs at least one node in each direction".into()));
        }
        if cos_thetas.len() != theta_weights.len() {
            return Err(Error::Domain(format!(
                "{} colatitude nodes but {} weights",
                cos_thetas.len(),
                theta_weights.len()
            )));
        }
        if let Some(x) = cos_thetas.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("node {x} outside [-1, 1]")));
        }
        if let Some(w) = theta_weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Domain(format!("non-positive quadrature weight {w}")));
        }
        let n_theta = cos_thetas.len();
        let lmax_exact = (n_theta - 1).min((n_phi - 1) / 2);
        let step = 2.0 * PI / n_phi as f64;
        Ok(Self {
            thetas: cos_thetas.iter().map(|x| x.acos()).collect(),
            cos_thetas,
            theta_weights,
            phis: (0..n_phi).map(|k| k as f64 * step).collect(),
            lmax_exact,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn cos_thetas(&self) -> &[f64] {
        &self.cos_thetas
    }

    pub fn theta_weights(&self) -> &[f64] {
        &self.theta_weights
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phis.len()
    }

    pub fn lmax_exact(&self) -> usize {
        self.lmax_exact
    }

    /// Longitude weight `2π / N_phi` shared by every column.
    pub fn phi_weight(&self) -> f64 {
        2.0 * PI / self.phis.len() as f64
    }

    /// Grid points in row-major `(theta, phi)` order.
    pub fn points(&self) -> impl Iterator<Item = SphericalPoint> + '_ {
        self.thetas.iter().flat_map(move |&t| {
            self.phis.iter().map(move |&p| SphericalPoint { theta: t, phi: p })
        })
    }

    /// Quadrature of `f` over the sphere with respect to `sin(theta) dtheta dphi`.
    pub fn integrate<T>(&self, mut f: impl FnMut(SphericalPoint) -> T) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let dphi = self.phi_weight();
        let mut total = T::default();
        for (&t, &w) in self.thetas.iter().zip(&self.theta_weights) {
            let mut ring = T::default();
            for &p in &self.phis {
                ring = ring + f(SphericalPoint { theta: t, phi: p });
            }
            total = total + ring * (w * dphi);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Coefficients of `P_lm(x) / (1-x^2)^{m/2}` obtained by expanding
    /// `(x^2-1)^l`, differentiating `l+m` times and applying the Rodrigues
    /// prefactor and the Condon–Shortley sign. Exact for small degrees.
    fn rodrigues_poly(l: usize, m: usize) -> Vec<f64> {
        // (x^2 - 1)^l = sum_k C(l,k) (-1)^(l-k) x^(2k)
        let mut c = vec![0.0; 2 * l + 1];
        let mut binom = 1.0;
        for k in 0..=l {
            if k > 0 {
                binom = binom * (l - k + 1) as f64 / k as f64;
            }
            c[2 * k] = binom * if (l - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        }
        for _ in 0..(l + m) {
            c = (1..c.len()).map(|i| c[i] * i as f64).collect();
            if c.is_empty() {
                c.push(0.0);
            }
        }
        let fact: f64 = (1..=l).map(|k| k as f64).product();
        let scale = if m.is_multiple_of(2) { 1.0 } else { -1.0 } / (2f64.powi(l as i32) * fact);
        c.iter().map(|v| v * scale).collect()
    }

    fn rodrigues_normalized(l: usize, m: usize, x: f64) -> f64 {
        let poly = rodrigues_poly(l, m);
        let mut acc = 0.0;
        for c in poly.iter().rev() {
            acc = acc * x + c;
        }
        let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| k as f64).product();
        let norm = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
        norm * (1.0 - x * x).powf(m as f64 / 2.0) * acc
    }

    fn idx(l: usize, m: i64) -> HarmonicIndex {
        HarmonicIndex::new(l, m).unwrap()
    }

    #[test]
    fn legendre_examples() {
        let v = assoc_legendre_normalized(idx(0, 0), 0.3).unwrap();
        assert_abs_diff_eq!(v, 1.0 / (4.0 * PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.2820948, epsilon = 1e-7);

        let v = assoc_legendre_normalized(idx(1, 0), 0.3).unwrap();
        assert_abs_diff_eq!(v, (3.0 / (4.0 * PI)).sqrt() * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.1465808, epsilon = 1e-7);

        let v = assoc_legendre_normalized(idx(1, 1), 0.0).unwrap();
        assert_abs_diff_eq!(v, -(3.0 / (8.0 * PI)).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, -0.3454941, epsilon = 1e-7);

        let v = assoc_legendre_normalized(idx(2, 0), 0.5).unwrap();
        assert_abs_diff_eq!(v, (5.0 / (4.0 * PI)).sqrt() * -0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(v, -0.0788479, epsilon = 1e-7);
    }

    #[test]
    fn recurrence_matches_rodrigues_oracle() {
        for l in 0..=4 {
            for m in 0..=l {
                for k in 0..=20 {
                    let x = -1.0 + 0.1 * k as f64;
                    let got = assoc_legendre_normalized(idx(l, m as i64), x).unwrap();
                    let want = rodrigues_normalized(l, m, x);
                    assert_abs_diff_eq!(got, want, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn legendre_rejects_bad_input() {
        assert!(matches!(
            assoc_legendre_normalized(idx(2, 1), 1.5),
            Err(Error::Domain(_))
        ));
        assert!(HarmonicIndex::new(2, 3).is_err());
        assert!(HarmonicIndex::new(2, -3).is_err());
        assert!(assoc_legendre_normalized(idx(2, -1), 0.1).is_err());
    }

    #[test]
    fn high_degree_stays_finite_and_bounded() {
        for &x in &[-1.0, -0.999, -0.3, 0.0, 0.5, 0.9999, 1.0] {
            let table = LegendreTable::new(1024, x).unwrap();
            for l in [0usize, 1, 85, 170, 500, 1024] {
                let bound = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * (1.0 + 1e-12);
                for m in [0, l / 3, l / 2, l] {
                    let v = table.get(l, m);
                    assert!(v.is_finite());
                    assert!(v.abs() <= bound, "l={l} m={m} x={x} v={v}");
                }
            }
        }
    }

    #[test]
    fn table_agrees_with_single_evaluation() {
        let table = LegendreTable::new(12, 0.37).unwrap();
        for l in 0..=12 {
            for m in 0..=l {
                let single = assoc_legendre_normalized(idx(l, m as i64), 0.37).unwrap();
                assert_eq!(table.get(l, m), single);
            }
        }
    }

    #[test]
    fn harmonic_examples() {
        let p = SphericalPoint::new(1.1, 4.0).unwrap();
        let y00 = sph_harm(idx(0, 0), p);
        assert_abs_diff_eq!(y00.re, 0.2820948, epsilon = 1e-7);
        assert_eq!(y00.im, 0.0);

        let north = SphericalPoint::new(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(sph_harm(idx(1, 0), north).re, 0.4886025, epsilon = 1e-7);

        let y1m1 = sph_harm(idx(1, -1), p);
        let y11 = sph_harm(idx(1, 1), p);
        assert_eq!(y1m1, -y11.conj());
    }

    #[test]
    fn conjugation_is_exact() {
        let p = SphericalPoint::new(0.77, 2.3).unwrap();
        for l in 0..=10usize {
            for m in 1..=l as i64 {
                let pos = sph_harm(idx(l, m), p);
                let neg = sph_harm(idx(l, -m), p);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(neg, pos.conj() * sign);
            }
            assert_eq!(sph_harm(idx(l, 0), p).im, 0.0);
        }
    }

    #[test]
    fn vector_ordering_and_examples() {
        let p = SphericalPoint::new(0.4, 1.9).unwrap();
        assert_abs_diff_eq!(sph_harm_vector(0, p)[0].re, 0.2820948, epsilon = 1e-7);

        let equator = SphericalPoint::new(PI / 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(sph_harm_vector(1, equator)[1].norm(), 0.0, epsilon = 1e-16);

        let v = sph_harm_vector(3, p);
        for m in -3..=3i64 {
            assert_eq!(v[(m + 3) as usize], sph_harm(idx(3, m), p));
        }
    }

    #[test]
    fn addition_theorem_at_zero_angle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = SphericalPoint::new(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI))
                .unwrap();
            let s: f64 = sph_harm_vector(1, p).iter().map(|y| y.norm_sqr()).sum();
            assert_abs_diff_eq!(s, 3.0 / (4.0 * PI), epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_examples() {
        let g0 = make_grid(0);
        assert_eq!(g0.cos_thetas(), &[0.0]);
        assert_eq!(g0.theta_weights(), &[2.0]);
        assert_eq!(g0.phis(), &[0.0]);
        assert_eq!(g0.lmax_exact(), 0);

        let g1 = make_grid(1);
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(g1.cos_thetas()[0], r, epsilon = 1e-15);
        assert_abs_diff_eq!(g1.cos_thetas()[1], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(g1.theta_weights()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g1.theta_weights()[1], 1.0, epsilon = 1e-15);
        assert_eq!(g1.n_phi(), 3);
    }

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for n in 1..=24usize {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert_abs_diff_eq!(got, want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for lmax in 0..=64 {
            let s: f64 = make_grid(lmax).theta_weights().iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn phis_are_exact_multiples() {
        let g = make_grid(7);
        for (k, &p) in g.phis().iter().enumerate() {
            assert_eq!(p, k as f64 * (2.0 * PI / 15.0));
        }
    }

    #[test]
    fn point_normalizes_longitude() {
        let p = SphericalPoint::new(1.0, -0.5).unwrap();
        assert_abs_diff_eq!(p.phi(), 2.0 * PI - 0.5, epsilon = 1e-15);
        assert!(SphericalPoint::new(-0.1, 0.0).is_err());
        assert!(SphericalPoint::new(3.2, 0.0).is_err());
        let q = SphericalPoint::from_unit_vector(p.to_unit_vector()).unwrap();
        assert_abs_diff_eq!(q.theta(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.phi(), p.phi(), epsilon = 1e-14);
    }
}
