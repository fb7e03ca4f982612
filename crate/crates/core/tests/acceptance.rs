//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each;
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use isofield::diagnostics::{
    batch_moment_profile, cauchy_ratio_test, covariance_diagnostic, phase_uniformity_test,
    rotation_mixing_gaussianity_test, symmetry_test, Ensemble, Verdict,
};
use isofield::field::{
    analyze, sample_gaussian_coeffs, synthesize, Distribution, HeavyTailFieldSpec, PowerSpectrum,
};
use isofield::harmonics::{make_grid, sph_harm_vector, SphericalPoint};
use isofield::wigner::{compose_check, wigner_d_matrix, wigner_small_d, EulerAngles};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_angles(rng: &mut ChaCha8Rng) -> EulerAngles {
    let a = rng.random::<f64>() * 2.0 * PI;
    let b = (2.0 * rng.random::<f64>() - 1.0).clamp(-1.0, 1.0).acos();
    let g = rng.random::<f64>() * 2.0 * PI;
    EulerAngles::new(a, b, g).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng) -> SphericalPoint {
    let t = (2.0 * rng.random::<f64>() - 1.0).clamp(-1.0, 1.0).acos();
    SphericalPoint::new(t, rng.random::<f64>() * 2.0 * PI).unwrap()
}

fn flat(lmax: usize) -> PowerSpectrum {
    PowerSpectrum::flat(lmax, 1.0).unwrap()
}

fn orthonormality() -> Check {
    let lmax = 16;
    let grid = make_grid(32);
    let dim = (lmax + 1) * (lmax + 1);
    let mut gram = vec![Complex64::new(0.0, 0.0); dim * dim];
    let dphi = grid.phi_weight();
    for (i, &t) in grid.thetas().iter().enumerate() {
        let w = grid.theta_weights()[i] * dphi;
        for &p in grid.phis() {
            let pt = SphericalPoint::new(t, p).unwrap();
            let y: Vec<Complex64> = (0..=lmax).flat_map(|l| sph_harm_vector(l, pt)).collect();
            for r in 0..dim {
                let yr = y[r] * w;
                for c in 0..dim {
                    gram[r * dim + c] += yr * y[c].conj();
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((gram[r * dim + c] - target).norm());
        }
    }
    ensure(worst < 1e-10, || format!("max |G - I| = {worst:e}"))?;
    Ok(format!("{dim}x{dim} Gram matrix on make_grid(32), max |G - I| = {worst:.2e}"))
}

fn wigner_certification() -> Check {
    for l in 0..=16usize {
        let li = l as i64;
        for m in -li..=li {
            for mp in -li..=li {
                let d = wigner_small_d(l, m, mp, 0.0).map_err(|e| e.to_string())?;
                let want = if m == mp { 1.0 } else { 0.0 };
                ensure(d == want, || format!("d^{l}_{m},{mp}(0) = {d}"))?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut unitarity, mut representation): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let g1 = random_angles(&mut rng);
        let g2 = random_angles(&mut rng);
        for l in 0..=16 {
            unitarity = unitarity.max(wigner_d_matrix(l, &g1).unitarity_defect());
            representation = representation.max(compose_check(l, &g1, &g2).map_err(|e| e.to_string())?);
        }
    }
    ensure(unitarity < 1e-10, || format!("unitarity defect {unitarity:e}"))?;
    ensure(representation < 1e-8, || format!("representation deviation {representation:e}"))?;

    let mut transform: f64 = 0.0;
    for _ in 0..200 {
        let g = random_angles(&mut rng);
        let p = random_point(&mut rng);
        let gp = g.rotate_point(p).map_err(|e| e.to_string())?;
        for l in 0..=8 {
            let lhs = sph_harm_vector(l, gp);
            let rhs = wigner_d_matrix(l, &g).apply(&sph_harm_vector(l, p));
            for (a, b) in lhs.iter().zip(&rhs) {
                transform = transform.max((a - b).norm());
            }
        }
    }
    ensure(transform < 1e-8, || format!("|Y(g.p) - D(g)Y(p)| = {transform:e}"))?;
    Ok(format!(
        "d(0) exact; unitarity {unitarity:.1e}, representation {representation:.1e}, transform law {transform:.1e}"
    ))
}

fn round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut err, mut parseval): (f64, f64) = (0.0, 0.0);
    for trial in 0..60u64 {
        let lmax = rng.random_range(0..=16usize);
        let spec = PowerSpectrum::new((0..=lmax).map(|_| rng.random::<f64>() * 4.0).collect()).unwrap();
        let a = sample_gaussian_coeffs(&spec, 1000 + trial);
        let f = synthesize(&a, &make_grid(lmax)).map_err(|e| e.to_string())?;
        let back = analyze(&f, lmax).map_err(|e| e.to_string())?;
        err = err.max(back.max_abs_diff(&a));
        parseval = parseval.max((f.squared_integral() - a.squared_norm()).abs());
    }
    ensure(err < 1e-8, || format!("round-trip error {err:e}"))?;
    ensure(parseval < 1e-8, || format!("Parseval defect {parseval:e}"))?;
    Ok(format!("60 random sets, lmax <= 16: round trip {err:.1e}, Parseval {parseval:.1e}"))
}

/// Entrywise `|Γ - c I| < 5/sqrt(N)` inside degree `l`, optionally also
/// `|Γ_(l,l+1)| < 5/sqrt(N)`.
fn second_order_within(e: &Ensemble, l: usize, c: f64, cross: bool) -> std::result::Result<f64, String> {
    let s = covariance_diagnostic(e, l).map_err(|e| e.to_string())?;
    let dim = 2 * l + 1;
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { c } else { 0.0 };
            worst = worst.max((s.covariance[i * dim + j] - target).norm());
        }
    }
    if cross {
        worst = worst.max(s.cross_covariance.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    ensure(worst < s.threshold, || {
        format!("degree {l}: max deviation {worst:.4} exceeds {:.4}", s.threshold)
    })?;
    Ok(worst)
}

fn second_order() -> Check {
    let e = Ensemble::sample(&flat(3), Distribution::Gaussian, 4000, 40_000).unwrap();
    let worst = second_order_within(&e, 2, 1.0, true)?;
    Ok(format!("N=4000: max entrywise deviation {worst:.4} < 5/sqrt(N) = {:.4}", 5.0 / 4000f64.sqrt()))
}

fn rejection_rate(trials: u64, mut reject: impl FnMut(u64) -> bool) -> f64 {
    (0..trials).filter(|&t| reject(t)).count() as f64 / trials as f64
}

fn phase_and_ratio() -> Check {
    let e = Ensemble::sample(&flat(3), Distribution::Gaussian, 2000, 50_000).unwrap();
    let phase = phase_uniformity_test(&e, 3, 2, 0.01).map_err(|e| e.to_string())?;
    let ratio = cauchy_ratio_test(&e, 3, 2, 0.01).map_err(|e| e.to_string())?;
    ensure(phase.passed(), || format!("phase test rejected, p={}", phase.p_value))?;
    ensure(ratio.passed(), || format!("ratio test rejected, p={}", ratio.p_value))?;

    let (alpha, trials) = (0.05, 500u64);
    let band = 3.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt();
    let spec = flat(3);
    let mut rates = Vec::new();
    for (name, which) in [("phase", 0), ("ratio", 1)] {
        let rate = rejection_rate(trials, |t| {
            let e = Ensemble::sample(&spec, Distribution::Gaussian, 2000, 1_000_000 + 10_000 * t).unwrap();
            let r = if which == 0 {
                phase_uniformity_test(&e, 3, 2, alpha)
            } else {
                cauchy_ratio_test(&e, 3, 2, alpha)
            };
            r.unwrap().verdict == Verdict::Reject
        });
        ensure((rate - alpha).abs() <= band, || format!("{name} rejection rate {rate} outside {alpha} ± {band:.4}"))?;
        rates.push(rate);
    }
    Ok(format!(
        "p(phase)={:.3}, p(ratio)={:.3}; calibration over 500 trials: {:.3}, {:.3} in {alpha} ± {band:.3}",
        phase.p_value, ratio.p_value, rates[0], rates[1]
    ))
}

/// `Var(Re)`, `Var(Im)` within 5 SE of `c/2` and the symmetry test passes.
fn marginals_at(e: &Ensemble, l: usize, m: i64, c: f64) -> std::result::Result<String, String> {
    let z = e.coefficient(l, m).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for (name, xs) in [("Re", z.iter().map(|v| v.re).collect::<Vec<_>>()), ("Im", z.iter().map(|v| v.im).collect())] {
        let n = xs.len() as f64;
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let var = sq.iter().sum::<f64>() / n;
        let sd = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        ensure((var - c / 2.0).abs() < 5.0 * se, || {
            format!("({l},{m}) Var({name}) = {var:.4}, target {:.4}, SE {se:.4}", c / 2.0)
        })?;
        parts.push(format!("Var({name})={var:.3}"));
    }
    let sym = symmetry_test(e, l, m, 0.01).map_err(|e| e.to_string())?;
    ensure(sym.passed(), || format!("({l},{m}) symmetry rejected, p={}", sym.p_value))?;
    Ok(format!("({l},{m}) {} p(sym)={:.3}", parts.join(" "), sym.p_value))
}

fn marginals() -> Check {
    let e = Ensemble::sample(&flat(3), Distribution::Gaussian, 4000, 60_000).unwrap();
    let a = marginals_at(&e, 2, 1, 1.0)?;
    let b = marginals_at(&e, 3, 2, 1.0)?;
    Ok(format!("{a}; {b}"))
}

fn heavy_tail() -> Check {
    let spec = HeavyTailFieldSpec::new(2, 3, 4, [1.0, 1.0, 1.0], 1.0).unwrap();
    let e = Ensemble::heavy_tail(&spec, 4000, 70_000).unwrap();
    // the cross block (l2, l3) involves the infinite-variance degree and is not checked
    second_order_within(&e, 2, 1.0, true)?;
    second_order_within(&e, 3, 1.0, false)?;
    for (l, m) in [(2usize, 1i64), (3, 1)] {
        let phase = phase_uniformity_test(&e, l, m, 0.01).map_err(|e| e.to_string())?;
        let ratio = cauchy_ratio_test(&e, l, m, 0.01).map_err(|e| e.to_string())?;
        ensure(phase.passed() && ratio.passed(), || {
            format!("({l},{m}) phase p={}, ratio p={}", phase.p_value, ratio.p_value)
        })?;
        marginals_at(&e, l, m, 1.0)?;
    }
    let xs: Vec<f64> = e.coefficient(4, 1).map_err(|e| e.to_string())?.iter().map(|z| z.re).collect();
    let profile = batch_moment_profile(&xs, &[4, 16, 64, 256], 2).map_err(|e| e.to_string())?;
    ensure(profile.windows(2).all(|w| w[1] > w[0]), || {
        format!("degree-4 batch variance profile {profile:?} is not increasing")
    })?;
    Ok(format!(
        "degrees 2, 3 pass; degree-4 batch variances {}",
        profile.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" < ")
    ))
}

fn rotation_mixing() -> Check {
    let start = Instant::now();
    let g = EulerAngles::new(1.0, PI / 2.0, 0.5).unwrap();
    let spec = flat(4);
    let gauss = Ensemble::sample(&spec, Distribution::Gaussian, 4000, 80_000).unwrap();
    let r = rotation_mixing_gaussianity_test(&gauss, 2, 1, &g, 0.01).map_err(|e| e.to_string())?;
    ensure(r.passed(), || format!("Gaussian ensemble rejected, p={}", r.p_value))?;
    let mut counts = Vec::new();
    for dist in [Distribution::Rademacher, Distribution::Uniform] {
        let mut rejected = 0;
        for s in 0..20u64 {
            let e = Ensemble::sample(&spec, dist, 4000, 90_000 + 100_000 * s).unwrap();
            let r = rotation_mixing_gaussianity_test(&e, 2, 1, &g, 0.01).map_err(|e| e.to_string())?;
            if r.verdict == Verdict::Reject {
                rejected += 1;
            }
        }
        ensure(rejected >= 19, || format!("{dist}: only {rejected}/20 seeds rejected"))?;
        counts.push(format!("{dist} {rejected}/20"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 300.0, || format!("took {secs:.1} s, budget 300 s"))?;
    Ok(format!("Gaussian p={:.3}; rejections: {}; {secs:.1} s", r.p_value, counts.join(", ")))
}

fn run_bin(args: &[&str]) -> std::result::Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_isofield"))
        .args(args)
        .env_remove("ISOFIELD_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let sim = path(&format!("sim_{run}.txt"));
        let demo = path(&format!("demo_{run}.txt"));
        let (code, _) = run_bin(&["simulate", "--lmax", "4", "--n", "300", "--sampler", "laplace", "--seed", "9", "--output", &sim])?;
        ensure(code == 0, || format!("simulate exited {code}"))?;
        let (code, stdout) = run_bin(&["demo-theorem4", "--output", &demo])?;
        ensure(code == 0, || format!("demo exited {code}"))?;
        let read = |p: &str| std::fs::read(p).map_err(|e| e.to_string());
        files.push((read(&sim)?, read(&demo)?, stdout));
    }
    ensure(files[0].0 == files[1].0, || "simulate outputs differ".into())?;
    ensure(files[0].1 == files[1].1, || "demo reports differ".into())?;
    ensure(files[0].2 == files[1].2, || "demo tables differ".into())?;
    Ok(format!(
        "simulate ({} bytes) and demo-theorem4 ({} bytes report) byte-identical across reruns",
        files[0].0.len(),
        files[0].1.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 harmonic orthonormality", orthonormality),
        ("2 Wigner D certification", wigner_certification),
        ("3 synthesis/analysis round trip", round_trip),
        ("4 second-order structure", second_order),
        ("5 phase and ratio laws", phase_and_ratio),
        ("6 marginal variances and symmetry", marginals),
        ("7 heavy-tailed top degree", heavy_tail),
        ("8 rotation mixing separates Gaussian", rotation_mixing),
        ("9 determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {name}: {why} [{secs:.1}s]");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
