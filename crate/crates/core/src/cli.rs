//! Command-line front end. [`main_with_args`] parses arguments, runs one
//! command and maps the outcome to an exit code.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::diagnostics::{
    complex_correlation_test, covariance_diagnostic, cauchy_ratio_test, phase_uniformity_test,
    rotation_mixing_gaussianity_test, symmetry_test, Ensemble, TestReport, Verdict,
};
use crate::error::{Error, Result};
use crate::field::{analyze, synthesize, CoefficientSet, Distribution, PowerSpectrum};
use crate::harmonics::{make_grid, HarmonicIndex};
use crate::io;
use crate::wigner::{rotate_coefficient_set, EulerAngles};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Band limits above this need `--allow-large-lmax`.
pub const MAX_LMAX: usize = 256;
pub const SEED_ENV: &str = "ISOFIELD_SEED";
pub const DEMO_SEED: u64 = 20_240_917;
/// Demo runs below this many replicates are flagged as underpowered.
pub const DEMO_MIN_POWERED: usize = 1000;
pub const DEFAULT_ANGLES: (f64, f64, f64) = (1.0, std::f64::consts::FRAC_PI_2, 0.5);

#[derive(Debug, Parser)]
#[command(name = "isofield", version, about = "Isotropic random fields on the sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw coefficient sets from a power spectrum.
    Simulate(SimulateArgs),
    /// Evaluate a coefficient file on a Gauss-Legendre grid.
    Synth(SynthArgs),
    /// Project a grid file back onto spherical harmonics.
    Analyze(AnalyzeArgs),
    /// Rotate every replicate of a coefficient or ensemble file.
    Rotate(RotateArgs),
    /// Run isotropy diagnostics on one or more ensemble files.
    Test(TestArgs),
    /// Gaussian against independent non-Gaussian ensembles, side by side.
    #[command(name = "demo-theorem4")]
    DemoTheorem4(DemoArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Permit band limits above 256.
    #[arg(long)]
    pub allow_large_lmax: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Spectrum file; a flat C_l = 1 spectrum is used when absent.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    #[arg(long)]
    pub lmax: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "gaussian")]
    pub sampler: String,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Grid band limit; defaults to the coefficient band limit.
    #[arg(long)]
    pub lmax: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to the largest band limit the grid integrates exactly.
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Recorded in the output header.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RotateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Euler angles "alpha,beta,gamma" in radians.
    #[arg(long, allow_hyphen_values = true)]
    pub angles: String,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Ensemble or coefficient files; all must share sampler and band limit.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub l: usize,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub m: i64,
    #[arg(long, allow_hyphen_values = true)]
    pub angles: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long)]
    pub cov: bool,
    #[arg(long)]
    pub phase: bool,
    #[arg(long)]
    pub cauchy: bool,
    #[arg(long)]
    pub symmetry: bool,
    #[arg(long)]
    pub independence: bool,
    #[arg(long)]
    pub mixing: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 4)]
    pub lmax: usize,
    #[arg(long, default_value_t = 2)]
    pub l: usize,
    #[arg(long, default_value_t = 1)]
    pub m: i64,
    #[arg(long, default_value_t = 4000)]
    pub n: usize,
    #[arg(long, default_value_t = DEMO_SEED)]
    pub seed: u64,
    #[arg(long, allow_hyphen_values = true)]
    pub angles: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Synth,
    Analyze,
    Rotate,
    Test,
    DemoTheorem4,
}

/// Which diagnostics `test` runs. All of them when none is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestSelection {
    pub cov: bool,
    pub phase: bool,
    pub cauchy: bool,
    pub symmetry: bool,
    pub independence: bool,
    pub mixing: bool,
}

impl TestSelection {
    pub fn all() -> Self {
        Self { cov: true, phase: true, cauchy: true, symmetry: true, independence: true, mixing: true }
    }

    fn or_all(self) -> Self {
        let none = !(self.cov || self.phase || self.cauchy || self.symmetry || self.independence || self.mixing);
        if none {
            Self::all()
        } else {
            self
        }
    }
}

/// Validated settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub lmax: Option<usize>,
    pub n_replicates: usize,
    pub seed: u64,
    pub spectrum_path: Option<PathBuf>,
    pub input_paths: Vec<PathBuf>,
    pub output_path: Option<PathBuf>,
    /// Sampler label; checked against [`Distribution`] by `simulate`.
    pub sampler: String,
    pub angles: EulerAngles,
    pub alpha: f64,
    pub l: usize,
    pub m: i64,
    pub tests: TestSelection,
    pub jobs: Option<usize>,
    pub allow_large_lmax: bool,
}

impl RunConfig {
    fn base(command: CommandKind, common: &Common) -> Result<Self> {
        Ok(Self {
            command,
            lmax: None,
            n_replicates: 1,
            seed: 0,
            spectrum_path: None,
            input_paths: Vec::new(),
            output_path: None,
            sampler: Distribution::Gaussian.label().into(),
            angles: default_angles(),
            alpha: 0.01,
            l: 2,
            m: 1,
            tests: TestSelection::all(),
            jobs: common.jobs,
            allow_large_lmax: common.allow_large_lmax,
        })
    }

    /// Builds the configuration and applies the `ISOFIELD_SEED` override.
    pub fn from_cli(cli: &Cli, env_seed: Option<&str>) -> Result<Self> {
        let mut cfg = match &cli.command {
            Command::Simulate(a) => {
                let mut c = Self::base(CommandKind::Simulate, &a.common)?;
                c.spectrum_path = a.spectrum.clone();
                c.lmax = a.lmax;
                c.n_replicates = a.n;
                c.seed = a.seed;
                c.sampler = a.sampler.clone();
                c.output_path = Some(a.output.clone());
                c
            }
            Command::Synth(a) => {
                let mut c = Self::base(CommandKind::Synth, &a.common)?;
                c.input_paths = vec![a.input.clone()];
                c.lmax = a.lmax;
                c.output_path = Some(a.output.clone());
                c
            }
            Command::Analyze(a) => {
                let mut c = Self::base(CommandKind::Analyze, &a.common)?;
                c.input_paths = vec![a.input.clone()];
                c.lmax = a.lmax;
                c.seed = a.seed;
                c.output_path = Some(a.output.clone());
                c
            }
            Command::Rotate(a) => {
                let mut c = Self::base(CommandKind::Rotate, &a.common)?;
                c.input_paths = vec![a.input.clone()];
                c.angles = parse_angles(&a.angles)?;
                c.output_path = Some(a.output.clone());
                c
            }
            Command::Test(a) => {
                let mut c = Self::base(CommandKind::Test, &a.common)?;
                c.input_paths = a.input.clone();
                c.output_path = a.output.clone();
                c.l = a.l;
                c.m = a.m;
                if let Some(s) = &a.angles {
                    c.angles = parse_angles(s)?;
                }
                c.alpha = a.alpha;
                c.tests = TestSelection {
                    cov: a.cov,
                    phase: a.phase,
                    cauchy: a.cauchy,
                    symmetry: a.symmetry,
                    independence: a.independence,
                    mixing: a.mixing,
                }
                .or_all();
                c
            }
            Command::DemoTheorem4(a) => {
                let mut c = Self::base(CommandKind::DemoTheorem4, &a.common)?;
                c.lmax = Some(a.lmax);
                c.l = a.l;
                c.m = a.m;
                c.n_replicates = a.n;
                c.seed = a.seed;
                if let Some(s) = &a.angles {
                    c.angles = parse_angles(s)?;
                }
                c.alpha = a.alpha;
                c.output_path = a.output.clone();
                c
            }
        };
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}='{s}' is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks paths, band-limit guard and test parameters before any work.
    pub fn validate(&self) -> Result<()> {
        for p in self.input_paths.iter().chain(&self.spectrum_path) {
            if !p.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("input file {} does not exist", p.display()),
                )));
            }
        }
        if let Some(out) = &self.output_path {
            let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("output directory {} does not exist", parent.display()),
                )));
            }
        }
        self.check_lmax(self.lmax)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha={} must lie in (0, 1)", self.alpha)));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        if self.command == CommandKind::Simulate && self.n_replicates == 0 {
            return Err(Error::Config("--n must be at least 1".into()));
        }
        Ok(())
    }

    fn check_lmax(&self, lmax: Option<usize>) -> Result<()> {
        match lmax {
            Some(l) if l > MAX_LMAX && !self.allow_large_lmax => Err(Error::Config(format!(
                "lmax={l} exceeds {MAX_LMAX}; pass --allow-large-lmax to proceed"
            ))),
            _ => Ok(()),
        }
    }
}

fn default_angles() -> EulerAngles {
    let (a, b, g) = DEFAULT_ANGLES;
    EulerAngles::new(a, b, g).expect("default angles are valid")
}

/// `"alpha,beta,gamma"` in radians; alpha and gamma are reduced mod 2π.
pub fn parse_angles(s: &str) -> Result<EulerAngles> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("angles '{s}' must be 'alpha,beta,gamma'")));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| Error::Config(format!("cannot parse angle '{p}'")))?;
    }
    EulerAngles::wrapped(v[0], v[1], v[2])
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Format(_) | Error::ImaginaryResidue(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = RunConfig::from_cli(&cli, env_seed.as_deref()).and_then(|cfg| run(&cfg, out, err));
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_REJECT,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one command; `Ok(false)` signals a statistical rejection.
pub fn run(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    match cfg.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            // output is buffered so the closure can move to the pool
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let result = pool.install(|| dispatch(cfg, &mut o, &mut e));
            out.write_all(&o)?;
            err.write_all(&e)?;
            result
        }
        None => dispatch(cfg, out, err),
    }
}

fn dispatch(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    match cfg.command {
        CommandKind::Simulate => cmd_simulate(cfg).map(|_| true),
        CommandKind::Synth => cmd_synth(cfg).map(|_| true),
        CommandKind::Analyze => cmd_analyze(cfg).map(|_| true),
        CommandKind::Rotate => cmd_rotate(cfg).map(|_| true),
        CommandKind::Test => cmd_test(cfg, out),
        CommandKind::DemoTheorem4 => cmd_demo_theorem4(cfg, out, err),
    }
}

fn output_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.output_path.as_deref().ok_or_else(|| Error::Config("--output is required".into()))
}

fn input_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.input_paths.first().map(PathBuf::as_path).ok_or_else(|| Error::Config("--input is required".into()))
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    io::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

/// Writes one coefficient file for `--n 1`, otherwise one ensemble container.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let dist: Distribution = cfg.sampler.parse()?;
    let spec = match &cfg.spectrum_path {
        Some(p) => {
            let s = io::read_spectrum(io::open(p)?)?;
            match cfg.lmax {
                Some(l) => s.truncated(l)?,
                None => s,
            }
        }
        None => PowerSpectrum::flat(cfg.lmax.unwrap_or(2), 1.0)?,
    };
    cfg.check_lmax(Some(spec.lmax()))?;
    let e = if cfg.n_replicates == 1 {
        None
    } else {
        Some(Ensemble::sample(&spec, dist, cfg.n_replicates, cfg.seed)?)
    };
    let mut w = io::create(output_path(cfg)?)?;
    match e {
        Some(e) => io::write_ensemble(&mut w, &e)?,
        None => {
            let a = crate::field::sample_coeffs(&spec, dist, cfg.seed);
            io::write_coeffs(&mut w, &a, cfg.seed, Some(dist.label()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_single_coeffs(path: &Path) -> Result<(CoefficientSet, io::CoeffsMeta)> {
    let text = read_to_string(path)?;
    if text.trim_start().starts_with(io::ENSEMBLE_PREFIX) {
        return Err(Error::Config(format!(
            "{} is an ensemble container; this command takes one coefficient set",
            path.display()
        )));
    }
    io::read_coeffs(text.as_bytes())
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let (a, _) = read_single_coeffs(input_path(cfg)?)?;
    let lmax = cfg.lmax.unwrap_or(a.lmax());
    if lmax < a.lmax() {
        return Err(Error::GridTooCoarse { need: a.lmax(), have: lmax });
    }
    cfg.check_lmax(Some(lmax))?;
    let f = synthesize(&a, &make_grid(lmax))?;
    let mut w = io::create(output_path(cfg)?)?;
    io::write_grid(&mut w, &f)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<()> {
    let f = io::read_grid(&mut io::open(input_path(cfg)?)?)?;
    let lmax = cfg.lmax.unwrap_or(f.grid().lmax_exact());
    let a = analyze(&f, lmax)?;
    let mut w = io::create(output_path(cfg)?)?;
    io::write_coeffs(&mut w, &a, cfg.seed, None)?;
    w.flush()?;
    Ok(())
}

/// Output keeps the input layout: coefficient file or ensemble container.
pub fn cmd_rotate(cfg: &RunConfig) -> Result<()> {
    let path = input_path(cfg)?;
    let text = read_to_string(path)?;
    let g = cfg.angles;
    if text.trim_start().starts_with(io::ENSEMBLE_PREFIX) {
        let e = io::read_ensemble(text.as_bytes())?;
        let sets: Vec<CoefficientSet> = e
            .sets()
            .par_iter()
            .map(|a| rotate_coefficient_set(a, &g))
            .collect::<Result<_>>()?;
        let rotated = Ensemble::new(sets, e.sampler(), e.seed_base())?;
        let mut w = io::create(output_path(cfg)?)?;
        io::write_ensemble(&mut w, &rotated)?;
        w.flush()?;
    } else {
        let (a, meta) = io::read_coeffs(text.as_bytes())?;
        let b = rotate_coefficient_set(&a, &g)?;
        let mut w = io::create(output_path(cfg)?)?;
        io::write_coeffs(&mut w, &b, meta.seed, meta.sampler.as_deref())?;
        w.flush()?;
    }
    Ok(())
}

/// Pools every input into one ensemble. Inputs must agree on sampler label
/// and band limit.
pub fn load_ensemble(paths: &[PathBuf]) -> Result<Ensemble> {
    let mut sets = Vec::new();
    let mut label: Option<(String, u64, PathBuf)> = None;
    for p in paths {
        let (s, sampler, seed) = io::read_ensemble_sections(io::open(p)?)?;
        match &label {
            Some((first, _, first_path)) if *first != sampler => {
                return Err(Error::MixedProvenance(format!(
                    "{} has sampler '{first}' but {} has '{sampler}'",
                    first_path.display(),
                    p.display()
                )));
            }
            Some(_) => {}
            None => label = Some((sampler, seed, p.clone())),
        }
        sets.extend(s);
    }
    let (sampler, seed, _) = label.ok_or_else(|| Error::Config("no input files".into()))?;
    Ensemble::new(sets, sampler, seed)
}

fn run_selected(e: &Ensemble, cfg: &RunConfig) -> Result<Vec<TestReport>> {
    let (l, m, alpha, t) = (cfg.l, cfg.m, cfg.alpha, cfg.tests);
    let mut reports = Vec::new();
    if t.cov {
        reports.push(covariance_diagnostic(e, l)?.report(alpha));
    }
    if t.phase {
        reports.push(phase_uniformity_test(e, l, m, alpha)?);
    }
    if t.cauchy {
        reports.push(cauchy_ratio_test(e, l, m, alpha)?);
    }
    if t.symmetry {
        reports.push(symmetry_test(e, l, m, alpha)?);
    }
    if t.independence {
        let first = HarmonicIndex::new(l, m)?;
        let second = HarmonicIndex::new(l + 1, m)?;
        reports.push(complex_correlation_test(e, first, second)?.report(alpha));
    }
    if t.mixing {
        reports.push(rotation_mixing_gaussianity_test(e, l, m, &cfg.angles, alpha)?);
    }
    Ok(reports)
}

pub fn cmd_test(cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let e = load_ensemble(&cfg.input_paths)?;
    let reports = run_selected(&e, cfg)?;
    match &cfg.output_path {
        Some(p) => {
            let mut w = io::create(p)?;
            io::write_reports(&mut w, &reports)?;
            w.flush()?;
            for r in &reports {
                writeln!(out, "{:<16} verdict={}", r.test, r.verdict)?;
            }
        }
        None => io::write_reports(out, &reports)?,
    }
    Ok(reports.iter().all(TestReport::passed))
}

const DEMO_SAMPLERS: [Distribution; 4] =
    [Distribution::Gaussian, Distribution::Rademacher, Distribution::Uniform, Distribution::Laplace];

fn demo_row(e: &Ensemble, cfg: &RunConfig) -> Vec<Result<TestReport>> {
    let (l, m, alpha) = (cfg.l, cfg.m, cfg.alpha);
    let rotated = || -> Result<TestReport> {
        let sets: Vec<CoefficientSet> = e
            .sets()
            .par_iter()
            .map(|a| rotate_coefficient_set(a, &cfg.angles))
            .collect::<Result<_>>()?;
        let r = Ensemble::new(sets, e.sampler(), e.seed_base())?;
        Ok(covariance_diagnostic(&r, l)?.report(alpha).named("covariance_rotated"))
    };
    vec![
        covariance_diagnostic(e, l).map(|s| s.report(alpha)),
        rotated(),
        phase_uniformity_test(e, l, m, alpha),
        cauchy_ratio_test(e, l, m, alpha),
        symmetry_test(e, l, m, alpha),
        HarmonicIndex::new(l, m).and_then(|a| {
            let b = HarmonicIndex::new(l + 1, m)?;
            Ok(complex_correlation_test(e, a, b)?.report(alpha))
        }),
        rotation_mixing_gaussianity_test(e, l, m, &cfg.angles, alpha),
    ]
}

const DEMO_TESTS: [&str; 7] = [
    "covariance",
    "covariance_rotated",
    "phase",
    "cauchy_ratio",
    "symmetry",
    "independence",
    "rotation_mixing",
];

/// Runs every diagnostic on a Gaussian and three independent non-Gaussian
/// ensembles with matched second moments and prints the verdict table.
/// Returns `Ok(true)` when the Gaussian column passes throughout and every
/// non-Gaussian column rejects the mixing test, or when the run is
/// underpowered and all verdicts are inconclusive.
pub fn cmd_demo_theorem4(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    let lmax = cfg.lmax.unwrap_or(4);
    if cfg.l + 1 > lmax {
        return Err(Error::Config(format!("demo needs lmax >= l + 1, got lmax={lmax}, l={}", cfg.l)));
    }
    let n = cfg.n_replicates;
    let underpowered = n < DEMO_MIN_POWERED;
    if underpowered {
        writeln!(
            err,
            "warning: N={n} is underpowered (< {DEMO_MIN_POWERED} replicates); verdicts are marked inconclusive"
        )?;
    }
    let spec = PowerSpectrum::flat(lmax, 1.0)?;
    let mut columns: Vec<Vec<TestReport>> = Vec::new();
    for (k, dist) in DEMO_SAMPLERS.iter().enumerate() {
        let seed = cfg.seed.wrapping_add((k as u64) << 32);
        let row = match Ensemble::sample(&spec, *dist, n.max(2), seed) {
            Ok(e) => demo_row(&e, cfg),
            Err(e) => vec![Err(e)],
        };
        let reports = DEMO_TESTS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let mut r = match row.get(i).unwrap_or(&row[0]) {
                    Ok(r) => r.clone(),
                    Err(Error::TooFewSamples { .. }) if underpowered => TestReport {
                        test: name.to_string(),
                        l: Some(cfg.l),
                        m: Some(cfg.m),
                        statistic: f64::NAN,
                        p_value: f64::NAN,
                        n,
                        alpha: cfg.alpha,
                        verdict: Verdict::Inconclusive,
                    },
                    Err(e) => return Err(Error::Config(format!("{dist}/{name}: {e}"))),
                };
                r.test = format!("{}:{}", dist.label(), name);
                if underpowered {
                    r.verdict = Verdict::Inconclusive;
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(reports);
    }

    let g = &cfg.angles;
    writeln!(
        out,
        "lmax={lmax} l={} m={} N={n} g=({}, {}, {}) alpha={} seed={}",
        cfg.l,
        cfg.m,
        g.alpha(),
        g.beta(),
        g.gamma(),
        cfg.alpha,
        cfg.seed
    )?;
    write!(out, "{:<20}", "test")?;
    for d in DEMO_SAMPLERS {
        write!(out, "{:<22}", d.label())?;
    }
    writeln!(out)?;
    for (i, name) in DEMO_TESTS.iter().enumerate() {
        write!(out, "{name:<20}")?;
        for col in &columns {
            write!(out, "{:<22}", cell(&col[i]))?;
        }
        writeln!(out)?;
    }

    if let Some(p) = &cfg.output_path {
        let all: Vec<TestReport> = columns.iter().flatten().cloned().collect();
        let mut w = io::create(p)?;
        io::write_reports(&mut w, &all)?;
        w.flush()?;
    }

    if underpowered {
        return Ok(true);
    }
    let gaussian_ok = columns[0].iter().all(TestReport::passed);
    let mixing = DEMO_TESTS.len() - 1;
    let others_reject = columns[1..].iter().all(|c| c[mixing].verdict == Verdict::Reject);
    Ok(gaussian_ok && others_reject)
}

fn cell(r: &TestReport) -> String {
    if r.p_value.is_nan() {
        if r.statistic.is_nan() {
            r.verdict.to_string()
        } else {
            format!("{} (stat={:.3})", r.verdict, r.statistic)
        }
    } else {
        format!("{} (p={:.3})", r.verdict, r.p_value)
    }
}
