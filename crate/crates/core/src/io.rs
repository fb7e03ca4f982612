//! Text and binary file formats: spectra, coefficient sets, ensemble
//! containers, field grids and test reports.
//!
//! Floats in text formats are written with `{:e}`, the shortest decimal that
//! parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::diagnostics::{Ensemble, TestReport, Verdict};
use crate::error::{Error, Result};
use crate::field::{CoefficientSet, FieldGrid, PowerSpectrum};
use crate::harmonics::QuadratureGrid;

pub const SPECTRUM_HEADER: &str = "# isofield spectrum v1";
pub const COEFFS_PREFIX: &str = "# isofield coeffs v1";
pub const ENSEMBLE_PREFIX: &str = "# isofield ensemble v1";
pub const GRID_MAGIC: &[u8; 4] = b"IFG1";

fn format_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| format_err(line, format!("cannot parse {what} '{tok}'")))
}

/// `key=value` pairs after a fixed header prefix.
fn header_fields(text: &str, prefix: &str, line: usize) -> Result<BTreeMap<String, String>> {
    let rest = text
        .strip_prefix(prefix)
        .ok_or_else(|| format_err(line, format!("expected header '{prefix}', found '{text}'")))?;
    let mut out = BTreeMap::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| format_err(line, format!("malformed header field '{tok}'")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

fn required<T: std::str::FromStr>(
    fields: &BTreeMap<String, String>,
    key: &str,
    line: usize,
) -> Result<T> {
    let v = fields.get(key).ok_or_else(|| format_err(line, format!("header lacks '{key}='")))?;
    parse_num(v, line, key)
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines<R: BufRead>(r: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            out.push((i + 1, trimmed.to_string()));
        }
    }
    Ok(out)
}

pub fn write_spectrum<W: Write + ?Sized>(w: &mut W, spec: &PowerSpectrum) -> Result<()> {
    writeln!(w, "{SPECTRUM_HEADER}")?;
    for (l, c) in spec.values().iter().enumerate() {
        writeln!(w, "{l} {c:e}")?;
    }
    Ok(())
}

/// Degrees must run `0, 1, ..., L` without gaps.
pub fn read_spectrum<R: BufRead>(r: R) -> Result<PowerSpectrum> {
    let lines = content_lines(r)?;
    let Some(((n0, head), body)) = lines.split_first() else {
        return Err(Error::Format("empty spectrum file".into()));
    };
    if head != SPECTRUM_HEADER {
        return Err(format_err(*n0, format!("expected '{SPECTRUM_HEADER}'")));
    }
    let mut values = Vec::with_capacity(body.len());
    for (n, text) in body {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(format_err(*n, "expected 'l C_l'"));
        }
        let l: usize = parse_num(toks[0], *n, "degree")?;
        if l != values.len() {
            return Err(format_err(*n, format!("expected degree {}, found {l}", values.len())));
        }
        values.push(parse_num::<f64>(toks[1], *n, "C_l")?);
    }
    PowerSpectrum::new(values).map_err(|e| Error::Format(e.to_string()))
}

fn coeffs_header(lmax: usize, seed: u64, sampler: Option<&str>) -> String {
    match sampler {
        Some(s) => format!("{COEFFS_PREFIX} lmax={lmax} seed={seed} sampler={s}"),
        None => format!("{COEFFS_PREFIX} lmax={lmax} seed={seed}"),
    }
}

fn write_coeff_lines<W: Write + ?Sized>(w: &mut W, a: &CoefficientSet) -> Result<()> {
    for l in 0..=a.lmax() {
        for m in 0..=l {
            let z = a.stored(l, m);
            writeln!(w, "{l} {m} {:e} {:e}", z.re, z.im)?;
        }
    }
    Ok(())
}

/// Metadata carried by a coefficient file header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffsMeta {
    pub lmax: usize,
    pub seed: u64,
    pub sampler: Option<String>,
}

pub fn write_coeffs<W: Write + ?Sized>(
    w: &mut W,
    a: &CoefficientSet,
    seed: u64,
    sampler: Option<&str>,
) -> Result<()> {
    writeln!(w, "{}", coeffs_header(a.lmax(), seed, sampler))?;
    write_coeff_lines(w, a)
}

fn parse_coeffs_section(lines: &[(usize, String)]) -> Result<(CoefficientSet, CoeffsMeta)> {
    let Some(((n0, head), body)) = lines.split_first() else {
        return Err(Error::Format("empty coefficient section".into()));
    };
    let fields = header_fields(head, COEFFS_PREFIX, *n0)?;
    let meta = CoeffsMeta {
        lmax: required(&fields, "lmax", *n0)?,
        seed: required(&fields, "seed", *n0)?,
        sampler: fields.get("sampler").cloned(),
    };
    let mut a = CoefficientSet::zeros(meta.lmax);
    let expected = (meta.lmax + 1) * (meta.lmax + 2) / 2;
    let mut seen = vec![false; expected];
    for (n, text) in body {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(format_err(*n, "expected 'l m re im'"));
        }
        let l: usize = parse_num(toks[0], *n, "degree")?;
        let m: usize = parse_num(toks[1], *n, "order")?;
        if l > meta.lmax || m > l {
            return Err(format_err(*n, format!("index (l={l}, m={m}) outside lmax={}", meta.lmax)));
        }
        let slot = l * (l + 1) / 2 + m;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(format_err(*n, format!("duplicate coefficient (l={l}, m={m})")));
        }
        let z = Complex64::new(parse_num(toks[2], *n, "re")?, parse_num(toks[3], *n, "im")?);
        a.set(l, m as i64, z).map_err(|e| format_err(*n, e))?;
    }
    if seen.iter().any(|s| !s) {
        return Err(format_err(*n0, format!("section lacks some of the {expected} coefficients")));
    }
    Ok((a, meta))
}

pub fn read_coeffs<R: BufRead>(r: R) -> Result<(CoefficientSet, CoeffsMeta)> {
    parse_coeffs_section(&content_lines(r)?)
}

/// One container: an ensemble header, then one coefficient section per
/// replicate with seed `seed_base + i`.
pub fn write_ensemble<W: Write + ?Sized>(w: &mut W, e: &Ensemble) -> Result<()> {
    writeln!(
        w,
        "{ENSEMBLE_PREFIX} lmax={} n={} sampler={} seed={}",
        e.lmax(),
        e.len(),
        e.sampler(),
        e.seed_base()
    )?;
    for (i, a) in e.sets().iter().enumerate() {
        writeln!(w, "{}", coeffs_header(a.lmax(), e.seed_base().wrapping_add(i as u64), None))?;
        write_coeff_lines(w, a)?;
    }
    Ok(())
}

/// Reads either an ensemble container or a single coefficient file; the
/// latter yields its one replicate and header metadata.
pub fn read_ensemble_sections<R: BufRead>(r: R) -> Result<(Vec<CoefficientSet>, String, u64)> {
    let lines = content_lines(r)?;
    let Some((n0, head)) = lines.first() else {
        return Err(Error::Format("empty ensemble file".into()));
    };
    if head.starts_with(COEFFS_PREFIX) {
        let (a, meta) = parse_coeffs_section(&lines)?;
        return Ok((vec![a], meta.sampler.unwrap_or_else(|| "unknown".into()), meta.seed));
    }
    let fields = header_fields(head, ENSEMBLE_PREFIX, *n0)?;
    let lmax: usize = required(&fields, "lmax", *n0)?;
    let n: usize = required(&fields, "n", *n0)?;
    let seed: u64 = required(&fields, "seed", *n0)?;
    let sampler = fields
        .get("sampler")
        .cloned()
        .ok_or_else(|| format_err(*n0, "header lacks 'sampler='"))?;

    let starts: Vec<usize> = lines
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, (_, t))| t.starts_with(COEFFS_PREFIX))
        .map(|(i, _)| i)
        .collect();
    if starts.len() != n {
        return Err(format_err(*n0, format!("header announces {n} replicates, found {}", starts.len())));
    }
    if starts.first().is_some_and(|&s| s != 1) {
        return Err(format_err(lines[1].0, "data before the first replicate section"));
    }
    let mut sets = Vec::with_capacity(n);
    for (k, &s) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(lines.len());
        let (a, meta) = parse_coeffs_section(&lines[s..end])?;
        if meta.lmax != lmax {
            return Err(format_err(lines[s].0, format!("section lmax {} differs from {lmax}", meta.lmax)));
        }
        if meta.seed != seed.wrapping_add(k as u64) {
            return Err(format_err(lines[s].0, format!("section seed {} breaks the seed sequence", meta.seed)));
        }
        sets.push(a);
    }
    Ok((sets, sampler, seed))
}

pub fn read_ensemble<R: BufRead>(r: R) -> Result<Ensemble> {
    let (sets, sampler, seed) = read_ensemble_sections(r)?;
    Ensemble::new(sets, sampler, seed)
}

/// Grid nodes are stored as `cos θ` values.
pub fn write_grid<W: Write + ?Sized>(w: &mut W, f: &FieldGrid) -> Result<()> {
    let g = f.grid();
    w.write_all(GRID_MAGIC)?;
    w.write_all(&(g.n_theta() as u32).to_le_bytes())?;
    w.write_all(&(g.n_phi() as u32).to_le_bytes())?;
    for v in g.cos_thetas().iter().chain(g.theta_weights()).chain(f.values()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid<R: Read>(r: &mut R) -> Result<FieldGrid> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != GRID_MAGIC {
        return Err(Error::Format("grid file lacks the IFG1 magic".into()));
    }
    let mut u = [0u8; 4];
    r.read_exact(&mut u).map_err(truncated)?;
    let n_theta = u32::from_le_bytes(u) as usize;
    r.read_exact(&mut u).map_err(truncated)?;
    let n_phi = u32::from_le_bytes(u) as usize;
    let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
        let mut buf = [0u8; 8];
        (0..count)
            .map(|_| {
                r.read_exact(&mut buf).map_err(truncated)?;
                Ok(f64::from_le_bytes(buf))
            })
            .collect()
    };
    let nodes = read_f64s(n_theta)?;
    let weights = read_f64s(n_theta)?;
    let values = read_f64s(n_theta.checked_mul(n_phi).ok_or_else(|| Error::Format("grid too large".into()))?)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after grid values".into()));
    }
    let grid = QuadratureGrid::from_parts(nodes, weights, n_phi).map_err(|e| Error::Format(e.to_string()))?;
    FieldGrid::new(grid, values).map_err(|e| Error::Format(e.to_string()))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("grid file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn float_or_na(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:e}")
    }
}

pub fn write_reports<W: Write + ?Sized>(w: &mut W, reports: &[TestReport]) -> Result<()> {
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "test={}", r.test)?;
        writeln!(w, "l={}", opt(r.l))?;
        writeln!(w, "m={}", opt(r.m))?;
        writeln!(w, "stat={}", float_or_na(r.statistic))?;
        writeln!(w, "p={}", float_or_na(r.p_value))?;
        writeln!(w, "alpha={:e}", r.alpha)?;
        writeln!(w, "n={}", r.n)?;
        writeln!(w, "verdict={}", r.verdict)?;
    }
    Ok(())
}

pub fn read_reports<R: BufRead>(r: R) -> Result<Vec<TestReport>> {
    let mut blocks: Vec<Vec<(usize, String)>> = vec![Vec::new()];
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            if !blocks.last().unwrap().is_empty() {
                blocks.push(Vec::new());
            }
        } else {
            blocks.last_mut().unwrap().push((i + 1, line.trim().to_string()));
        }
    }
    blocks
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            let n0 = b[0].0;
            let mut kv = BTreeMap::new();
            for (n, text) in &b {
                let (k, v) = text.split_once('=').ok_or_else(|| format_err(*n, "expected key=value"))?;
                kv.insert(k.to_string(), v.to_string());
            }
            let get = |k: &str| kv.get(k).ok_or_else(|| format_err(n0, format!("report lacks '{k}='")));
            let float = |k: &str| -> Result<f64> {
                let v = get(k)?;
                if v == "NA" { Ok(f64::NAN) } else { parse_num(v, n0, k) }
            };
            let l = match get("l")?.as_str() {
                "NA" => None,
                v => Some(parse_num(v, n0, "l")?),
            };
            let m = match get("m")?.as_str() {
                "NA" => None,
                v => Some(parse_num(v, n0, "m")?),
            };
            let verdict = match get("verdict")?.as_str() {
                "pass" => Verdict::Pass,
                "reject" => Verdict::Reject,
                "inconclusive" => Verdict::Inconclusive,
                other => return Err(format_err(n0, format!("unknown verdict '{other}'"))),
            };
            Ok(TestReport {
                test: get("test")?.clone(),
                l,
                m,
                statistic: float("stat")?,
                p_value: float("p")?,
                n: kv.get("n").map_or(Ok(0), |v| parse_num(v, n0, "n"))?,
                alpha: float("alpha")?,
                verdict,
            })
        })
        .collect()
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}
