//! Trace ingestion and the canonical CSV writer.
//!
//! The canonical format is one CSV row per interval: `t,f0,f1,...,f{M−1}`
//! with flows in row-major `(source, destination)` order. Lines beginning
//! with `#` before the header are metadata; `# interval_seconds=<n>` is
//! recognized. The Abilene and GÉANT adapters read the public archive
//! layouts described in `docs/formats.md` and produce the same in-memory
//! [`TmSeries`].

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::TmSeries;
use crate::error::{Error, Result};
use crate::Scalar;

pub const DEFAULT_INTERVAL_SECONDS: u32 = 300;
pub const ABILENE_NODES: usize = 12;
pub const ABILENE_INTERVAL_SECONDS: u32 = 300;
/// Abilene archive volumes are in units of 100 bytes per interval.
pub const ABILENE_UNIT_BYTES: f64 = 100.0;
pub const GEANT_INTERVAL_SECONDS: u32 = 900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Abilene,
    Geant,
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "abilene" => Ok(Self::Abilene),
            "geant" | "géant" => Ok(Self::Geant),
            other => Err(Error::Config(format!("unknown trace format `{other}`"))),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Abilene => "abilene",
            Self::Geant => "geant",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Overrides the interval recorded in (or defaulted for) a canonical CSV.
    pub interval_seconds: Option<u32>,
    /// Treat missing entries as zero traffic instead of rejecting the trace.
    pub zero_fill_missing: bool,
}

pub fn load_tm_series<T: Scalar>(
    path: &Path,
    format: TraceFormat,
    opts: &LoadOptions,
) -> Result<TmSeries<T>> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("trace path {} does not exist", path.display()),
        )));
    }
    match format {
        TraceFormat::Csv => load_canonical_csv(path, opts),
        TraceFormat::Abilene => load_abilene(path, opts),
        TraceFormat::Geant => load_geant(path, opts),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn parse_volume(
    path: &Path,
    line: usize,
    cell: &str,
    zero_fill: bool,
) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return if zero_fill {
            Ok(0.0)
        } else {
            Err(parse_err(path, line, "missing entry (enable zero-fill to accept)"))
        };
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value `{cell}`")));
    }
    if v < 0.0 {
        return Err(Error::Validation(format!(
            "{}:{line}: negative traffic volume {v}",
            path.display()
        )));
    }
    Ok(v)
}

fn square_side(m: usize) -> Option<usize> {
    let n = (m as f64).sqrt().round() as usize;
    (n > 0 && n * n == m).then_some(n)
}

fn cast_all<T: Scalar>(values: Vec<f64>) -> Vec<T> {
    values.into_iter().map(T::lit).collect()
}

fn load_canonical_csv<T: Scalar>(path: &Path, opts: &LoadOptions) -> Result<TmSeries<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut interval = None;
    let mut n_flows = None;
    let mut values = Vec::new();
    let mut timestamps = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(m) = n_flows else {
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    if k.trim() == "interval_seconds" {
                        interval = Some(v.trim().parse::<u32>().map_err(|_| {
                            parse_err(path, lineno, format!("bad interval_seconds `{}`", v.trim()))
                        })?);
                    }
                }
                continue;
            }
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cols.first() != Some(&"t") {
                return Err(parse_err(path, lineno, "header must start with `t`"));
            }
            for (k, c) in cols[1..].iter().enumerate() {
                if *c != format!("f{k}") {
                    return Err(parse_err(path, lineno, format!("expected column `f{k}`, found `{c}`")));
                }
            }
            let m = cols.len() - 1;
            if square_side(m).is_none() {
                return Err(Error::Validation(format!(
                    "{}:{lineno}: {m} flow columns is not a perfect square",
                    path.display()
                )));
            }
            n_flows = Some(m);
            continue;
        };
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != m + 1 {
            return Err(Error::Validation(format!(
                "{}:{lineno}: expected {} columns, found {}",
                path.display(),
                m + 1,
                cells.len()
            )));
        }
        let t = cells[0].trim();
        let t: i64 = t
            .parse()
            .or_else(|_| t.parse::<f64>().map(|f| f as i64))
            .map_err(|_| parse_err(path, lineno, format!("bad time index `{t}`")))?;
        timestamps.push(t);
        for cell in &cells[1..] {
            values.push(parse_volume(path, lineno, cell, opts.zero_fill_missing)?);
        }
    }
    let m = n_flows.ok_or_else(|| parse_err(path, 1, "missing header"))?;
    let n = square_side(m).expect("checked at header");
    let interval = opts.interval_seconds.or(interval).unwrap_or(DEFAULT_INTERVAL_SECONDS);
    TmSeries::new(n, interval, cast_all(values), Some(timestamps))
}

/// Writes the canonical CSV. Floats use Rust's shortest round-trip form, so
/// a written trace reloads bit-exactly.
pub fn write_canonical_csv<T: Scalar, W: Write>(tm: &TmSeries<T>, mut out: W) -> Result<()> {
    writeln!(out, "# interval_seconds={}", tm.interval_seconds())?;
    write!(out, "t")?;
    for k in 0..tm.n_flows() {
        write!(out, ",f{k}")?;
    }
    writeln!(out)?;
    for t in 0..tm.len() {
        let stamp = tm.timestamps().map_or(t as i64, |ts| ts[t]);
        write!(out, "{stamp}")?;
        for v in tm.matrix(t) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_canonical_csv<T: Scalar>(tm: &TmSeries<T>, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_canonical_csv(tm, &mut w)?;
    w.flush()?;
    Ok(())
}

fn sorted_files(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Validation(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(&keep))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Validation(format!("no trace files found in {}", dir.display())));
    }
    Ok(files)
}

/// Abilene archive: files `X01`, `X02`, … (one week each), one interval per
/// line. A line holds either 720 columns (five estimates per OD pair, the
/// measured `realOD` first) or 144 measured columns.
fn load_abilene<T: Scalar>(dir: &Path, opts: &LoadOptions) -> Result<TmSeries<T>> {
    let name_re = Regex::new(r"^X(\d+)(\.txt|\.dat)?$").expect("static regex");
    let mut files = sorted_files(dir, |n| name_re.is_match(n))?;
    files.sort_by_key(|p| {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        name_re.captures(name).and_then(|c| c[1].parse::<u32>().ok()).unwrap_or(u32::MAX)
    });
    let m = ABILENE_NODES * ABILENE_NODES;
    let mut values = Vec::new();
    for file in &files {
        let reader = BufReader::new(fs::File::open(file)?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.is_empty() {
                continue;
            }
            let stride = match cells.len() {
                n if n == 5 * m => 5,
                n if n == m => 1,
                n => {
                    return Err(Error::Validation(format!(
                        "{}:{}: expected {} or {} columns, found {n}",
                        file.display(),
                        idx + 1,
                        5 * m,
                        m
                    )))
                }
            };
            for k in 0..m {
                let v = parse_volume(file, idx + 1, cells[k * stride], opts.zero_fill_missing)?;
                values.push(v * ABILENE_UNIT_BYTES);
            }
        }
    }
    TmSeries::new(ABILENE_NODES, ABILENE_INTERVAL_SECONDS, cast_all(values), None)
}

/// GÉANT (TOTEM) archive: one XML file per 15-minute interval, sorted by
/// file name, with `<src id="i"><dst id="j">v</dst>…</src>` entries in kbit/s
/// and 1-based node ids. Volumes are converted to bytes per interval.
fn load_geant<T: Scalar>(dir: &Path, opts: &LoadOptions) -> Result<TmSeries<T>> {
    let files = sorted_files(dir, |n| n.to_ascii_lowercase().ends_with(".xml"))?;
    let src_re = Regex::new(r#"(?s)<src\s+id\s*=\s*"(\d+)"\s*>(.*?)</src>"#).expect("static regex");
    let dst_re = Regex::new(r#"<dst\s+id\s*=\s*"(\d+)"\s*>([^<]*)</dst>"#).expect("static regex");
    let kbps_to_bytes = 1000.0 / 8.0 * f64::from(GEANT_INTERVAL_SECONDS);

    let mut steps: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(files.len());
    let mut n_nodes = 0usize;
    for file in &files {
        let text = fs::read_to_string(file)?;
        let line_of = |offset: usize| text[..offset].matches('\n').count() + 1;
        let mut entries = Vec::new();
        for src in src_re.captures_iter(&text) {
            let i: usize = src[1].parse().map_err(|_| parse_err(file, line_of(src.get(1).unwrap().start()), "bad src id"))?;
            let body = src.get(2).expect("group 2");
            for dst in dst_re.captures_iter(body.as_str()) {
                let at = line_of(body.start() + dst.get(0).unwrap().start());
                let j: usize = dst[1].parse().map_err(|_| parse_err(file, at, "bad dst id"))?;
                if i == 0 || j == 0 {
                    return Err(parse_err(file, at, "node ids are 1-based"));
                }
                let v = parse_volume(file, at, &dst[2], opts.zero_fill_missing)?;
                n_nodes = n_nodes.max(i).max(j);
                entries.push((i - 1, j - 1, v * kbps_to_bytes));
            }
        }
        if entries.is_empty() {
            return Err(parse_err(file, 1, "no <src>/<dst> entries found"));
        }
        steps.push(entries);
    }

    let m = n_nodes * n_nodes;
    let mut values = Vec::with_capacity(steps.len() * m);
    for (file, entries) in files.iter().zip(&steps) {
        let mut tm = vec![None; m];
        for &(i, j, v) in entries {
            tm[i * n_nodes + j] = Some(v);
        }
        if !opts.zero_fill_missing {
            if let Some(k) = tm.iter().position(Option::is_none) {
                return Err(Error::Validation(format!(
                    "{}: missing entry for pair ({}, {}) (enable zero-fill to accept)",
                    file.display(),
                    k / n_nodes + 1,
                    k % n_nodes + 1
                )));
            }
        }
        values.extend(tm.into_iter().map(|v| v.unwrap_or(0.0)));
    }
    TmSeries::new(n_nodes, GEANT_INTERVAL_SECONDS, cast_all(values), None)
}
