//! File formats: CSV readers/writers and JSON manifests.
//!
//! Every float is written with 17 significant digits ({:.16e}), which
//! round-trips f64 exactly; every CSV has a single header line. Nothing
//! here records wall-clock state, so reruns are byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const SWEEP_HEADER: &str = "dim,n_states,n_samples,mean_delta_s,std_err,seed,tol";
pub const SAMPLES_HEADER: &str = "dim,n_states,sample_index,delta_s";
pub const FITS_HEADER: &str = "dim,A,se_A,B,se_B,r2";
pub const CONCENTRATION_HEADER: &str = "dim,epsilon,analytic_bound,empirical_tail,ci99,n_pairs,seed";

/// 17 significant digits; exact f64 round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One aggregated sweep CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCsvRow {
    pub dim: usize,
    pub n_states: usize,
    pub n_samples: usize,
    pub mean_delta_s: f64,
    pub std_err: f64,
    pub seed: u64,
    pub tol: f64,
}

impl SweepCsvRow {
    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.dim,
            self.n_states,
            self.n_samples,
            fmt_float(self.mean_delta_s),
            fmt_float(self.std_err),
            self.seed,
            fmt_float(self.tol)
        )
    }
}

/// One per-replicate sweep CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCsvRow {
    pub dim: usize,
    pub n_states: usize,
    pub sample_index: u64,
    pub delta_s: f64,
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line_no: usize,
    field: &str,
    value: &str,
) -> Result<T> {
    value.trim().parse().map_err(|_| Error::CsvParse {
        path: path.display().to_string(),
        line: line_no,
        message: format!("cannot parse {field} from {value:?}"),
    })
}

fn split_columns<'a>(
    path: &Path,
    line_no: usize,
    line: &'a str,
    expected: usize,
) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != expected {
        return Err(Error::CsvParse {
            path: path.display().to_string(),
            line: line_no,
            message: format!("expected {expected} columns, found {}", cols.len()),
        });
    }
    Ok(cols)
}

fn read_lines(path: &Path, header: &str) -> Result<Vec<(usize, String)>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == header => {}
        Some((_, first)) => {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: 1,
                message: format!("expected header {header:?}, found {first:?}"),
            })
        }
        None => {
            return Err(Error::CsvParse {
                path: path.display().to_string(),
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepCsvRow>> {
    read_lines(path, SWEEP_HEADER)?
        .into_iter()
        .map(|(no, line)| {
            let c = split_columns(path, no, &line, 7)?;
            Ok(SweepCsvRow {
                dim: parse_field(path, no, "dim", c[0])?,
                n_states: parse_field(path, no, "n_states", c[1])?,
                n_samples: parse_field(path, no, "n_samples", c[2])?,
                mean_delta_s: parse_field(path, no, "mean_delta_s", c[3])?,
                std_err: parse_field(path, no, "std_err", c[4])?,
                seed: parse_field(path, no, "seed", c[5])?,
                tol: parse_field(path, no, "tol", c[6])?,
            })
        })
        .collect()
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<SampleCsvRow>> {
    read_lines(path, SAMPLES_HEADER)?
        .into_iter()
        .map(|(no, line)| {
            let c = split_columns(path, no, &line, 4)?;
            Ok(SampleCsvRow {
                dim: parse_field(path, no, "dim", c[0])?,
                n_states: parse_field(path, no, "n_states", c[1])?,
                sample_index: parse_field(path, no, "sample_index", c[2])?,
                delta_s: parse_field(path, no, "delta_s", c[3])?,
            })
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut file =
        fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepCsvRow]) -> Result<()> {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn write_samples_csv(path: &Path, rows: &[SampleCsvRow]) -> Result<()> {
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.dim,
            row.n_states,
            row.sample_index,
            fmt_float(row.delta_s)
        ));
    }
    write_file(path, &out)
}

/// One fits.csv row.
#[derive(Debug, Clone)]
pub struct FitCsvRow {
    pub dim: usize,
    pub a: f64,
    pub se_a: f64,
    pub b: f64,
    pub se_b: f64,
    pub r2: f64,
}

pub fn write_fits_csv(path: &Path, rows: &[FitCsvRow]) -> Result<()> {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.dim,
            fmt_float(row.a),
            fmt_float(row.se_a),
            fmt_float(row.b),
            fmt_float(row.se_b),
            fmt_float(row.r2)
        ));
    }
    write_file(path, &out)
}

/// The seed column closes the reproducibility loop per row.
pub fn write_concentration_csv(
    path: &Path,
    rows: &[crate::ConcentrationBoundReport64],
    seed: u64,
) -> Result<()> {
    let mut out = String::from(CONCENTRATION_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.dim,
            fmt_float(r.epsilon),
            fmt_float(r.analytic_bound),
            fmt_float(r.empirical_tail),
            fmt_float(r.ci_halfwidth),
            r.n_samples,
            seed
        ));
    }
    write_file(path, &out)
}

/// `{ tool, version, command, config, outputs }` provenance document.
pub fn write_manifest<C: Serialize>(
    path: &Path,
    command: &str,
    config: &C,
    outputs: &[&str],
) -> Result<()> {
    let doc = serde_json::json!({
        "tool": "hperc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    text.push('\n');
    write_file(path, &text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("document serializes");
    text.push('\n');
    write_file(path, &text)
}
