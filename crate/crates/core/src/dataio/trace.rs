//! One-port Touchstone (v1) and CSV trace files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::abcd::C64;
use crate::error::{Error, Result};
use crate::sweep::SweepResult;

pub const CSV_HEADER: [&str; 3] = ["freq_hz", "s11_re", "s11_im"];
pub const S1P_HEADER: &str = "# Hz S RI R 50";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Touchstone,
    Csv,
}

impl TraceFormat {
    /// From the extension: `.csv` is CSV, `.s1p` (or anything else) Touchstone.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "csv" => Self::Csv,
            _ => Self::Touchstone,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Touchstone => "touchstone-s1p",
            Self::Csv => "csv",
        }
    }
}

pub fn read_trace(path: &Path) -> Result<SweepResult> {
    let text = fs::read_to_string(path)?;
    let format = TraceFormat::from_path(path);
    let sweep = match format {
        TraceFormat::Touchstone => parse_touchstone(&text)?,
        TraceFormat::Csv => parse_csv(&text)?,
    };
    Ok(sweep
        .with_meta("path", path.display().to_string())
        .with_meta("format", format.name()))
}

pub fn write_trace(sweep: &SweepResult, path: &Path, format: TraceFormat) -> Result<()> {
    sweep.validate()?;
    let text = match format {
        TraceFormat::Touchstone => format_touchstone(sweep),
        TraceFormat::Csv => format_csv(sweep)?,
    };
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    Ri,
    Ma,
    Db,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_touchstone(text: &str) -> Result<SweepResult> {
    // Touchstone v1 defaults when no option line is present
    let mut scale = 1e9;
    let mut layout = Layout::Ma;
    let mut reference = 50.0;
    let mut seen_options = false;
    let mut freqs = Vec::new();
    let mut s11 = Vec::new();
    let mut meta = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        if let Some((key, value)) = meta_comment(raw) {
            meta.push((key, value));
            continue;
        }
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_options {
                return Err(parse_err(line_no, "repeated option line"));
            }
            if !freqs.is_empty() {
                return Err(parse_err(line_no, "option line after data"));
            }
            seen_options = true;
            let mut tokens = opts.split_whitespace();
            while let Some(tok) = tokens.next() {
                match tok.to_ascii_uppercase().as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => return Err(parse_err(line_no, format!("unsupported parameter {tok}"))),
                    "RI" => layout = Layout::Ri,
                    "MA" => layout = Layout::Ma,
                    "DB" => layout = Layout::Db,
                    "R" => {
                        let v = tokens.next().ok_or_else(|| parse_err(line_no, "missing reference after R"))?;
                        reference = v
                            .parse::<f64>()
                            .map_err(|_| parse_err(line_no, format!("bad reference {v:?}")))?;
                    }
                    other => return Err(parse_err(line_no, format!("unknown option {other:?}"))),
                }
            }
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(line_no, format!("bad number {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 3 {
            return Err(parse_err(line_no, format!("expected 3 values for a one-port row, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line_no, "non-finite value"));
        }
        let s = match layout {
            Layout::Ri => C64::new(values[1], values[2]),
            Layout::Ma => C64::from_polar(values[1], values[2].to_radians()),
            Layout::Db => C64::from_polar(10f64.powf(values[1] / 20.0), values[2].to_radians()),
        };
        freqs.push(values[0] * scale);
        s11.push(s);
    }
    if freqs.is_empty() {
        return Err(parse_err(text.lines().count().max(1), "no data rows"));
    }
    let mut sweep = SweepResult::new(freqs, s11)?;
    for (k, v) in meta {
        sweep = sweep.with_meta(k, v);
    }
    if reference != 50.0 {
        sweep = sweep.with_meta("reference_ohm", reference.to_string());
    }
    Ok(sweep)
}

/// `! key: value` comment lines, as written by [`write_trace`].
fn meta_comment(raw: &str) -> Option<(&str, &str)> {
    let (key, value) = raw.trim().strip_prefix('!')?.split_once(':')?;
    let key = key.trim();
    let plain = !key.is_empty() && key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_');
    plain.then(|| (key, value.trim()))
}

fn format_touchstone(sweep: &SweepResult) -> String {
    let mut out = String::new();
    for (k, v) in &sweep.meta {
        let _ = writeln!(out, "! {k}: {}", v.replace('\n', " "));
    }
    out.push_str(S1P_HEADER);
    out.push('\n');
    for (f, s) in sweep.freqs.iter().zip(&sweep.s11) {
        let _ = writeln!(out, "{f:.16e} {:.16e} {:.16e}", s.re, s.im);
    }
    out
}

pub fn parse_csv(text: &str) -> Result<SweepResult> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(parse_err(1, format!("expected header {:?}", CSV_HEADER.join(","))));
    }
    let mut freqs = Vec::new();
    let mut s11 = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", row.len())));
        }
        let mut v = [0.0; 3];
        for (slot, field) in v.iter_mut().zip(row.iter()) {
            *slot = field
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad number {field:?}")))?;
        }
        freqs.push(v[0]);
        s11.push(C64::new(v[1], v[2]));
    }
    if freqs.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    SweepResult::new(freqs, s11)
}

fn format_csv(sweep: &SweepResult) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| Error::Io(e.into()))?;
    for (f, s) in sweep.freqs.iter().zip(&sweep.s11) {
        w.write_record([format!("{f:.16e}"), format!("{:.16e}", s.re), format!("{:.16e}", s.im)])
            .map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}
