//! File formats: activation matrices (CSV and binary), label files, and
//! scan reports.
//!
//! CSV: UTF-8, comma separated, one sample per line, LF or CRLF. A header
//! row is present iff the first token of the file is not a number; when the
//! header's first field is `id`, the first column holds row identifiers.
//!
//! Binary (version 1): `b"NPSS"`, `u32` version, `u64` rows, `u64` cols,
//! then `rows*cols` little-endian `f64` values, row-major.
//!
//! All writers go through a temporary file in the target directory that is
//! renamed into place, so a failed write leaves no partial output.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ActivationMatrix, LabelVector};
use crate::scan::{IndividualScore, RestartTrace, ScanMode, ScanResult};
use crate::score::ScoreFunction;

pub const BINARY_MAGIC: &[u8; 4] = b"NPSS";
pub const BINARY_VERSION: u32 = 1;
const BINARY_HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// Binary if the file starts with the magic bytes, CSV otherwise.
    pub fn detect(path: &Path) -> Result<Self> {
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut head = [0u8; 4];
        let mut filled = 0;
        while filled < 4 {
            match f.read(&mut head[filled..]).map_err(|e| Error::io(path, e))? {
                0 => break,
                n => filled += n,
            }
        }
        Ok(if filled == 4 && &head == BINARY_MAGIC {
            MatrixFormat::Binary
        } else {
            MatrixFormat::Csv
        })
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<ActivationMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    match format {
        MatrixFormat::Csv => parse_csv(&bytes, &context),
        MatrixFormat::Binary => decode_binary(&bytes, &context),
    }
}

/// Loads a matrix, detecting the format from the file contents.
pub fn load_matrix_auto(path: &Path) -> Result<ActivationMatrix> {
    load_matrix(path, MatrixFormat::detect(path)?)
}

pub fn save_matrix(m: &ActivationMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
        MatrixFormat::Binary => encode_binary(m),
    };
    write_atomic(path, &bytes)
}

fn parse_number(token: &str) -> Option<f64> {
    token.trim().parse::<f64>().ok()
}

/// Parses CSV activations. `context` names the source in error messages.
pub fn parse_csv(bytes: &[u8], context: &str) -> Result<ActivationMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut width: Option<usize> = None;
    let mut with_ids = false;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut first = true;

    for record in reader.records() {
        let record = record.map_err(|e| Error::format(context, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if first {
            first = false;
            let head = record.get(0).unwrap_or("");
            if parse_number(head).is_none() {
                with_ids = head.eq_ignore_ascii_case("id");
                width = Some(record.len());
                continue;
            }
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::format(
                    context,
                    format!(
                        "ragged row at line {line}: expected {w} fields, found {}",
                        record.len()
                    ),
                ));
            }
            Some(_) => {}
        }
        let mut fields = record.iter();
        if with_ids {
            ids.push(fields.next().unwrap_or("").to_string());
        }
        for (col, token) in fields.enumerate() {
            let v = parse_number(token).ok_or_else(|| {
                Error::format(
                    context,
                    format!("invalid number '{token}' at line {line}, column {}", col + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: context.to_string(),
                    row: rows,
                    col,
                });
            }
            values.push(v);
        }
        rows += 1;
    }

    if rows == 0 {
        return Err(Error::format(context, "empty file: no data rows"));
    }
    let cols = values.len() / rows;
    if cols == 0 {
        return Err(Error::format(context, "no value columns"));
    }
    let m = ActivationMatrix::new(rows, cols, values)?;
    if with_ids {
        m.with_row_ids(ids)
    } else {
        Ok(m)
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn encode_csv(m: &ActivationMatrix) -> String {
    let mut out = String::new();
    if let Some(ids) = m.row_ids() {
        out.push_str("id");
        for j in 0..m.cols() {
            out.push_str(&format!(",node_{j}"));
        }
        out.push('\n');
        for (i, id) in ids.iter().enumerate() {
            out.push_str(id);
            for &v in m.row(i) {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
    } else {
        for i in 0..m.rows() {
            let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn encode_binary(m: &ActivationMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + 8 * m.values().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8], context: &str) -> Result<ActivationMatrix> {
    if bytes.is_empty() {
        return Err(Error::format(context, "empty file"));
    }
    if bytes.len() < BINARY_HEADER_LEN || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::format(context, "missing NPSS binary header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != BINARY_VERSION {
        return Err(Error::format(context, format!("unsupported binary version {version}")));
    }
    let rows = u64_at(8) as usize;
    let cols = u64_at(16) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(BINARY_HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            context,
            format!("{rows}x{cols} header does not match payload of {} bytes", bytes.len() - BINARY_HEADER_LEN),
        ));
    }
    let values: Vec<f64> = bytes[BINARY_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ActivationMatrix::new(rows, cols, values).map_err(|e| match e {
        Error::NonFinite { row, col, .. } => Error::NonFinite {
            context: context.to_string(),
            row,
            col,
        },
        other => other,
    })
}

pub fn load_labels(path: &Path) -> Result<LabelVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, &path.display().to_string())
}

pub fn parse_labels(text: &str, context: &str) -> Result<LabelVector> {
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match line.trim() {
            "" => continue,
            "0" => flags.push(false),
            "1" => flags.push(true),
            other => {
                return Err(Error::format(
                    context,
                    format!("label '{other}' at line {} is not 0 or 1", i + 1),
                ))
            }
        }
    }
    Ok(LabelVector::new(flags))
}

pub fn save_labels(labels: &LabelVector, path: &Path) -> Result<()> {
    let text: String = labels
        .as_slice()
        .iter()
        .map(|&l| if l { "1\n" } else { "0\n" })
        .collect();
    write_atomic(path, text.as_bytes())
}

/// Membership vector: one `0`/`1` line per element of `0..len`.
pub fn save_indicator(subset: &[usize], len: usize, path: &Path) -> Result<()> {
    let mut flags = vec![false; len];
    for &i in subset {
        if i >= len {
            return Err(Error::Precondition(format!("index {i} out of bounds ({len})")));
        }
        flags[i] = true;
    }
    save_labels(&LabelVector::new(flags), path)
}

/// On-disk form of a group-scan result.
#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    mode: ScanMode,
    score_function: ScoreFunction,
    score: f64,
    row_subset: Vec<usize>,
    col_subset: Vec<usize>,
    restarts: usize,
    iterations_per_restart: Vec<usize>,
    restart_scores: Vec<f64>,
    alpha_at_max: f64,
    wall_time_seconds: f64,
    seed: u64,
}

fn check_reportable(result: &ScanResult) -> Result<()> {
    if !result.score.is_finite() {
        return Err(Error::Precondition(format!("score {} is not finite", result.score)));
    }
    if result.row_subset.is_empty() || result.col_subset.is_empty() {
        return Err(Error::DegenerateSubset(format!(
            "{} rows x {} columns",
            result.row_subset.len(),
            result.col_subset.len()
        )));
    }
    Ok(())
}

/// Serializes a group-scan result as pretty-printed JSON.
pub fn encode_result(result: &ScanResult) -> Result<String> {
    check_reportable(result)?;
    let file = ReportFile {
        mode: result.mode,
        score_function: result.score_function,
        score: result.score,
        row_subset: result.row_subset.clone(),
        col_subset: result.col_subset.clone(),
        restarts: result.restart_traces.len(),
        iterations_per_restart: result.restart_traces.iter().map(|t| t.iterations).collect(),
        restart_scores: result.restart_traces.iter().map(|t| t.score).collect(),
        alpha_at_max: result.alpha_at_max,
        wall_time_seconds: result.wall_time_seconds,
        seed: result.seed,
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::format("scan report", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn decode_result(text: &str, context: &str) -> Result<ScanResult> {
    let file: ReportFile =
        serde_json::from_str(text).map_err(|e| Error::format(context, e.to_string()))?;
    if file.iterations_per_restart.len() != file.restarts || file.restart_scores.len() != file.restarts {
        return Err(Error::format(context, "restart trace lengths disagree with 'restarts'"));
    }
    let result = ScanResult {
        mode: file.mode,
        score_function: file.score_function,
        score: file.score,
        row_subset: file.row_subset,
        col_subset: file.col_subset,
        alpha_at_max: file.alpha_at_max,
        restart_traces: file
            .restart_scores
            .iter()
            .zip(&file.iterations_per_restart)
            .map(|(&score, &iterations)| RestartTrace { score, iterations })
            .collect(),
        wall_time_seconds: file.wall_time_seconds,
        seed: file.seed,
    };
    check_reportable(&result)?;
    Ok(result)
}

pub fn save_result(result: &ScanResult, path: &Path) -> Result<()> {
    write_atomic(path, encode_result(result)?.as_bytes())
}

pub fn load_result(path: &Path) -> Result<ScanResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_result(&text, &path.display().to_string())
}

/// On-disk form of an individual-mode scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualReport {
    pub mode: ScanMode,
    pub score_function: ScoreFunction,
    pub alpha_max: f64,
    pub wall_time_seconds: f64,
    pub seed: u64,
    pub rows: Vec<IndividualScore>,
}

pub fn save_individual(report: &IndividualReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::format("individual report", e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_individual(path: &Path) -> Result<IndividualReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
