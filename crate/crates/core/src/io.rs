//! CSV and JSON output formats and their parsers.
//!
//! Reals are written with 17 significant digits, so every number reads back
//! bit-identically.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::MeasureMode;
use crate::heat::HeatTraceSeries;
use crate::operators::{Convention, OperatorMatrix};
use crate::spectral::{Spectrum, SpectrumJson};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected {expected} values, found {got}")]
    Length { expected: usize, got: usize },
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_real(s: &str, line: usize) -> Result<f64, IoError> {
    s.trim().parse().map_err(|_| IoError::Parse {
        line,
        message: format!("not a number: {s:?}"),
    })
}

fn write_rows(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn read_rows(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IoError::Parse {
            line: 1,
            message: format!("expected header {}", header.join(",")),
        });
    }
    Ok(r.records().collect::<Result<_, _>>()?)
}

/// Dense matrix CSV: a header of column labels, then one labelled row per
/// row of the matrix.
pub fn matrix_csv(m: &OperatorMatrix) -> Result<String, IoError> {
    let mut header = vec!["row"];
    header.extend(m.col_basis.iter().map(String::as_str));
    let rows = m.entries.row_iter().zip(&m.row_basis).map(|(row, label)| {
        std::iter::once(label.clone())
            .chain(row.iter().map(|&x| fmt_real(x)))
            .collect()
    });
    write_rows(&header, rows)
}

/// Row labels, column labels and row-major entries of a matrix CSV.
pub type LabelledRows = (Vec<String>, Vec<String>, Vec<Vec<f64>>);

/// Parses [`matrix_csv`] output.
pub fn parse_matrix_csv(text: &str) -> Result<LabelledRows, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let cols: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        labels.push(rec.get(0).unwrap_or_default().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|s| parse_real(s, line))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != cols.len() {
            return Err(IoError::Length {
                expected: cols.len(),
                got: row.len(),
            });
        }
        rows.push(row);
    }
    Ok((labels, cols, rows))
}

/// Hex SHA-256 of the little-endian bytes of the entries in row-major order.
pub fn entries_digest(m: &OperatorMatrix) -> String {
    let mut h = Sha256::new();
    for row in m.entries.row_iter() {
        for x in row.iter() {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Spectrum of one operator together with the run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectrumBundle {
    pub operator: String,
    pub p: u32,
    pub alpha: f64,
    pub level: i32,
    pub measure: MeasureMode,
    pub convention: Convention,
    pub dim: usize,
    pub entries_digest: String,
    pub fallback: bool,
    pub spectrum: SpectrumJson,
}

impl SpectrumBundle {
    pub fn new(m: &OperatorMatrix, spec: &Spectrum, p: u32, level: i32) -> Self {
        Self {
            operator: format!("{:?}", m.kind),
            p,
            alpha: m.alpha,
            level,
            measure: m.measure,
            convention: m.convention,
            dim: m.dim(),
            entries_digest: entries_digest(m),
            fallback: m.fallback,
            spectrum: SpectrumJson::from(spec),
        }
    }
}

pub const TRACE_HEADER: [&str; 4] = ["t", "traceD", "traceEdge", "difference"];

pub fn trace_csv(series: &HeatTraceSeries) -> Result<String, IoError> {
    let rows = (0..series.times.len()).map(|i| {
        [
            series.times[i],
            series.trace_d[i],
            series.trace_edge[i],
            series.difference[i],
        ]
        .map(fmt_real)
        .to_vec()
    });
    write_rows(&TRACE_HEADER, rows)
}

/// Parses [`trace_csv`] output; the residual floor is not part of the table.
pub fn parse_trace_csv(text: &str) -> Result<HeatTraceSeries, IoError> {
    let mut s = HeatTraceSeries {
        times: Vec::new(),
        trace_d: Vec::new(),
        trace_edge: Vec::new(),
        difference: Vec::new(),
        residual_floor: None,
    };
    for (i, rec) in read_rows(text, &TRACE_HEADER)?.iter().enumerate() {
        let v = rec
            .iter()
            .map(|x| parse_real(x, i + 2))
            .collect::<Result<Vec<_>, _>>()?;
        if v.len() != 4 {
            return Err(IoError::Length {
                expected: 4,
                got: v.len(),
            });
        }
        s.times.push(v[0]);
        s.trace_d.push(v[1]);
        s.trace_edge.push(v[2]);
        s.difference.push(v[3]);
    }
    Ok(s)
}

pub const POINT_HEADER: [&str; 2] = ["point", "value"];

/// Point function CSV: `point,value` rows in point order.
pub fn point_function_csv(labels: &[String], values: &[f64]) -> Result<String, IoError> {
    if labels.len() != values.len() {
        return Err(IoError::Length {
            expected: labels.len(),
            got: values.len(),
        });
    }
    let rows = labels
        .iter()
        .zip(values)
        .map(|(l, &v)| vec![l.clone(), fmt_real(v)]);
    write_rows(&POINT_HEADER, rows)
}

/// Parses a point function against the expected point labels; rows may be
/// in any order but every label must occur exactly once.
pub fn parse_point_function_csv(text: &str, labels: &[String]) -> Result<Vec<f64>, IoError> {
    let rows = read_rows(text, &POINT_HEADER)?;
    if rows.len() != labels.len() {
        return Err(IoError::Length {
            expected: labels.len(),
            got: rows.len(),
        });
    }
    let index: std::collections::HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut out = vec![None; labels.len()];
    for (i, rec) in rows.iter().enumerate() {
        let line = i + 2;
        let label = rec.get(0).unwrap_or_default();
        let &k = index.get(label).ok_or_else(|| IoError::Parse {
            line,
            message: format!("unknown point {label:?}"),
        })?;
        if out[k].is_some() {
            return Err(IoError::Parse {
                line,
                message: format!("duplicate point {label:?}"),
            });
        }
        out[k] = Some(parse_real(rec.get(1).unwrap_or_default(), line)?);
    }
    Ok(out
        .into_iter()
        .map(|v| v.expect("all labels seen"))
        .collect())
}
