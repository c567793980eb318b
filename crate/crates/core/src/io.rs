//! Plain-text point files: one point per CSV row, optionally preceded by a
//! `# n=<n> d=<d>` header line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::cloud::PointCloud;
use crate::error::{MmlsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CloudFile {
    pub cloud: PointCloud,
    /// Ambient dimension declared in the header, if any.
    pub declared_n: Option<usize>,
    /// Intrinsic dimension declared in the header, if any.
    pub declared_d: Option<usize>,
}

fn parse_header(line: &str) -> Result<(Option<usize>, Option<usize>)> {
    let mut n = None;
    let mut d = None;
    for token in line.trim_start_matches('#').split_whitespace() {
        let Some((key, value)) = token.split_once('=') else {
            continue;
        };
        let parsed = value.parse::<usize>().map_err(|_| MmlsError::Parse {
            row: 1,
            message: format!("header field `{token}` is not an integer"),
        })?;
        match key {
            "n" => n = Some(parsed),
            "d" => d = Some(parsed),
            _ => {}
        }
    }
    Ok((n, d))
}

/// Parses point-file text. Rows are numbered from 1 in error messages.
pub fn parse_cloud(text: &str) -> Result<CloudFile> {
    let mut declared = (None, None);
    if let Some(first) = text.lines().next() {
        if first.trim_start().starts_with('#') {
            declared = parse_header(first.trim_start())?;
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut values: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| MmlsError::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(MmlsError::Parse {
                    row,
                    message: format!("expected {w} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| MmlsError::Parse {
                row,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(MmlsError::Parse {
                    row,
                    message: format!("non-finite value `{field}`"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }

    let Some(n) = width else {
        return Err(MmlsError::Parse {
            row: 0,
            message: "file contains no points".into(),
        });
    };
    if let Some(declared_n) = declared.0 {
        if declared_n != n {
            return Err(MmlsError::Parse {
                row: 1,
                message: format!("header declares n={declared_n} but rows have {n} columns"),
            });
        }
    }
    let cloud = PointCloud::new(DMatrix::from_column_slice(n, rows, &values))?;
    Ok(CloudFile {
        cloud,
        declared_n: declared.0,
        declared_d: declared.1,
    })
}

pub fn read_cloud(path: &Path) -> Result<CloudFile> {
    let text =
        fs::read_to_string(path).map_err(|e| MmlsError::Io(format!("{}: {e}", path.display())))?;
    parse_cloud(&text)
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}

pub fn format_cloud(points: &DMatrix<f64>, d: Option<usize>) -> String {
    let mut out = String::new();
    match d {
        Some(d) => writeln!(out, "# n={} d={d}", points.nrows()).unwrap(),
        None => writeln!(out, "# n={}", points.nrows()).unwrap(),
    }
    for col in points.column_iter() {
        let row: Vec<String> = col.iter().map(|v| format_value(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_cloud(path: &Path, points: &DMatrix<f64>, d: Option<usize>) -> Result<()> {
    fs::write(path, format_cloud(points, d))
        .map_err(|e| MmlsError::Io(format!("{}: {e}", path.display())))
}
