use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::problems::Correspondence;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvFormat {
    /// Columns `a_1..a_p, b`.
    Regression,
    /// Columns `v_1..v_p, label` with integer labels `0..K-1`.
    Classification,
    /// Raw numeric grid.
    Matrix,
    /// Columns `u1, v1, u2, v2`.
    Correspondences,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CsvData {
    Regression {
        features: Vec<f64>,
        targets: Vec<f64>,
        p: usize,
    },
    Classification {
        features: Vec<f64>,
        labels: Vec<usize>,
        p: usize,
        classes: usize,
    },
    Matrix {
        data: Vec<f64>,
        rows: usize,
        cols: usize,
    },
    Correspondences(Vec<Correspondence>),
}

/// Reads `path` in the given format. A first row with any non-numeric cell
/// is taken as a header. For `Classification`, the class count is one plus
/// the largest label unless `classes` is given, in which case labels
/// outside `0..classes` are rejected.
pub fn load_csv(path: &Path, format: CsvFormat, classes: Option<usize>) -> Result<CsvData> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, format, classes)
}

pub fn parse_csv(text: &str, format: CsvFormat, classes: Option<usize>) -> Result<CsvData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if idx == 0 && parsed.iter().any(|c| c.is_err()) {
            continue;
        }
        let mut vals = Vec::with_capacity(parsed.len());
        for (col, c) in parsed.into_iter().enumerate() {
            match c {
                Ok(v) if v.is_finite() => vals.push(v),
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("column {}: not a finite number: {:?}", col + 1, &rec[col]),
                    })
                }
            }
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {w} columns, found {}", vals.len()),
                })
            }
            _ => {}
        }
        rows.push((line, vals));
    }
    let cols = width.ok_or(Error::Parse {
        line: 1,
        msg: "no data rows".into(),
    })?;
    let need = match format {
        CsvFormat::Regression | CsvFormat::Classification => 2,
        CsvFormat::Matrix => 1,
        CsvFormat::Correspondences => 4,
    };
    if cols < need || (format == CsvFormat::Correspondences && cols != 4) {
        return Err(Error::Parse {
            line: rows[0].0,
            msg: format!("{format:?} format needs {need} columns, found {cols}"),
        });
    }
    Ok(match format {
        CsvFormat::Matrix => CsvData::Matrix {
            data: rows.iter().flat_map(|(_, r)| r.iter().copied()).collect(),
            rows: rows.len(),
            cols,
        },
        CsvFormat::Regression => CsvData::Regression {
            features: rows.iter().flat_map(|(_, r)| r[..cols - 1].iter().copied()).collect(),
            targets: rows.iter().map(|(_, r)| r[cols - 1]).collect(),
            p: cols - 1,
        },
        CsvFormat::Classification => {
            let mut labels = Vec::with_capacity(rows.len());
            for (line, r) in &rows {
                let v = r[cols - 1];
                let ok = v >= 0.0 && v.fract() == 0.0 && classes.is_none_or(|k| v < k as f64);
                if !ok {
                    return Err(Error::Parse {
                        line: *line,
                        msg: format!("label {v} is not an integer in range"),
                    });
                }
                labels.push(v as usize);
            }
            let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
            CsvData::Classification {
                features: rows.iter().flat_map(|(_, r)| r[..cols - 1].iter().copied()).collect(),
                labels,
                p: cols - 1,
                classes,
            }
        }
        CsvFormat::Correspondences => CsvData::Correspondences(
            rows.iter()
                .map(|(_, r)| Correspondence::new(r[0], r[1], r[2], r[3]))
                .collect(),
        ),
    })
}

/// Subtracts each row's mean in place (row-major `rows x cols`).
pub fn standardize_rows(data: &mut [f64], rows: usize, cols: usize) {
    assert_eq!(data.len(), rows * cols);
    for row in data.chunks_mut(cols.max(1)) {
        let mean = row.iter().sum::<f64>() / cols as f64;
        row.iter_mut().for_each(|v| *v -= mean);
        // A second pass removes the rounding left by the first.
        let resid = row.iter().sum::<f64>() / cols as f64;
        row.iter_mut().for_each(|v| *v -= resid);
    }
}

/// Writes rows of numbers with an optional header. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(out: W, header: Option<&[&str]>, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if let Some(h) = header {
        w.write_record(h).map_err(io)?;
    }
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
