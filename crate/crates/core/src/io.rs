//! CSV formats: dense data, sparse estimates, convergence traces and
//! benchmark tables.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64` (integral values without a fractional part), so every writer is
//! deterministic and every reader round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::model::{ConcentrationMatrix, CovarianceMatrix, DataMatrix};
use crate::solvers::{IterationRecord, Variant};
use crate::{Error, Result};

pub const TRIPLET_HEADER: &str = "i,j,value";
pub const TRACE_COLUMNS: [&str; 8] = [
    "iter",
    "objective",
    "delta_subg",
    "delta_func",
    "step_size",
    "backtracks",
    "nnz",
    "elapsed_ms",
];

pub fn format_float(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        // `{}` prints integral values without ".0"; "-0" keeps the sign bit
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

fn parse_float(cell: &str, path: &Path, line: usize, column: usize) -> Result<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return Err(Error::parse(path, line, column, "empty cell"));
    }
    t.parse::<f64>()
        .map_err(|_| Error::parse(path, line, column, format!("not a number: `{t}`")))
}

fn parse_index(cell: &str, path: &Path, line: usize, column: usize) -> Result<usize> {
    let t = cell.trim();
    t.parse::<usize>()
        .map_err(|_| Error::parse(path, line, column, format!("not a nonnegative integer: `{t}`")))
}

fn reader(path: &Path, has_header: bool) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

fn line_of(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

/// Reads a rectangular numeric CSV (rows are observations).
pub fn read_dense_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    let m = read_matrix(path.as_ref(), has_header)?;
    DataMatrix::new(m)
}

/// Reads a `p × p` covariance matrix from CSV.
pub fn read_covariance_csv(path: impl AsRef<Path>, has_header: bool) -> Result<CovarianceMatrix> {
    let m = read_matrix(path.as_ref(), has_header)?;
    if m.nrows() != m.ncols() {
        return Err(Error::parse(
            path.as_ref(),
            1,
            1,
            format!("covariance must be square, got {} × {}", m.nrows(), m.ncols()),
        ));
    }
    CovarianceMatrix::new(m)
}

fn read_matrix(path: &Path, has_header: bool) -> Result<Array2<f64>> {
    let mut rdr = reader(path, has_header)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = line_of(&record, k + 1);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::parse(
                    path,
                    line,
                    record.len().min(w) + 1,
                    format!("ragged row: expected {w} fields, found {}", record.len()),
                ));
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v = parse_float(cell, path, line, c + 1)?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    line,
                    c + 1,
                    format!("non-finite value `{}`", cell.trim()),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = match width {
        Some(w) if rows > 0 => w,
        _ => return Err(Error::parse(path, 1, 1, "no data rows")),
    };
    Ok(Array2::from_shape_vec((rows, width), values).expect("rectangular by construction"))
}

/// Writes a matrix as headerless CSV.
pub fn write_dense_csv(m: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// `i,j,value` with 1-based indices: the diagonal first, then the upper
/// triangle row-major.
pub fn format_triplets(omega: &ConcentrationMatrix) -> String {
    let mut out = String::from(TRIPLET_HEADER);
    out.push('\n');
    for (i, &d) in omega.diagonal().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, i + 1, format_float(d));
    }
    for e in omega.offdiag() {
        let _ = writeln!(out, "{},{},{}", e.row + 1, e.col + 1, format_float(e.value));
    }
    out
}

pub fn write_sparse_triplets(omega: &ConcentrationMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_triplets(omega)).map_err(|e| Error::io(path, e))
}

/// Reads triplets written by [`write_sparse_triplets`]. Entries may appear
/// in any order and either triangle; `p` is the largest index. Every
/// diagonal entry must be present and positive.
pub fn read_sparse_triplets(path: impl AsRef<Path>) -> Result<ConcentrationMatrix> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["i", "j", "value"] {
        return Err(Error::parse(path, 1, 1, format!("expected header `{TRIPLET_HEADER}`")));
    }
    let mut diag: Vec<(usize, f64)> = Vec::new();
    let mut off = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut p = 0;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = line_of(&record, k + 2);
        if record.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                1,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let i = parse_index(&record[0], path, line, 1)?;
        let j = parse_index(&record[1], path, line, 2)?;
        if i == 0 || j == 0 {
            return Err(Error::parse(path, line, 1, "indices are 1-based"));
        }
        let v = parse_float(&record[2], path, line, 3)?;
        if !v.is_finite() {
            return Err(Error::parse(path, line, 3, "non-finite value"));
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(Error::parse(path, line, 1, format!("duplicate entry ({i}, {j})")));
        }
        p = p.max(i).max(j);
        if i == j {
            if !(v > 0.0) {
                return Err(Error::parse(
                    path,
                    line,
                    3,
                    format!("diagonal entry ({i}, {i}) is not positive: {v}"),
                ));
            }
            diag.push((i - 1, v));
        } else {
            off.push((i - 1, j - 1, v));
        }
    }
    let mut d = vec![f64::NAN; p];
    for (i, v) in diag {
        d[i] = v;
    }
    if let Some(i) = d.iter().position(|v| v.is_nan()) {
        return Err(Error::parse(
            path,
            1,
            1,
            format!("missing diagonal entry ({}, {})", i + 1, i + 1),
        ));
    }
    ConcentrationMatrix::from_parts(d, off)
}

pub fn format_trace(trace: &[IterationRecord]) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            format_float(r.objective),
            format_float(r.delta_subg),
            format_float(r.delta_func),
            format_float(r.step_size),
            r.backtracks,
            r.nnz,
            format_float(r.elapsed_ms)
        );
    }
    out
}

pub fn write_trace(trace: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_trace(trace)).map_err(|e| Error::io(path, e))
}

/// Reads a trace and checks its schema: all eight columns on every row and
/// `iter` counting up from 1.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<IterationRecord>> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().map(str::trim).collect::<Vec<_>>() != TRACE_COLUMNS {
        return Err(Error::parse(
            path,
            1,
            1,
            format!("expected header `{}`", TRACE_COLUMNS.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = line_of(&record, k + 2);
        if record.len() != TRACE_COLUMNS.len() {
            return Err(Error::parse(
                path,
                line,
                1,
                format!("expected 8 fields, found {}", record.len()),
            ));
        }
        let f = |c: usize| parse_float(&record[c], path, line, c + 1);
        let u = |c: usize| parse_index(&record[c], path, line, c + 1);
        let rec = IterationRecord {
            iter: u(0)?,
            objective: f(1)?,
            delta_subg: f(2)?,
            delta_func: f(3)?,
            step_size: f(4)?,
            backtracks: u(5)?,
            nnz: u(6)?,
            elapsed_ms: f(7)?,
        };
        if rec.iter != out.len() + 1 {
            return Err(Error::parse(
                path,
                line,
                1,
                format!("expected iter {}, found {}", out.len() + 1, rec.iter),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Outcome of one variant in one benchmark cell.
#[derive(Clone, Debug, PartialEq)]
pub enum BenchEntry {
    Done {
        iterations: usize,
        seconds: f64,
    },
    Failed(String),
    /// Variant not requested for this cell.
    Skipped,
}

/// One `(p, n, λ)` row of a benchmark table.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub p: usize,
    pub n: usize,
    pub lambda: f64,
    /// Off-diagonal density of the estimate in percent, if any run finished.
    pub nz_pct: Option<f64>,
    /// Aligned with the `variants` passed to [`format_bench_table`].
    pub entries: Vec<BenchEntry>,
}

/// Columns `p, n, lambda, nz_pct`, then `<variant>_iter, <variant>_seconds`
/// per variant. An `errors` column is appended only if some entry failed.
pub fn format_bench_table(rows: &[BenchRow], variants: &[Variant]) -> String {
    let any_failed = rows
        .iter()
        .any(|r| r.entries.iter().any(|e| matches!(e, BenchEntry::Failed(_))));
    let mut header = vec!["p".to_string(), "n".into(), "lambda".into(), "nz_pct".into()];
    for v in variants {
        header.push(format!("{v}_iter"));
        header.push(format!("{v}_seconds"));
    }
    if any_failed {
        header.push("errors".into());
    }
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.p.to_string(),
            r.n.to_string(),
            format_float(r.lambda),
            r.nz_pct.map(format_float).unwrap_or_default(),
        ];
        let mut errors = Vec::new();
        for (v, e) in variants.iter().zip(&r.entries) {
            match e {
                BenchEntry::Done { iterations, seconds } => {
                    rec.push(iterations.to_string());
                    rec.push(format_float(*seconds));
                }
                BenchEntry::Failed(msg) => {
                    rec.push(String::new());
                    rec.push(String::new());
                    errors.push(format!("{v}: {msg}"));
                }
                BenchEntry::Skipped => {
                    rec.push(String::new());
                    rec.push(String::new());
                }
            }
        }
        if any_failed {
            rec.push(errors.join("; "));
        }
        wtr.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_bench_table(rows: &[BenchRow], variants: &[Variant], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_bench_table(rows, variants)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::fs;

    fn tmp(name: &str, contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-2.0), "-2");
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1e-300), "1e-300");
        assert_eq!(format_float(f64::INFINITY), "inf");
        for v in [0.1 + 0.2, 1.0 / 3.0, -7.123456789012345e-8, 1e22, f64::MIN_POSITIVE] {
            assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn dense_examples() {
        let (_d, path) = tmp("a.csv", "1,2\n3,4\n");
        assert_eq!(
            read_dense_csv(&path, false).unwrap().values(),
            &array![[1.0, 2.0], [3.0, 4.0]]
        );
        let (_d, path) = tmp("b.csv", "x,y\n1,2\n3,4\n");
        assert_eq!(
            read_dense_csv(&path, true).unwrap().values(),
            &array![[1.0, 2.0], [3.0, 4.0]]
        );
    }

    #[test]
    fn dense_errors() {
        let (_d, path) = tmp("a.csv", "1,2\n3\n");
        match read_dense_csv(&path, false).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        let (_d, path) = tmp("b.csv", "1,2\n3,x\n");
        match read_dense_csv(&path, false).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 2)),
            e => panic!("{e}"),
        }
        let (_d, path) = tmp("c.csv", "1,NaN\n");
        assert!(read_dense_csv(&path, false).is_err());
        let (_d, path) = tmp("d.csv", "1,\n");
        assert!(read_dense_csv(&path, false).is_err());
        let (_d, path) = tmp("e.csv", "");
        assert!(read_dense_csv(&path, false).is_err());
    }

    #[test]
    fn identity_triplets() {
        assert_eq!(
            format_triplets(&ConcentrationMatrix::identity(2)),
            "i,j,value\n1,1,1\n2,2,1\n"
        );
    }

    #[test]
    fn triplet_round_trip() {
        let omega =
            ConcentrationMatrix::from_parts(vec![1.0 / 3.0, 2.5, 1e-7], [(0, 2, -0.1 - 0.2), (1, 2, 7.0e-12)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        write_sparse_triplets(&omega, &path).unwrap();
        assert_eq!(read_sparse_triplets(&path).unwrap(), omega);
    }

    #[test]
    fn triplet_errors() {
        for bad in [
            "i,j,value\n1,1,-0.5\n",
            "i,j,value\n1,1,1\n1,1,2\n",
            "i,j,value\n1,1,1\n2,1,0.3\n1,2,0.3\n2,2,1\n",
            "i,j,value\n1,1,1\n1,2,0.5\n",
            "i,j,value\n0,0,1\n",
            "a,b,c\n1,1,1\n",
            "i,j,value\n1,1\n",
        ] {
            let (_d, path) = tmp("t.csv", bad);
            assert!(read_sparse_triplets(&path).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn trace_round_trip() {
        let trace = vec![
            IterationRecord {
                iter: 1,
                objective: -1.25,
                delta_subg: 0.3,
                delta_func: 1.0 / 7.0,
                step_size: 0.5,
                backtracks: 1,
                nnz: 4,
                elapsed_ms: 0.0123,
            },
            IterationRecord {
                iter: 2,
                objective: -1.5,
                delta_subg: 1e-11,
                delta_func: 0.0,
                step_size: 1.0,
                backtracks: 0,
                nnz: 3,
                elapsed_ms: 0.02,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&trace, &path).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace);

        let (_d, bad) = tmp("bad.csv", &format_trace(&trace).replace("\n2,", "\n3,"));
        assert!(read_trace(&bad).is_err());
    }

    #[test]
    fn bench_table_layout() {
        let variants = [Variant::Concord, Variant::CcIsta0];
        let row = BenchRow {
            p: 1000,
            n: 250,
            lambda: 0.163,
            nz_pct: Some(0.99),
            entries: vec![
                BenchEntry::Done {
                    iterations: 9,
                    seconds: 2.6,
                },
                BenchEntry::Done {
                    iterations: 18,
                    seconds: 2.0,
                },
            ],
        };
        let text = format_bench_table(std::slice::from_ref(&row), &variants);
        assert_eq!(
            text,
            "p,n,lambda,nz_pct,concord_iter,concord_seconds,ccista_0_iter,ccista_0_seconds\n\
             1000,250,0.163,0.99,9,2.6,18,2\n"
        );
        assert_eq!(text.lines().next().unwrap().split(',').count(), 4 + 2 * variants.len());
        assert_eq!(
            format_bench_table(&[], &variants),
            "p,n,lambda,nz_pct,concord_iter,concord_seconds,ccista_0_iter,ccista_0_seconds\n"
        );

        let mut failed = row;
        failed.entries[0] = BenchEntry::Failed("step size underflow".into());
        let text = format_bench_table(&[failed], &variants);
        assert!(
            text.starts_with("p,n,lambda,nz_pct,concord_iter,concord_seconds,ccista_0_iter,ccista_0_seconds,errors\n")
        );
        assert!(text.contains("1000,250,0.163,0.99,,,18,2,concord: step size underflow"));
    }
}
