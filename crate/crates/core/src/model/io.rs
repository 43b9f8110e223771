//! Text formats.
//!
//! Partial matrices: a header line `n m nnz` followed by `nnz` lines
//! `i j value` with 1-based indices. Dense matrices: headerless CSV. Reals
//! are written with 17 significant digits so that `f64` values round-trip
//! exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{PartialMatrix, SideInfo};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_real<T: Real>(tok: &str, path: &Path, line: usize) -> Result<T> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {tok:?}")));
    }
    Ok(T::lit(v))
}

pub fn load_partial<T: Real>(path: impl AsRef<Path>) -> Result<PartialMatrix<T>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 1, "missing header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, hline, "header must be `n m nnz`"))?;
    let [n, m, nnz] = dims[..] else {
        return Err(parse_err(path, hline, "header must be `n m nnz`"));
    };

    let mut entries = Vec::with_capacity(nnz);
    let mut seen = std::collections::HashSet::with_capacity(nnz);
    for (lno, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(path, lno, "expected `i j value`"));
        }
        let idx = |t: &str, bound: usize, name: &str| -> Result<usize> {
            let v: usize = t
                .parse()
                .map_err(|_| parse_err(path, lno, format!("invalid {name} index {t:?}")))?;
            if v == 0 || v > bound {
                return Err(parse_err(path, lno, format!("{name} index {v} outside 1..={bound}")));
            }
            Ok(v - 1)
        };
        let i = idx(toks[0], n, "row")?;
        let j = idx(toks[1], m, "column")?;
        let v = parse_real::<T>(toks[2], path, lno)?;
        if !seen.insert((i, j)) {
            return Err(parse_err(path, lno, format!("duplicate entry ({}, {})", i + 1, j + 1)));
        }
        entries.push((i, j, v));
    }
    if entries.len() != nnz {
        return Err(parse_err(
            path,
            hline,
            format!("header declares {nnz} entries, found {}", entries.len()),
        ));
    }
    PartialMatrix::new(n, m, entries)
}

pub fn save_partial<T: Real>(pm: &PartialMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        writeln!(w, "{} {} {}", pm.nrows(), pm.ncols(), pm.nnz())?;
        for (i, j, v) in pm.iter() {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v.as_f64())?;
        }
        Ok(())
    })
}

/// Loads a headerless CSV, optionally checking its shape.
pub fn load_dense_csv<T: Real>(path: impl AsRef<Path>, rows: Option<usize>, cols: Option<usize>) -> Result<Mat<T>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut count = 0;
    for (i, l) in text.lines().enumerate() {
        let lno = i + 1;
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let before = data.len();
        for tok in l.split(',') {
            data.push(parse_real::<T>(tok, path, lno)?);
        }
        let w = data.len() - before;
        match width {
            None => width = Some(w),
            Some(prev) if prev != w => {
                return Err(parse_err(path, lno, format!("row has {w} columns, expected {prev}")))
            }
            _ => {}
        }
        count += 1;
    }
    let width = width.unwrap_or(0);
    if let Some(r) = rows {
        if r != count {
            return Err(parse_err(path, count, format!("found {count} rows, expected {r}")));
        }
    }
    if let Some(c) = cols {
        if c != width && count > 0 {
            return Err(parse_err(path, 1, format!("found {width} columns, expected {c}")));
        }
    }
    Mat::from_vec(count, width, data)
}

pub fn save_dense_csv<T: Real>(a: &Mat<T>, path: impl AsRef<Path>) -> Result<()> {
    write_with(path.as_ref(), |w| {
        for row in a.rows_iter() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{:.16e}", v.as_f64())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn load_side_info<T: Real>(path: impl AsRef<Path>, n: usize, d: usize) -> Result<SideInfo<T>> {
    SideInfo::new(load_dense_csv(path, Some(n), Some(d))?)
}

pub fn save_side_info<T: Real>(y: &SideInfo<T>, path: impl AsRef<Path>) -> Result<()> {
    save_dense_csv(y.matrix(), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        (dir, p)
    }

    #[test]
    fn minimal_and_empty_files() {
        let (_d, p) = tmp("a.txt", "2 2 1\n1 2 3.5\n");
        let pm: PartialMatrix<f64> = load_partial(&p).unwrap();
        assert_eq!((pm.nrows(), pm.ncols(), pm.nnz()), (2, 2, 1));
        assert_eq!(pm.iter().collect::<Vec<_>>(), vec![(0, 1, 3.5)]);

        let (_d, p) = tmp("b.txt", "3 4 0\n");
        let pm: PartialMatrix<f64> = load_partial(&p).unwrap();
        assert_eq!(pm.nnz(), 0);
    }

    #[test]
    fn malformed_partial_reports_line() {
        for (body, line) in [
            ("2 2 2\n1 1 1.0\n1 1 2.0\n", 3),
            ("2 2 1\n3 1 1.0\n", 2),
            ("2 2 1\n1 x 1.0\n", 2),
            ("2 2\n", 1),
        ] {
            let (_d, p) = tmp("bad.txt", body);
            match load_partial::<f64>(&p) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{body:?}"),
                other => panic!("{body:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn side_info_files() {
        let (_d, p) = tmp("y.csv", "2.0\n");
        assert_eq!(load_side_info::<f64>(&p, 1, 1).unwrap().matrix()[(0, 0)], 2.0);
        let (_d, p) = tmp("y.csv", "1,0\n0,1\n");
        assert_eq!(load_side_info::<f64>(&p, 2, 2).unwrap().matrix(), &Mat::identity(2));
        assert!(matches!(load_side_info::<f64>(&p, 3, 2), Err(Error::Parse { .. })));
        assert!(matches!(load_side_info::<f64>(&p, 2, 3), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = load_partial::<f64>("/nonexistent/definitely/not/here").unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
        assert_eq!(e.exit_code(), 1);
    }
}
