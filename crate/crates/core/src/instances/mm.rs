use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcore::NonNegMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads a real or integer Matrix Market file, general or symmetric.
pub fn read_matrix_market<T: Scalar>(path: impl AsRef<Path>, abs: bool) -> Result<NonNegMatrix<T>> {
    parse_matrix_market(BufReader::new(File::open(path)?), abs)
}

/// Parses Matrix Market text. Symmetric storage is mirrored, duplicates are
/// summed and explicit zeros dropped. Negative values are an error unless
/// `abs` replaces them by their magnitude.
pub fn parse_matrix_market<T: Scalar>(reader: impl BufRead, abs: bool) -> Result<NonNegMatrix<T>> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (hline, header) = match lines.next() {
        Some((k, l)) => (k, l?),
        None => return Err(parse_err(1, "empty input")),
    };
    let words: Vec<String> = header.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(hline, "expected `%%MatrixMarket matrix <format> <field> <symmetry>`"));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(hline, format!("unsupported format `{other}`"))),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_err(hline, format!("unsupported field `{}`", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(hline, format!("unsupported symmetry `{other}`"))),
    };

    // data lines with comments and blanks skipped
    let mut data = lines.filter_map(|(k, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        other => Some((k, other)),
    });
    let mut last_line = hline;
    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        match data.next() {
            Some((k, l)) => {
                last_line = k;
                Ok((k, l?.split_whitespace().map(str::to_string).collect()))
            }
            None => Err(parse_err(last_line + 1, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (sline, size) = next("size line")?;
    let want = if layout == Layout::Coordinate { 3 } else { 2 };
    if size.len() != want {
        return Err(parse_err(sline, format!("size line needs {want} integers")));
    }
    let dims: Vec<usize> = size
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| parse_err(sline, format!("bad integer `{s}`"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = (dims[0], dims[1]);
    if rows != cols {
        return Err(Error::NonSquare { rows, cols });
    }
    let n = rows;
    if n == 0 {
        return Err(parse_err(sline, "dimension must be at least 1"));
    }

    let value = |line: usize, s: &str, i: usize, j: usize| -> Result<T> {
        let v: f64 = s.parse().map_err(|_| parse_err(line, format!("bad value `{s}`")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value at ({}, {})", i + 1, j + 1)));
        }
        if v < 0.0 && !abs {
            return Err(parse_err(line, format!("negative value {v} at ({}, {}); pass --abs to use magnitudes", i + 1, j + 1)));
        }
        Ok(T::lit(v.abs()))
    };

    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut trips = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
            for k in 0..nnz {
                let (line, f) = next(&format!("{nnz} entries, found {k}"))?;
                if f.len() < 3 {
                    return Err(parse_err(line, "entry needs `row col value`"));
                }
                let idx = |s: &str| -> Result<usize> {
                    match s.parse::<usize>() {
                        Ok(v) if (1..=n).contains(&v) => Ok(v - 1),
                        _ => Err(parse_err(line, format!("index `{s}` outside 1..={n}"))),
                    }
                };
                let (i, j) = (idx(&f[0])?, idx(&f[1])?);
                let v = value(line, &f[2], i, j)?;
                trips.push((i, j, v));
                if symmetric && i != j {
                    trips.push((j, i, v));
                }
            }
            NonNegMatrix::from_triplets(n, trips)
        }
        Layout::Array => {
            let mut dense = vec![T::zero(); n * n];
            let total = if symmetric { n * (n + 1) / 2 } else { n * n };
            let mut k = 0;
            // column-major; symmetric stores the lower triangle
            for j in 0..n {
                let start = if symmetric { j } else { 0 };
                for i in start..n {
                    let (line, f) = next(&format!("{total} values, found {k}"))?;
                    if f.len() != 1 {
                        return Err(parse_err(line, "array entries hold one value per line"));
                    }
                    let v = value(line, &f[0], i, j)?;
                    dense[i * n + j] = v;
                    dense[j * n + i] = if symmetric { v } else { dense[j * n + i] };
                    k += 1;
                }
            }
            NonNegMatrix::from_dense(n, dense)
        }
    }
}

/// Writes coordinate/real/general with 17 significant digits, so `f64` values round-trip exactly.
pub fn write_matrix_market<T: Scalar>(a: &NonNegMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.dim(), a.dim(), a.nnz())?;
    for (i, j, v) in a.entries() {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v.to_f64().unwrap_or(f64::NAN))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<NonNegMatrix<f64>> {
        parse_matrix_market(s.as_bytes(), false)
    }

    #[test]
    fn coordinate_diagonal() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.0\n2 2 2.0\n").unwrap();
        assert_eq!(a.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!(a.is_sparse());
    }

    #[test]
    fn symmetric_lower_is_mirrored() {
        let a = parse("%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 4\n3 1 2.5\n2 2 1\n").unwrap();
        assert_eq!(a.get(0, 2), 2.5);
        assert_eq!(a.get(2, 0), 2.5);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn array_formats() {
        let g = parse("%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n").unwrap();
        assert_eq!(g.to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let s = parse("%%MatrixMarket matrix array integer symmetric\n2 2\n1\n5\n2\n").unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, 5.0], vec![5.0, 2.0]]);
    }

    #[test]
    fn duplicates_summed_and_zeros_dropped() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 1\n1 1 2\n2 2 0\n2 1 1\n").unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n2 2 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        match parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("%%MatrixMarket matrix coordinate complex general\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("%%MatrixMarket matrix coordinate real general\n2 3 0\n"), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn negatives_need_abs() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 -1.5\n2 2 2\n";
        assert!(matches!(parse(text), Err(Error::Parse { line: 3, .. })));
        let a: NonNegMatrix<f64> = parse_matrix_market(text.as_bytes(), true).unwrap();
        assert_eq!(a.get(0, 0), 1.5);
    }

    #[test]
    fn write_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.mtx");
        write_matrix_market(&NonNegMatrix::<f64>::identity(2), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1).unwrap(), "2 2 2");
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(vals in prop::collection::vec(prop_oneof![Just(0.0f64), 1e-300f64..1e300], 1..50)) {
            let n = (vals.len() as f64).sqrt().ceil() as usize;
            let trips: Vec<_> = vals.iter().enumerate().map(|(k, &v)| (k / n, k % n, v)).collect();
            let a = NonNegMatrix::from_triplets(n, trips).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("a.mtx");
            write_matrix_market(&a, &p).unwrap();
            let b: NonNegMatrix<f64> = read_matrix_market(&p, false).unwrap();
            prop_assert_eq!(a.nnz(), b.nnz());
            prop_assert_eq!(a, b);
        }
    }
}
