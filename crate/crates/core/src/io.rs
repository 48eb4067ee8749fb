//! Text file formats shared with the command-line front end.
//!
//! Matrix file: line 1 is `M N K`, then `M` lines of `N*K` comma-separated
//! values (block `k` occupying columns `k*N..(k+1)*N`). Measurement file:
//! line 1 is `L K sigma`, then `L` lines of `K` comma-separated values.
//! Values are written in the shortest decimal form that round-trips.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::BlockMatrix;
use crate::scalar::{from_f64, Scalar};
use crate::sensing::MeasurementSet;

fn parse_value<T: Scalar>(token: &str, line: usize) -> Result<T> {
    let v: f64 = token.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, found {token:?}"),
    })?;
    Ok(from_f64(v))
}

fn parse_usize(token: &str, line: usize, what: &str) -> Result<usize> {
    token.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected {what}, found {token:?}"),
    })
}

pub fn write_block_matrix<T: Scalar, W: Write>(w: &mut W, x: &BlockMatrix<T>) -> Result<()> {
    writeln!(w, "{} {} {}", x.rows(), x.block_cols(), x.num_blocks())?;
    let data = x.as_matrix();
    for i in 0..x.rows() {
        let row: Vec<String> = (0..data.ncols()).map(|j| format!("{}", data[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_block_matrix<T: Scalar, R: BufRead>(r: &mut R) -> Result<BlockMatrix<T>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `M N K` header".into(),
    })??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected `M N K`, found {header:?}"),
        });
    }
    let m = parse_usize(parts[0], 1, "M")?;
    let n = parse_usize(parts[1], 1, "N")?;
    let k = parse_usize(parts[2], 1, "K")?;

    let mut data = DMatrix::zeros(m, n * k);
    for i in 0..m {
        let line_no = i + 2;
        let line = lines.next().ok_or(Error::Parse {
            line: line_no,
            message: format!("expected {m} data rows"),
        })??;
        let values: Vec<&str> = line.split(',').collect();
        if values.len() != n * k {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} values, found {}", n * k, values.len()),
            });
        }
        for (j, token) in values.iter().enumerate() {
            data[(i, j)] = parse_value(token, line_no)?;
        }
    }
    BlockMatrix::new(m, n, k, data)
}

pub fn write_measurements<T: Scalar, W: Write>(w: &mut W, ms: &MeasurementSet<T>) -> Result<()> {
    writeln!(w, "{} {} {}", ms.y.nrows(), ms.y.ncols(), ms.sigma)?;
    for l in 0..ms.y.nrows() {
        let row: Vec<String> = (0..ms.y.ncols()).map(|k| format!("{}", ms.y[(l, k)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a measurement file. The noise seed is not part of the format;
/// the returned set carries seed `0`.
pub fn read_measurements<T: Scalar, R: BufRead>(r: &mut R) -> Result<MeasurementSet<T>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `L K sigma` header".into(),
    })??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected `L K sigma`, found {header:?}"),
        });
    }
    let l = parse_usize(parts[0], 1, "L")?;
    let k = parse_usize(parts[1], 1, "K")?;
    let sigma: T = parse_value(parts[2], 1)?;

    let mut y = DMatrix::zeros(l, k);
    for i in 0..l {
        let line_no = i + 2;
        let line = lines.next().ok_or(Error::Parse {
            line: line_no,
            message: format!("expected {l} data rows"),
        })??;
        let values: Vec<&str> = line.split(',').collect();
        if values.len() != k {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {k} values, found {}", values.len()),
            });
        }
        for (j, token) in values.iter().enumerate() {
            y[(i, j)] = parse_value(token, line_no)?;
        }
    }
    Ok(MeasurementSet { y, sigma, seed: 0 })
}

pub fn write_block_matrix_file<T: Scalar>(path: &Path, x: &BlockMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_block_matrix(&mut w, x)
}

pub fn read_block_matrix_file<T: Scalar>(path: &Path) -> Result<BlockMatrix<T>> {
    let mut r = BufReader::new(File::open(path)?);
    read_block_matrix(&mut r)
}

pub fn write_measurements_file<T: Scalar>(path: &Path, ms: &MeasurementSet<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_measurements(&mut w, ms)
}

pub fn read_measurements_file<T: Scalar>(path: &Path) -> Result<MeasurementSet<T>> {
    let mut r = BufReader::new(File::open(path)?);
    read_measurements(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, sample_standard_normal};

    #[test]
    fn block_matrix_round_trip_is_bit_exact() {
        let mut rng = rng_from_seed(1);
        let data: Vec<f64> = (0..4 * 6).map(|_| sample_standard_normal(&mut rng)).collect();
        let x = BlockMatrix::new(4, 2, 3, DMatrix::from_vec(4, 6, data)).unwrap();
        let mut buf = Vec::new();
        write_block_matrix(&mut buf, &x).unwrap();
        let back: BlockMatrix<f64> = read_block_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(x.as_matrix(), back.as_matrix());
        assert_eq!(
            (back.rows(), back.block_cols(), back.num_blocks()),
            (4, 2, 3)
        );
    }

    #[test]
    fn measurements_round_trip_is_bit_exact() {
        let mut rng = rng_from_seed(2);
        let y = DMatrix::from_fn(5, 3, |_, _| sample_standard_normal::<f64>(&mut rng));
        let ms = MeasurementSet {
            y: y.clone(),
            sigma: 0.1234567890123456789,
            seed: 9,
        };
        let mut buf = Vec::new();
        write_measurements(&mut buf, &ms).unwrap();
        let back: MeasurementSet<f64> = read_measurements(&mut buf.as_slice()).unwrap();
        assert_eq!(back.y, y);
        assert_eq!(back.sigma, ms.sigma);
        assert_eq!(back.seed, 0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "2 2 1\n1.0,2.0\n3.0,oops\n";
        let err = read_block_matrix::<f64, _>(&mut text.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }

        let text = "2 2 1\n1.0\n";
        let err = read_block_matrix::<f64, _>(&mut text.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }
}
