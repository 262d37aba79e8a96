//! Matrix files.
//!
//! * CSV: first line `M,L`, then `M` rows of `L` comma-separated values.
//! * Binary: little-endian `u64` pair `(M, L)` followed by `M * L`
//!   little-endian `f64` values in column-major order.
//!
//! A spectral library uses the same layout with one spectrum per column.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::PixelMatrix;
use crate::error::{dim, invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    BinaryF64Le,
}

impl MatrixFormat {
    /// `.bin` selects the binary layout; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => MatrixFormat::BinaryF64Le,
            _ => MatrixFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::BinaryF64Le => "bin",
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "bin" | "binary" | "binary-f64-le" => Ok(MatrixFormat::BinaryF64Le),
            other => Err(invalid(format!("unknown matrix format '{other}'"))),
        }
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<PixelMatrix> {
    let data = match format {
        MatrixFormat::Csv => read_csv(File::open(path)?)?,
        MatrixFormat::BinaryF64Le => read_binary(File::open(path)?)?,
    };
    PixelMatrix::new(data)
}

pub fn save_matrix(matrix: &DMatrix<f64>, path: &Path, format: MatrixFormat) -> Result<()> {
    let file = File::create(path)?;
    match format {
        MatrixFormat::Csv => write_csv(matrix, file),
        MatrixFormat::BinaryF64Le => write_binary(matrix, file),
    }
}

fn parse_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn read_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(reader));
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))?
        .map_err(parse_err)?;
    if header.len() != 2 {
        return Err(Error::Parse("header must be 'M,L'".into()));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad dimension '{s}' in header")))
    };
    let (m, l) = (parse_dim(&header[0])?, parse_dim(&header[1])?);

    let mut data = DMatrix::zeros(m, l);
    let mut rows = 0;
    for record in records {
        let record = record.map_err(parse_err)?;
        if rows >= m {
            return Err(dim(format!("header declares {m} rows, body has more")));
        }
        if record.len() != l {
            return Err(dim(format!(
                "row {rows} has {} values, header declares {l}",
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{field}' at row {rows}")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: rows, col: j });
            }
            data[(rows, j)] = v;
        }
        rows += 1;
    }
    if rows != m {
        return Err(dim(format!("header declares {m} rows, body has {rows}")));
    }
    Ok(data)
}

fn write_csv<W: Write>(matrix: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{},{}", matrix.nrows(), matrix.ncols())?;
    for row in matrix.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn read_binary<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    BufReader::new(reader).read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(Error::Parse("binary matrix shorter than its header".into()));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let (m, l) = (word(0) as usize, word(8) as usize);
    let expected = m
        .checked_mul(l)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::Parse("dimension overflow".into()))?;
    if bytes.len() != expected {
        return Err(dim(format!(
            "header declares {m}x{l} ({expected} bytes), file has {} bytes",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos % m,
            col: pos / m,
        });
    }
    Ok(DMatrix::from_vec(m, l, values))
}

fn write_binary<W: Write>(matrix: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(&(matrix.nrows() as u64).to_le_bytes())?;
    w.write_all(&(matrix.ncols() as u64).to_le_bytes())?;
    for v in matrix.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthetic_library;
    use proptest::prelude::*;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let m = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0) - 0.1);
        save_matrix(&m, &path, MatrixFormat::BinaryF64Le).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = load_matrix(&path, MatrixFormat::BinaryF64Le).unwrap();
        assert_eq!(back.data(), &m);
        let again = dir.path().join("y.bin");
        save_matrix(back.data(), &again, MatrixFormat::BinaryF64Le).unwrap();
        assert_eq!(bytes, std::fs::read(&again).unwrap());
    }

    #[test]
    fn csv_header_mismatch() {
        let text = "2,3\n1,2,3\n4,5\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Dimension(_))));
        let short = "3,2\n1,2\n3,4\n";
        assert!(matches!(read_csv(short.as_bytes()), Err(Error::Dimension(_))));
        let long = "1,2\n1,2\n3,4\n";
        assert!(matches!(read_csv(long.as_bytes()), Err(Error::Dimension(_))));
        assert!(matches!(read_csv("x,2\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(
            read_csv("1,2\n1,abc\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_csv("1,2\n1,inf\n".as_bytes()),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn binary_truncated_or_non_finite() {
        let mut buf = Vec::new();
        write_binary(&DMatrix::from_element(2, 2, 1.0), &mut buf).unwrap();
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(read_binary(&bad[..]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn library_file_with_224_bands() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("library.csv");
        let lib = synthetic_library(224, 20, 3).unwrap();
        save_matrix(lib.data(), &path, MatrixFormat::Csv).unwrap();
        let back = load_matrix(&path, MatrixFormat::from_path(&path)).unwrap();
        assert_eq!(back.band_count(), 224);
        assert!(back.pixel_count() >= 20);
    }

    proptest! {
        #[test]
        fn csv_round_trip(m in 1usize..5, l in 1usize..5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mat = DMatrix::from_fn(m, l, |_, _| rng.random_range(-1e6..1e6) * rng.random::<f64>());
            let mut buf = Vec::new();
            write_csv(&mat, &mut buf).unwrap();
            let back = read_csv(&buf[..]).unwrap();
            for (a, b) in mat.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() <= 1e-15 * a.abs());
            }
        }
    }
}
