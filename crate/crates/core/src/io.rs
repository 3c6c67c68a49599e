//! Dataset file formats.
//!
//! Binary matrices are headerless little-endian IEEE-754 64-bit floats in
//! row-major order, exactly `n * d` values; `n` and `d` travel out of band.
//! CSV ingestion converts one comma-separated decimal row per line into the
//! same layout.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Loads a binary matrix holding exactly `n * d` little-endian f64 values.
pub fn load_matrix(path: &Path, n: usize, d: usize) -> Result<DataMatrix> {
    load_matrix_partitioned(path, n, d, 1)
}

/// [`load_matrix`] with the partition count applied at load time.
pub fn load_matrix_partitioned(
    path: &Path,
    n: usize,
    d: usize,
    parts: usize,
) -> Result<DataMatrix> {
    let meta = std::fs::metadata(path)?;
    let expect = (n * d * 8) as u64;
    if meta.len() != expect {
        return Err(Error::format(format!(
            "{} is {} bytes, expected {} for a {n} x {d} matrix",
            path.display(),
            meta.len(),
            expect
        )));
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut values = vec![0.0f64; n * d];
    let mut buf = [0u8; 8];
    for v in values.iter_mut() {
        reader.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    DataMatrix::with_partitions(values, n, d, parts)
}

/// Writes a matrix in the binary format read by [`load_matrix`].
pub fn save_matrix(path: &Path, m: &DataMatrix) -> Result<()> {
    save_values(path, m.values())
}

/// Writes raw row-major f64 values (centroids, row stores) little-endian.
pub fn save_values(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes 32-bit identifiers (assignments, labels) little-endian.
pub fn save_ids(path: &Path, ids: &[u32]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in ids {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_ids(path: &Path, n: usize) -> Result<Vec<u32>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut ids = vec![0u32; n];
    let mut buf = [0u8; 4];
    for v in ids.iter_mut() {
        reader.read_exact(&mut buf)?;
        *v = u32::from_le_bytes(buf);
    }
    Ok(ids)
}

/// Writes 64-bit point keys little-endian.
pub fn save_keys(path: &Path, keys: &[u64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in keys {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless CSV matrix (one row per line, comma-separated
/// decimals) and returns `(values, n, d)` in the binary layout.
pub fn read_csv(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::new();
    let mut d = 0usize;
    let mut n = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut width = 0usize;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(format!("line {}: bad number {field:?}", lineno + 1))
            })?;
            values.push(v);
            width += 1;
        }
        if d == 0 {
            d = width;
        } else if width != d {
            return Err(Error::format(format!(
                "line {}: {width} fields, expected {d}",
                lineno + 1
            )));
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::format("CSV file holds no rows"));
    }
    Ok((values, n, d))
}

/// FNV-1a fingerprint of a file's bytes, for run manifests.
pub fn fingerprint(path: &Path) -> Result<u64> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hash = 0xcbf29ce484222325u64;
    let mut buf = [0u8; 8192];
    loop {
        let got = reader.read(&mut buf)?;
        if got == 0 {
            break;
        }
        for &b in &buf[..got] {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    Ok(hash)
}
