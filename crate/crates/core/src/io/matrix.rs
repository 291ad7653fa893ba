//! Dense matrix outputs.
//!
//! CSV: a header row of column labels, then one row per matrix row. Floats
//! use Rust's shortest round-trip formatting.
//!
//! `"LSDM"` distance matrix: `u32` N, `i64` variant, then `N * N` row-major
//! `f64`. `"LSPS"` posterior slab: `u32` N, `u32` from, `u32` to, `i64`
//! variant, then `N * W` row-major `f64`. All little-endian.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::decode::PosteriorSlab;
use crate::error::{Error, Result};

pub const DISTANCE_MAGIC: &[u8; 4] = b"LSDM";
pub const SLAB_MAGIC: &[u8; 4] = b"LSPS";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_csv(path: impl AsRef<Path>, m: ArrayView2<'_, f64>, labels: &[String]) -> Result<()> {
    let path = path.as_ref();
    if labels.len() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} columns",
            labels.len(),
            m.ncols()
        )));
    }
    let mut w = create(path)?;
    let mut line = labels.join(",");
    line.push('\n');
    w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    for row in m.rows() {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn put_f64s(w: &mut impl Write, m: ArrayView2<'_, f64>) -> std::io::Result<()> {
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_lsdm(path: impl AsRef<Path>, d: ArrayView2<'_, f64>, variant: usize) -> Result<()> {
    let path = path.as_ref();
    if d.nrows() != d.ncols() {
        return Err(Error::DimensionMismatch("distance matrix must be square".into()));
    }
    let mut w = create(path)?;
    let go = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(DISTANCE_MAGIC)?;
        w.write_all(&(d.nrows() as u32).to_le_bytes())?;
        w.write_all(&(variant as i64).to_le_bytes())?;
        put_f64s(w, d)?;
        w.flush()
    };
    go(&mut w).map_err(|e| Error::io(path, e))
}

fn f64s(path: &Path, body: &[u8], rows: usize, cols: usize) -> Result<Array2<f64>> {
    if body.len() != rows * cols * 8 {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, expected {}", body.len(), rows * cols * 8),
        ));
    }
    let v = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), v).expect("length checked"))
}

/// Returns the matrix and its variant.
pub fn read_lsdm(path: impl AsRef<Path>) -> Result<(Array2<f64>, usize)> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 16 || &buf[..4] != DISTANCE_MAGIC {
        return Err(Error::format(path, "not a distance matrix file (bad magic)"));
    }
    let n = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes")) as usize;
    let variant = i64::from_le_bytes(buf[8..16].try_into().expect("8 bytes"));
    let d = f64s(path, &buf[16..], n, n)?;
    Ok((d, variant as usize))
}

pub fn write_lsps(path: impl AsRef<Path>, slab: &PosteriorSlab) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let go = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(SLAB_MAGIC)?;
        w.write_all(&(slab.n_haps() as u32).to_le_bytes())?;
        w.write_all(&(slab.from as u32).to_le_bytes())?;
        w.write_all(&(slab.to as u32).to_le_bytes())?;
        w.write_all(&(slab.variant as i64).to_le_bytes())?;
        put_f64s(w, slab.p.view())?;
        w.flush()
    };
    go(&mut w).map_err(|e| Error::io(path, e))
}

/// Degenerate columns are not stored; they are recovered as columns whose
/// off-diagonal entries all equal the clamp value.
pub fn read_lsps(path: impl AsRef<Path>) -> Result<PosteriorSlab> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 24 || &buf[..4] != SLAB_MAGIC {
        return Err(Error::format(path, "not a posterior slab file (bad magic)"));
    }
    let u32_at = |k: usize| u32::from_le_bytes(buf[k..k + 4].try_into().expect("4 bytes")) as usize;
    let (n, from, to) = (u32_at(4), u32_at(8), u32_at(12));
    if from > to || to >= n {
        return Err(Error::format(
            path,
            format!("bad window {from}..={to} for {n} haplotypes"),
        ));
    }
    let variant = i64::from_le_bytes(buf[16..24].try_into().expect("8 bytes")) as usize;
    let p = f64s(path, &buf[24..], n, to - from + 1)?;
    let degenerate_columns = p
        .columns()
        .into_iter()
        .enumerate()
        .filter(|(c, col)| {
            col.iter()
                .enumerate()
                .all(|(j, &v)| j == from + c || v == crate::decode::EPSILON)
        })
        .map(|(c, _)| from + c)
        .collect();
    Ok(PosteriorSlab {
        p,
        variant,
        from,
        to,
        degenerate_columns,
    })
}
