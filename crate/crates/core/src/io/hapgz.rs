//! Whitespace-separated 0/1 text, optionally gzip-compressed.
//!
//! Each line is one variant (`L` lines of `N` tokens). With `transpose` each
//! line is one haplotype instead. Compression is detected from the gzip magic
//! bytes, so plain text files are read through the same path.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let head = file.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(&GZIP_MAGIC) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Reads an `L x N` allele matrix.
pub fn read_hapgz(path: impl AsRef<Path>, transpose: bool) -> Result<Array2<u8>> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for (t, tok) in line.split_whitespace().enumerate() {
            data.push(match tok {
                "0" => 0u8,
                "1" => 1u8,
                other => {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: line_no,
                        msg: format!("non-binary allele {other:?} in column {}", t + 1),
                    })
                }
            });
        }
        let got = data.len() - before;
        match width {
            None => width = Some(got),
            Some(w) if w != got => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: line_no,
                    msg: format!("expected {w} alleles, found {got}"),
                })
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err(Error::format(path, "file contains no allele data"));
    };
    let m = Array2::from_shape_vec((rows, width), data).expect("shape matches data length");
    Ok(if transpose {
        m.reversed_axes().as_standard_layout().into_owned()
    } else {
        m
    })
}

/// Reads uncompressed text in the same layout as [`read_hapgz`].
pub fn read_text_matrix(path: impl AsRef<Path>, transpose: bool) -> Result<Array2<u8>> {
    read_hapgz(path, transpose)
}

/// Writes an `L x N` matrix one variant per line, gzip-compressed.
pub fn write_hapgz(path: impl AsRef<Path>, matrix: ArrayView2<'_, u8>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = GzEncoder::new(BufWriter::new(file), Compression::default());
    let mut line = String::with_capacity(matrix.ncols() * 2);
    for row in matrix.rows() {
        line.clear();
        for (k, &a) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push(if a == 0 { '0' } else { '1' });
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.finish().and_then(|mut b| b.flush()).map_err(|e| Error::io(path, e))
}
