//! Parsing of command-line lists and small numeric side files.

use std::path::Path;

use lsengine::Error;
use ndarray::Array2;

use crate::CliError;

/// Parses `"1,3,5-8"` into 0-based indices, validating each against `bound`.
pub fn index_list(spec: &str, what: &'static str, bound: usize) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (one_based(a, what, bound)?, one_based(b, what, bound)?),
            None => {
                let k = one_based(part, what, bound)?;
                (k, k)
            }
        };
        if lo > hi {
            return Err(CliError::Usage(format!("{what} range {part:?} is reversed")));
        }
        out.extend(lo..=hi);
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("empty {what} list")));
    }
    Ok(out)
}

/// Converts a 1-based command-line index to 0-based.
pub fn one_based(tok: &str, what: &'static str, bound: usize) -> Result<usize, CliError> {
    let k: usize = tok
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{what} index {tok:?} is not a positive integer")))?;
    if k == 0 {
        return Err(CliError::Usage(format!("{what} indices are 1-based; got 0")));
    }
    if k > bound {
        return Err(Error::IndexOutOfRange {
            what,
            index: k,
            bound: bound + 1,
        }
        .into());
    }
    Ok(k - 1)
}

/// Comma-separated plain numbers (no index conversion).
pub fn number_list<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>, CliError> {
    spec.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| CliError::Usage(format!("bad {what} value {p:?}")))
        })
        .collect()
}

/// Whitespace-separated floats from a text file, with their line numbers.
fn read_floats(path: &Path) -> Result<Vec<(usize, Vec<f64>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: k + 1,
                    msg: format!("not a number: {t:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((k + 1, vals));
    }
    Ok(rows)
}

/// One value per variant (tokens may also share lines).
pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    Ok(read_floats(path)?.into_iter().flat_map(|(_, v)| v).collect())
}

/// Square matrix, one row per line.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>, CliError> {
    let rows = read_floats(path)?;
    let n = rows.len();
    let mut data = Vec::with_capacity(n * n);
    for (line, r) in rows {
        if r.len() != n {
            return Err(Error::Parse {
                path: path.into(),
                line,
                msg: format!("expected {n} values, found {}", r.len()),
            }
            .into());
        }
        data.extend(r);
    }
    Ok(Array2::from_shape_vec((n, n), data).expect("square by construction"))
}
