//! HDF5 haplotype files.
//!
//! `/haps` is a 2-D integer (or float) dataset with haplotypes in the slowest
//! dimension, i.e. shape `[N, L]`; `transpose` reads `[L, N]` instead.
//! Optional 1-D string datasets `/hap.ids` and `/loci.ids` label haplotypes
//! and variants.

use std::path::Path;

use hdf5::types::{VarLenAscii, VarLenUnicode};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::hap_cache::HaplotypeCache;

const HAPS: &str = "haps";
const HAP_IDS: &str = "hap.ids";
const LOCI_IDS: &str = "loci.ids";

fn read_strings(file: &hdf5::File, name: &str) -> Result<Option<Vec<String>>> {
    if !file.link_exists(name) {
        return Ok(None);
    }
    let ds = file.dataset(name)?;
    if let Ok(v) = ds.read_raw::<VarLenUnicode>() {
        return Ok(Some(v.iter().map(|s| s.as_str().to_owned()).collect()));
    }
    let v = ds.read_raw::<VarLenAscii>()?;
    Ok(Some(v.iter().map(|s| s.as_str().to_owned()).collect()))
}

pub fn read_hdf5(path: impl AsRef<Path>, transpose: bool) -> Result<HaplotypeCache> {
    let path = path.as_ref();
    let file = hdf5::File::open(path)?;
    if !file.link_exists(HAPS) {
        return Err(Error::format(path, "dataset /haps not found"));
    }
    let ds = file.dataset(HAPS)?;
    let shape = ds.shape();
    if shape.len() != 2 {
        return Err(Error::format(
            path,
            format!("/haps has rank {}, expected 2", shape.len()),
        ));
    }
    let raw = ds.read_raw::<f64>()?;
    let (d0, d1) = (shape[0], shape[1]);
    let (n, l) = if transpose { (d1, d0) } else { (d0, d1) };
    let mut m = Array2::<u8>::zeros((l, n));
    for (k, &v) in raw.iter().enumerate() {
        let (a, b) = (k / d1, k % d1);
        let (hap, var) = if transpose { (b, a) } else { (a, b) };
        m[[var, hap]] = if v == 0.0 {
            0
        } else if v == 1.0 {
            1
        } else {
            return Err(Error::NonBinaryAllele {
                variant: var,
                haplotype: hap,
                value: v.to_string(),
            });
        };
    }
    log::info!("{}: detected {n} haplotypes and {l} variants", path.display());
    let cache = HaplotypeCache::from_matrix(m.view())?;
    cache.with_ids(read_strings(&file, HAP_IDS)?, read_strings(&file, LOCI_IDS)?)
}

fn write_strings(file: &hdf5::File, name: &str, ids: &[String]) -> Result<()> {
    let v: Vec<VarLenUnicode> = ids
        .iter()
        .map(|s| {
            s.parse::<VarLenUnicode>()
                .map_err(|e| Error::InvalidParameter(format!("id {s:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    file.new_dataset::<VarLenUnicode>()
        .shape(v.len())
        .create(name)?
        .write_raw(&v)?;
    Ok(())
}

/// Writes an `L x N` matrix as `/haps` of shape `[N, L]`. Refuses to replace
/// an existing file unless `overwrite` is set.
pub fn write_hdf5(
    path: impl AsRef<Path>,
    matrix: ArrayView2<'_, u8>,
    hap_ids: Option<&[String]>,
    loci_ids: Option<&[String]>,
    overwrite: bool,
) -> Result<()> {
    let path = path.as_ref();
    let (l, n) = matrix.dim();
    if let Some(ids) = hap_ids {
        if ids.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} haplotype ids for {n} haplotypes",
                ids.len()
            )));
        }
    }
    if let Some(ids) = loci_ids {
        if ids.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "{} loci ids for {l} variants",
                ids.len()
            )));
        }
    }
    if path.exists() && !overwrite {
        return Err(Error::Exists(path.into()));
    }
    let file = hdf5::File::create(path)?;
    let data: Vec<u8> = matrix.t().iter().copied().collect();
    file.new_dataset::<u8>().shape((n, l)).create(HAPS)?.write_raw(&data)?;
    if let Some(ids) = hap_ids {
        write_strings(&file, HAP_IDS, ids)?;
    }
    if let Some(ids) = loci_ids {
        write_strings(&file, LOCI_IDS, ids)?;
    }
    Ok(())
}
