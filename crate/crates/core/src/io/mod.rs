//! Haplotype file formats and matrix outputs.

mod hapgz;
#[cfg(feature = "hdf5")]
mod hdf5;
mod matrix;
mod native;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hap_cache::HaplotypeCache;

#[cfg(feature = "hdf5")]
pub use self::hdf5::{read_hdf5, write_hdf5};
pub use hapgz::{read_hapgz, read_text_matrix, write_hapgz};
pub use matrix::{read_lsdm, read_lsps, write_csv, write_lsdm, write_lsps, DISTANCE_MAGIC, SLAB_MAGIC};
pub use native::{read_native, write_native, NATIVE_MAGIC, NATIVE_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HapFormat {
    /// Gzip (or plain) text, one variant per line.
    HapGz,
    Hdf5,
    Native,
    /// Uncompressed text, same layout as `HapGz`.
    TextMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HapSource {
    pub kind: HapFormat,
    pub path: PathBuf,
    /// Text formats: one haplotype per line. HDF5: variants in the slowest
    /// dimension.
    pub transpose: bool,
}

impl HapSource {
    pub fn new(kind: HapFormat, path: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            path: path.into(),
            transpose: false,
        }
    }

    pub fn transposed(mut self, transpose: bool) -> Self {
        self.transpose = transpose;
        self
    }

    pub fn load(&self) -> Result<HaplotypeCache> {
        if !self.path.exists() {
            return Err(Error::io(
                &self.path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
        match self.kind {
            HapFormat::HapGz | HapFormat::TextMatrix => {
                let m = read_hapgz(&self.path, self.transpose)?;
                HaplotypeCache::from_matrix(m.view())
            }
            HapFormat::Native => {
                if self.transpose {
                    return Err(Error::Unsupported("transpose does not apply to native caches".into()));
                }
                read_native(&self.path)
            }
            HapFormat::Hdf5 => load_hdf5(&self.path, self.transpose),
        }
    }
}

#[cfg(feature = "hdf5")]
fn load_hdf5(path: &Path, transpose: bool) -> Result<HaplotypeCache> {
    read_hdf5(path, transpose)
}

#[cfg(not(feature = "hdf5"))]
fn load_hdf5(_path: &Path, _transpose: bool) -> Result<HaplotypeCache> {
    Err(Error::Unsupported("built without HDF5 support".into()))
}
