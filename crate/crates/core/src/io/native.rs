//! Bit-exact dump of a packed cache.
//!
//! Layout (little-endian): `"LSHC"`, `u16` version, `u32` N, `u32` L,
//! `u32` stride in words, then `L * stride` payload words including padding.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hap_cache::{stride_for, HaplotypeCache};

pub const NATIVE_MAGIC: &[u8; 4] = b"LSHC";
pub const NATIVE_VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 4 + 4 + 4;

pub fn write_native(path: impl AsRef<Path>, cache: &HaplotypeCache) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(HEADER);
    header.extend_from_slice(NATIVE_MAGIC);
    header.extend_from_slice(&NATIVE_VERSION.to_le_bytes());
    header.extend_from_slice(&(cache.n_haps() as u32).to_le_bytes());
    header.extend_from_slice(&(cache.n_variants() as u32).to_le_bytes());
    header.extend_from_slice(&(cache.stride_words() as u32).to_le_bytes());
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for word in cache.words() {
        w.write_all(&word.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_native(path: impl AsRef<Path>) -> Result<HaplotypeCache> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < HEADER || &buf[..4] != NATIVE_MAGIC {
        return Err(Error::format(path, "not a native haplotype cache (bad magic)"));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != NATIVE_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version,
            expected: NATIVE_VERSION,
        });
    }
    let u32_at = |k: usize| u32::from_le_bytes(buf[k..k + 4].try_into().expect("4 bytes")) as usize;
    let (n, l, stride) = (u32_at(6), u32_at(10), u32_at(14));
    if stride != stride_for(n) {
        return Err(Error::format(
            path,
            format!(
                "stride {stride} does not match {n} haplotypes (expected {})",
                stride_for(n)
            ),
        ));
    }
    let expected = stride
        .checked_mul(l)
        .and_then(|w| w.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let body = &buf[HEADER..];
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!("payload is {} bytes, expected {expected}", body.len()),
        ));
    }
    let words: Vec<u32> = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    HaplotypeCache::from_words(n, l, &words).map_err(|msg| Error::format(path, msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hap_cache::CacheStore;
    use ndarray::Array2;

    fn sample() -> HaplotypeCache {
        let m = Array2::from_shape_fn((5, 37), |(l, j)| ((l * 7 + j * 3) % 5 < 2) as u8);
        HaplotypeCache::from_matrix(m.view()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.lshc");
        let c = sample();
        write_native(&p, &c).unwrap();
        let back = read_native(&p).unwrap();
        assert_eq!(back.words(), c.words());
        assert_eq!(back.query(None, None).unwrap(), c.query(None, None).unwrap());
        let bytes = std::fs::read(&p).unwrap();
        write_native(&p, &back).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), bytes);
    }

    #[test]
    fn truncated_file_leaves_store_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.lshc");
        write_native(&p, &sample()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&p, &bytes).unwrap();
        let store = CacheStore::new();
        store.cache_haplotypes(ndarray::array![[0u8, 1]].view()).unwrap();
        assert!(store.load_with(|| read_native(&p)).is_err());
        assert!(matches!(store.current(), Err(Error::NoCache)));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.lshc");
        write_native(&p, &sample()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[4] = 2;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_native(&p), Err(Error::Version { found: 2, .. })));
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_native(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn dirty_padding_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.lshc");
        write_native(&p, &sample()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        // first variant, second word: bits above haplotype 36 are padding
        bytes[HEADER + 4 + 3] |= 0x80;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_native(&p), Err(Error::Format { .. })));
    }
}
