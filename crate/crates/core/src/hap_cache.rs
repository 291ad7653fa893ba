//! Bit-packed, variant-major haplotype store.
//!
//! Variant `l` occupies one row of `stride_words` 32-bit words. Bit `b` of
//! word `w` holds haplotype `32 * w + b` (least significant bit first). Rows
//! are padded so each one starts on a 32-byte boundary; padding bits are
//! always zero.

use std::fmt;
use std::sync::{Arc, RwLock};

use ndarray::{Array2, ArrayView2};

use crate::aligned::{AlignedVec, ALIGN_BYTES};
use crate::error::{Error, Result};

const WORD_BITS: usize = 32;
const WORDS_PER_ALIGN: usize = ALIGN_BYTES / 4;

pub(crate) fn words_for(n_haps: usize) -> usize {
    n_haps.div_ceil(WORD_BITS)
}

pub(crate) fn stride_for(n_haps: usize) -> usize {
    words_for(n_haps).div_ceil(WORDS_PER_ALIGN) * WORDS_PER_ALIGN
}

#[derive(Clone, Debug)]
pub struct HaplotypeCache {
    n_haps: usize,
    n_variants: usize,
    words_per_variant: usize,
    stride_words: usize,
    data: AlignedVec<u32>,
    singleton_variants: Vec<usize>,
    hap_ids: Option<Vec<String>>,
    loci_ids: Option<Vec<String>>,
}

/// One variant's alleles widened to `0.0` / `1.0`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantLaneBuffer {
    pub variant: usize,
    pub values: Vec<f64>,
}

impl HaplotypeCache {
    /// Packs an `L x N` matrix (variants in rows, haplotypes in columns).
    pub fn from_matrix(matrix: ArrayView2<'_, u8>) -> Result<Self> {
        let (n_variants, n_haps) = matrix.dim();
        if n_variants == 0 || n_haps == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut builder = CacheBuilder::new(n_haps, n_variants)?;
        for (l, row) in matrix.outer_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => builder.set(l, j),
                    other => {
                        return Err(Error::NonBinaryAllele {
                            variant: l,
                            haplotype: j,
                            value: other.to_string(),
                        })
                    }
                }
            }
        }
        Ok(builder.finish())
    }

    /// Rebuilds a cache from raw packed words, validating that padding is clear.
    pub(crate) fn from_words(n_haps: usize, n_variants: usize, words: &[u32]) -> std::result::Result<Self, String> {
        if n_haps < 2 {
            return Err(format!("at least 2 haplotypes required, got {n_haps}"));
        }
        if n_variants == 0 {
            return Err("zero variants".into());
        }
        let stride = stride_for(n_haps);
        if words.len() != stride * n_variants {
            return Err(format!(
                "payload has {} words, expected {}",
                words.len(),
                stride * n_variants
            ));
        }
        let mut builder = CacheBuilder::new(n_haps, n_variants).map_err(|e| e.to_string())?;
        builder.data.copy_from_slice(words);
        let cache = builder.finish();
        for l in 0..n_variants {
            if !cache.padding_is_clear(l) {
                return Err(format!("non-zero padding bits in variant {l}"));
            }
        }
        Ok(cache)
    }

    fn padding_is_clear(&self, l: usize) -> bool {
        let row = self.row(l);
        let tail_bits = self.n_haps % WORD_BITS;
        if tail_bits != 0 && row[self.words_per_variant - 1] >> tail_bits != 0 {
            return false;
        }
        row[self.words_per_variant..].iter().all(|&w| w == 0)
    }

    pub fn n_haps(&self) -> usize {
        self.n_haps
    }

    pub fn n_variants(&self) -> usize {
        self.n_variants
    }

    pub fn words_per_variant(&self) -> usize {
        self.words_per_variant
    }

    pub fn stride_words(&self) -> usize {
        self.stride_words
    }

    /// The whole packed payload, `n_variants * stride_words` words.
    pub fn words(&self) -> &[u32] {
        &self.data
    }

    /// Packed words for variant `l`, including alignment padding.
    #[inline]
    pub fn row(&self, l: usize) -> &[u32] {
        let s = self.stride_words;
        &self.data[l * s..(l + 1) * s]
    }

    #[inline]
    pub fn allele(&self, l: usize, hap: usize) -> u8 {
        ((self.row(l)[hap / WORD_BITS] >> (hap % WORD_BITS)) & 1) as u8
    }

    /// Variants whose allele count is exactly 1 or exactly N - 1.
    pub fn singleton_variants(&self) -> &[usize] {
        &self.singleton_variants
    }

    pub fn hap_ids(&self) -> Option<&[String]> {
        self.hap_ids.as_deref()
    }

    pub fn loci_ids(&self) -> Option<&[String]> {
        self.loci_ids.as_deref()
    }

    pub fn with_ids(mut self, hap_ids: Option<Vec<String>>, loci_ids: Option<Vec<String>>) -> Result<Self> {
        if let Some(ids) = &hap_ids {
            if ids.len() != self.n_haps {
                return Err(Error::DimensionMismatch(format!(
                    "{} haplotype ids for {} haplotypes",
                    ids.len(),
                    self.n_haps
                )));
            }
        }
        if let Some(ids) = &loci_ids {
            if ids.len() != self.n_variants {
                return Err(Error::DimensionMismatch(format!(
                    "{} loci ids for {} variants",
                    ids.len(),
                    self.n_variants
                )));
            }
        }
        self.hap_ids = hap_ids;
        self.loci_ids = loci_ids;
        Ok(self)
    }

    pub fn variant_by_id(&self, id: &str) -> Result<usize> {
        self.loci_ids
            .as_ref()
            .and_then(|ids| ids.iter().position(|x| x == id))
            .ok_or_else(|| Error::UnknownId {
                what: "variant",
                id: id.to_owned(),
            })
    }

    pub fn hap_by_id(&self, id: &str) -> Result<usize> {
        self.hap_ids
            .as_ref()
            .and_then(|ids| ids.iter().position(|x| x == id))
            .ok_or_else(|| Error::UnknownId {
                what: "haplotype",
                id: id.to_owned(),
            })
    }

    /// Extracts the submatrix `variants x haplotypes`; `None` selects everything.
    pub fn query(&self, variants: Option<&[usize]>, haps: Option<&[usize]>) -> Result<Array2<u8>> {
        let all_v: Vec<usize>;
        let variants = match variants {
            Some(v) => v,
            None => {
                all_v = (0..self.n_variants).collect();
                &all_v
            }
        };
        let all_h: Vec<usize>;
        let haps = match haps {
            Some(h) => h,
            None => {
                all_h = (0..self.n_haps).collect();
                &all_h
            }
        };
        check_indices("variant", variants, self.n_variants)?;
        check_indices("haplotype", haps, self.n_haps)?;
        Ok(Array2::from_shape_fn((variants.len(), haps.len()), |(r, c)| {
            self.allele(variants[r], haps[c])
        }))
    }

    pub fn unpack_variant(&self, l: usize) -> Result<VariantLaneBuffer> {
        check_indices("variant", &[l], self.n_variants)?;
        let row = self.row(l);
        let mut values = Vec::with_capacity(self.n_haps);
        for (w, &word) in row[..self.words_per_variant].iter().enumerate() {
            let take = (self.n_haps - w * WORD_BITS).min(WORD_BITS);
            values.extend((0..take).map(|b| ((word >> b) & 1) as f64));
        }
        Ok(VariantLaneBuffer { variant: l, values })
    }

    pub fn summary(&self) -> CacheSummary {
        CacheSummary {
            n_haps: self.n_haps,
            n_variants: self.n_variants,
            bytes: self.n_variants * self.stride_words * 4,
            padding_bytes: self.n_variants * (self.stride_words - self.words_per_variant) * 4,
            singleton_count: self.singleton_variants.len(),
        }
    }
}

fn check_indices(what: &'static str, idx: &[usize], bound: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= bound) {
        Some(&index) => Err(Error::IndexOutOfRange { what, index, bound }),
        None => Ok(()),
    }
}

/// Incremental packer used by the matrix and file readers.
pub(crate) struct CacheBuilder {
    n_haps: usize,
    n_variants: usize,
    stride: usize,
    data: AlignedVec<u32>,
}

impl CacheBuilder {
    pub(crate) fn new(n_haps: usize, n_variants: usize) -> Result<Self> {
        if n_variants == 0 || n_haps == 0 {
            return Err(Error::EmptyMatrix);
        }
        if n_haps < 2 {
            return Err(Error::TooFewHaplotypes(n_haps));
        }
        let stride = stride_for(n_haps);
        let len = stride
            .checked_mul(n_variants)
            .ok_or(Error::Allocation { bytes: usize::MAX })?;
        Ok(Self {
            n_haps,
            n_variants,
            stride,
            data: AlignedVec::zeroed(len)?,
        })
    }

    #[inline]
    pub(crate) fn set(&mut self, l: usize, hap: usize) {
        self.data[l * self.stride + hap / WORD_BITS] |= 1 << (hap % WORD_BITS);
    }

    pub(crate) fn finish(self) -> HaplotypeCache {
        let words_per_variant = words_for(self.n_haps);
        let singleton_variants = (0..self.n_variants)
            .filter(|&l| {
                let row = &self.data[l * self.stride..l * self.stride + words_per_variant];
                let ones: usize = row.iter().map(|w| w.count_ones() as usize).sum();
                ones == 1 || ones == self.n_haps - 1
            })
            .collect::<Vec<_>>();
        if !singleton_variants.is_empty() {
            log::warn!(
                "{} variant(s) carry a singleton allele; consider removing them to reduce the risk of total underflow",
                singleton_variants.len()
            );
        }
        HaplotypeCache {
            n_haps: self.n_haps,
            n_variants: self.n_variants,
            words_per_variant,
            stride_words: self.stride,
            data: self.data,
            singleton_variants,
            hap_ids: None,
            loci_ids: None,
        }
    }
}

/// Removes singleton variants from an `L x N` matrix, returning the kept
/// matrix and the indices of removed rows.
pub fn drop_singletons(matrix: ArrayView2<'_, u8>) -> (Array2<u8>, Vec<usize>) {
    let n = matrix.ncols();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (l, row) in matrix.outer_iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1).count();
        if ones == 1 || ones + 1 == n {
            dropped.push(l);
        } else {
            keep.push(l);
        }
    }
    (matrix.select(ndarray::Axis(0), &keep), dropped)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheSummary {
    pub n_haps: usize,
    pub n_variants: usize,
    /// Packed payload including alignment padding.
    pub bytes: usize,
    /// The part of `bytes` that is alignment padding.
    pub padding_bytes: usize,
    pub singleton_count: usize,
}

impl fmt::Display for CacheSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Cache currently loaded with {} haplotypes, each with {} variants.",
            self.n_haps, self.n_variants
        )?;
        write!(
            f,
            "  Memory consumed: {} ({} alignment padding).",
            format_bytes(self.bytes),
            format_bytes(self.padding_bytes)
        )?;
        if self.singleton_count > 0 {
            write!(f, "\n  Singleton variants: {}.", self.singleton_count)?;
        }
        Ok(())
    }
}

pub const NO_CACHE_MESSAGE: &str = "No haplotype cache loaded.";

/// Decimal units, matching how the memory figures are conventionally quoted.
pub fn format_bytes(bytes: usize) -> String {
    let b = bytes as f64;
    if b < 1e3 {
        format!("{bytes} B")
    } else if b < 1e6 {
        format!("{:.2} kB", b / 1e3)
    } else if b < 1e9 {
        format!("{:.2} MB", b / 1e6)
    } else {
        format!("{:.2} GB", b / 1e9)
    }
}

/// Holder for the single active haplotype cache.
///
/// Loading replaces (and frees) whatever was held before. Readers get an
/// `Arc` snapshot, so a cache stays alive while any table work still uses it.
#[derive(Default)]
pub struct CacheStore {
    slot: RwLock<Option<Arc<HaplotypeCache>>>,
}

impl CacheStore {
    pub const fn new() -> Self {
        Self {
            slot: RwLock::new(None),
        }
    }

    /// Process-wide store used by the command line front end.
    pub fn global() -> &'static CacheStore {
        static GLOBAL: CacheStore = CacheStore::new();
        &GLOBAL
    }

    pub fn cache_haplotypes(&self, matrix: ArrayView2<'_, u8>) -> Result<Arc<HaplotypeCache>> {
        self.load_with(|| HaplotypeCache::from_matrix(matrix))
    }

    /// Clears the slot, then installs whatever `load` produces. On failure the
    /// store is left empty.
    pub fn load_with<F>(&self, load: F) -> Result<Arc<HaplotypeCache>>
    where
        F: FnOnce() -> Result<HaplotypeCache>,
    {
        let mut slot = self.slot.write().unwrap_or_else(|e| e.into_inner());
        *slot = None;
        let cache = Arc::new(load()?);
        *slot = Some(Arc::clone(&cache));
        Ok(cache)
    }

    pub fn current(&self) -> Result<Arc<HaplotypeCache>> {
        self.slot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
            .ok_or(Error::NoCache)
    }

    pub fn clear(&self) {
        *self.slot.write().unwrap_or_else(|e| e.into_inner()) = None;
    }

    pub fn summary(&self) -> Option<CacheSummary> {
        self.current().ok().map(|c| c.summary())
    }

    pub fn query(&self, variants: Option<&[usize]>, haps: Option<&[usize]>) -> Result<Array2<u8>> {
        self.current()?.query(variants, haps)
    }
}
