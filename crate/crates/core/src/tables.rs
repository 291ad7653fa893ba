//! Forward and backward probability tables.
//!
//! A table holds one column of `N` donor probabilities per recipient in its
//! window, the per-column scaling sums, the variant it currently represents
//! and the hash of the parameters used to propagate it. Columns are padded
//! to a multiple of four doubles so each one starts 32-byte aligned.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::aligned::AlignedVec;
use crate::error::{Error, Result};
use crate::hap_cache::format_bytes;
use crate::model_params::{ModelParameters, ParamsHash};

const COLUMN_ALIGN: usize = 4;
const CHECKPOINT_MAGIC: &[u8; 4] = b"LSTB";
const CHECKPOINT_VERSION: u16 = 1;

/// Numerical state of one recipient column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColumnStatus {
    #[default]
    Ok,
    /// The scaling sum evaluated to exactly zero.
    TotalUnderflow,
    /// The scaling sum evaluated to +infinity.
    TotalOverflow,
    /// The scaling sum is NaN, typically inherited from an earlier failure.
    NotFinite,
}

impl ColumnStatus {
    pub(crate) fn classify(sum: f64) -> Self {
        if sum.is_nan() {
            ColumnStatus::NotFinite
        } else if sum == 0.0 {
            ColumnStatus::TotalUnderflow
        } else if sum.is_infinite() {
            ColumnStatus::TotalOverflow
        } else {
            ColumnStatus::Ok
        }
    }

    pub fn is_ok(self) -> bool {
        self == ColumnStatus::Ok
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Forward,
    Backward,
}

#[derive(Debug)]
pub(crate) struct Slab {
    n_haps: usize,
    stride: usize,
    from: usize,
    to: usize,
    values: AlignedVec<f64>,
    scaling: Vec<f64>,
    status: Vec<ColumnStatus>,
    l: Option<usize>,
    pars_hash: ParamsHash,
}

/// Mutable views handed to the propagation kernels.
pub(crate) struct SlabParts<'a> {
    pub stride: usize,
    pub values: &'a mut [f64],
    pub scaling: &'a mut [f64],
    pub status: &'a mut [ColumnStatus],
}

impl Slab {
    fn new(n_haps: usize, from: usize, to: usize, pars_hash: ParamsHash) -> Result<Self> {
        if from > to || to >= n_haps {
            return Err(Error::InvalidWindow { from, to, n_haps });
        }
        let width = to - from + 1;
        let stride = n_haps.div_ceil(COLUMN_ALIGN) * COLUMN_ALIGN;
        let len = stride
            .checked_mul(width)
            .ok_or(Error::Allocation { bytes: usize::MAX })?;
        let values = AlignedVec::zeroed(len)?;
        let mut scaling = Vec::new();
        scaling
            .try_reserve_exact(width)
            .map_err(|_| Error::Allocation { bytes: width * 8 })?;
        scaling.resize(width, 0.0);
        Ok(Self {
            n_haps,
            stride,
            from,
            to,
            values,
            scaling,
            status: vec![ColumnStatus::Ok; width],
            l: None,
            pars_hash,
        })
    }

    fn width(&self) -> usize {
        self.to - self.from + 1
    }

    fn try_clone(&self) -> Result<Self> {
        Ok(Self {
            values: self.values.try_clone()?,
            scaling: self.scaling.clone(),
            status: self.status.clone(),
            n_haps: self.n_haps,
            stride: self.stride,
            from: self.from,
            to: self.to,
            l: self.l,
            pars_hash: self.pars_hash,
        })
    }

    fn column(&self, local: usize) -> &[f64] {
        &self.values[local * self.stride..local * self.stride + self.n_haps]
    }

    fn same_shape(&self, other: &Slab) -> Result<()> {
        if self.n_haps != other.n_haps || self.from != other.from || self.to != other.to {
            return Err(Error::ShapeMismatch(format!(
                "{} haplotypes, recipients {}..={} vs {} haplotypes, recipients {}..={}",
                self.n_haps, self.from, self.to, other.n_haps, other.from, other.to
            )));
        }
        Ok(())
    }

    fn copy_from(&mut self, src: &Slab) -> Result<()> {
        self.same_shape(src)?;
        self.values.copy_from_slice(&src.values);
        self.scaling.copy_from_slice(&src.scaling);
        self.status.copy_from_slice(&src.status);
        self.l = src.l;
        self.pars_hash = src.pars_hash;
        Ok(())
    }

    fn reset(&mut self) {
        self.l = None;
        self.status.fill(ColumnStatus::Ok);
    }

    fn parts(&mut self) -> SlabParts<'_> {
        SlabParts {
            stride: self.stride,
            values: &mut self.values,
            scaling: &mut self.scaling,
            status: &mut self.status,
        }
    }

    fn memory_bytes(&self) -> usize {
        self.values.len() * 8
            + self.scaling.len() * 8
            + self.status.len() * std::mem::size_of::<ColumnStatus>()
            + std::mem::size_of::<Self>()
    }

    fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n_haps, self.width()), |(j, c)| self.column(c)[j])
    }

    fn max_ok_entry(&self) -> f64 {
        (0..self.width())
            .filter(|&c| self.status[c].is_ok())
            .flat_map(|c| self.column(c).iter().copied())
            .fold(0.0, f64::max)
    }

    fn flagged(&self) -> Vec<usize> {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_ok())
            .map(|(c, _)| self.from + c)
            .collect()
    }

    fn describe(&self, f: &mut fmt::Formatter<'_>, kind: &str, extra: &str) -> fmt::Result {
        if self.from == 0 && self.to + 1 == self.n_haps {
            write!(f, "Full {kind} Table object for {} haplotypes{extra}.", self.n_haps)?;
        } else {
            write!(
                f,
                "Partial {kind} Table object for {} haplotypes{extra}, recipients {} to {}.",
                self.n_haps, self.from, self.to
            )?;
        }
        match self.l {
            None => write!(
                f,
                "\n  Newly created table, currently uninitialised to any variant (ready for {kind} function next)."
            )?,
            Some(l) => write!(f, "\n  Current variant = {l}")?,
        }
        write!(f, "\n  Memory consumed: {}", format_bytes(self.memory_bytes()))
    }

    fn write_checkpoint(&self, kind: TableKind, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
        put(CHECKPOINT_MAGIC)?;
        put(&CHECKPOINT_VERSION.to_le_bytes())?;
        put(&[kind as u8])?;
        put(&self.l.map_or(-1i64, |l| l as i64).to_le_bytes())?;
        put(&(self.from as u32).to_le_bytes())?;
        put(&(self.to as u32).to_le_bytes())?;
        put(&self.pars_hash.0)?;
        for s in &self.scaling {
            put(&s.to_le_bytes())?;
        }
        for c in 0..self.width() {
            for v in self.column(c) {
                put(&v.to_le_bytes())?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn read_checkpoint(expect: TableKind, path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
        const HEADER: usize = 4 + 2 + 1 + 8 + 4 + 4 + 32;
        if buf.len() < HEADER || &buf[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format(path, "not a table checkpoint (bad magic)"));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                path: path.into(),
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let kind = match buf[6] {
            0 => TableKind::Forward,
            1 => TableKind::Backward,
            k => return Err(Error::format(path, format!("unknown table kind {k}"))),
        };
        if kind != expect {
            return Err(Error::format(path, format!("checkpoint holds a {kind:?} table")));
        }
        let l = i64::from_le_bytes(buf[7..15].try_into().expect("8 bytes"));
        let from = u32::from_le_bytes(buf[15..19].try_into().expect("4 bytes")) as usize;
        let to = u32::from_le_bytes(buf[19..23].try_into().expect("4 bytes")) as usize;
        let mut hash = [0u8; 32];
        hash.copy_from_slice(&buf[23..55]);
        if from > to {
            return Err(Error::format(path, "window bounds reversed"));
        }
        let width = to - from + 1;
        let body = &buf[HEADER..];
        if body.len() % 8 != 0 || body.len() / 8 < width {
            return Err(Error::format(path, "truncated payload"));
        }
        let doubles = body.len() / 8 - width;
        if !doubles.is_multiple_of(width) {
            return Err(Error::format(path, "payload is not a whole number of columns"));
        }
        let n_haps = doubles / width;
        let mut slab = Slab::new(n_haps, from, to, ParamsHash(hash)).map_err(|e| Error::format(path, e.to_string()))?;
        let mut vals = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for s in slab.scaling.iter_mut() {
            *s = vals.next().expect("length checked");
        }
        let stride = slab.stride;
        for c in 0..width {
            for j in 0..n_haps {
                slab.values[c * stride + j] = vals.next().expect("length checked");
            }
        }
        slab.l = if l < 0 { None } else { Some(l as usize) };
        if slab.l.is_some() {
            for (st, &s) in slab.status.iter_mut().zip(&slab.scaling) {
                *st = ColumnStatus::classify(s);
            }
        }
        Ok(slab)
    }
}

macro_rules! table_common {
    ($t:ty) => {
        impl $t {
            pub fn n_haps(&self) -> usize {
                self.slab.n_haps
            }

            /// First recipient in the window (inclusive).
            pub fn from_recipient(&self) -> usize {
                self.slab.from
            }

            /// Last recipient in the window (inclusive).
            pub fn to_recipient(&self) -> usize {
                self.slab.to
            }

            pub fn width(&self) -> usize {
                self.slab.width()
            }

            pub fn is_full(&self) -> bool {
                self.slab.from == 0 && self.slab.to + 1 == self.slab.n_haps
            }

            /// Current variant, or `None` while uninitialised.
            pub fn variant(&self) -> Option<usize> {
                self.slab.l
            }

            pub fn pars_hash(&self) -> ParamsHash {
                self.slab.pars_hash
            }

            /// Donor probabilities for the window-local column `local`.
            pub fn column(&self, local: usize) -> &[f64] {
                self.slab.column(local)
            }

            /// Entry for donor `j` and global recipient `i`.
            pub fn get(&self, j: usize, i: usize) -> f64 {
                self.slab.column(i - self.slab.from)[j]
            }

            pub fn column_status(&self) -> &[ColumnStatus] {
                &self.slab.status
            }

            /// Global recipient indices whose columns hit total under/overflow.
            pub fn flagged_columns(&self) -> Vec<usize> {
                self.slab.flagged()
            }

            /// Largest entry over columns without a numerical failure.
            pub fn max_entry(&self) -> f64 {
                self.slab.max_ok_entry()
            }

            /// `N x W` copy of the slab (donors in rows).
            pub fn to_array(&self) -> Array2<f64> {
                self.slab.to_array()
            }

            pub fn memory_bytes(&self) -> usize {
                self.slab.memory_bytes()
            }

            /// Bytes of the probability slab proper, `8 * N * W`.
            pub fn slab_bytes(&self) -> usize {
                8 * self.slab.n_haps * self.width()
            }

            /// Marks the table uninitialised; window and parameter hash are kept.
            pub fn reset(&mut self) {
                self.slab.reset();
            }

            /// Deep copy of `src` into `self`; shapes and windows must match.
            pub fn copy_from(&mut self, src: &Self) -> Result<()> {
                self.slab.copy_from(&src.slab)
            }

            pub(crate) fn parts(&mut self) -> SlabParts<'_> {
                self.slab.parts()
            }

            pub(crate) fn set_variant(&mut self, l: usize) {
                self.slab.l = Some(l);
            }
        }
    };
}

#[derive(Debug)]
pub struct ForwardTable {
    slab: Slab,
}

#[derive(Debug)]
pub struct BackwardTable {
    slab: Slab,
    beta_theta: bool,
}

table_common!(ForwardTable);
table_common!(BackwardTable);

impl ForwardTable {
    pub fn new(pars: &ModelParameters, from: usize, to: usize) -> Result<Self> {
        Ok(Self {
            slab: Slab::new(pars.n_haps(), from, to, pars.hash())?,
        })
    }

    pub fn full(pars: &ModelParameters) -> Result<Self> {
        Self::new(pars, 0, pars.n_haps() - 1)
    }

    /// `F` sums for each column, the normaliser for the next step.
    pub fn alpha_f(&self) -> &[f64] {
        &self.slab.scaling
    }

    pub fn try_clone(&self) -> Result<Self> {
        Ok(Self {
            slab: self.slab.try_clone()?,
        })
    }

    pub fn write_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        self.slab.write_checkpoint(TableKind::Forward, path.as_ref())
    }

    pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            slab: Slab::read_checkpoint(TableKind::Forward, path.as_ref())?,
        })
    }
}

impl BackwardTable {
    pub fn new(pars: &ModelParameters, from: usize, to: usize) -> Result<Self> {
        Ok(Self {
            slab: Slab::new(pars.n_haps(), from, to, pars.hash())?,
            beta_theta: false,
        })
    }

    pub fn full(pars: &ModelParameters) -> Result<Self> {
        Self::new(pars, 0, pars.n_haps() - 1)
    }

    /// `G` sums for each column: `sum_j beta_j * theta_j * pi_j` at the
    /// current variant, the normaliser for the next step.
    pub fn beta_g(&self) -> &[f64] {
        &self.slab.scaling
    }

    /// Always `false`: tables are kept in rescaled probability space.
    pub fn beta_theta(&self) -> bool {
        self.beta_theta
    }

    pub fn try_clone(&self) -> Result<Self> {
        Ok(Self {
            slab: self.slab.try_clone()?,
            beta_theta: self.beta_theta,
        })
    }

    pub fn write_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        self.slab.write_checkpoint(TableKind::Backward, path.as_ref())
    }

    pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            slab: Slab::read_checkpoint(TableKind::Backward, path.as_ref())?,
            beta_theta: false,
        })
    }
}

impl fmt::Display for ForwardTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.slab.describe(f, "Forward", "")
    }
}

impl fmt::Display for BackwardTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.slab.describe(f, "Backward", ", in rescaled probability space")
    }
}

pub fn make_forward_table(pars: &ModelParameters, from: usize, to: usize) -> Result<ForwardTable> {
    ForwardTable::new(pars, from, to)
}

pub fn make_backward_table(pars: &ModelParameters, from: usize, to: usize) -> Result<BackwardTable> {
    BackwardTable::new(pars, from, to)
}
