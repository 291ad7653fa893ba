//! Posterior copying probabilities and pairwise distances at one variant.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::tables::{BackwardTable, ForwardTable};

/// Smallest posterior treated as observable, `2^-52`.
pub const EPSILON: f64 = f64::EPSILON;

/// Posterior probabilities for a recipient window. `p[[j, c]]` is the
/// probability that recipient `from + c` copies donor `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSlab {
    pub p: Array2<f64>,
    pub variant: usize,
    pub from: usize,
    pub to: usize,
    /// Recipients whose `sum_j alpha * beta` was zero or not finite; their
    /// off-diagonal entries are set to [`EPSILON`].
    pub degenerate_columns: Vec<usize>,
}

impl PosteriorSlab {
    pub fn n_haps(&self) -> usize {
        self.p.nrows()
    }

    pub fn width(&self) -> usize {
        self.p.ncols()
    }
}

/// Symmetric distance matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub d: Array2<f64>,
    pub variant: usize,
    pub standardized: bool,
    pub degenerate_columns: Vec<usize>,
}

/// Distances between every donor and the recipients of one window.
/// `d[[j, c]]` is the distance between `j` and recipient `from + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceBlock {
    pub d: Array2<f64>,
    pub variant: usize,
    pub from: usize,
    pub to: usize,
}

pub fn post_probs(fwd: &ForwardTable, bck: &BackwardTable) -> Result<PosteriorSlab> {
    let (lf, lb) = match (fwd.variant(), bck.variant()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Uninitialised),
    };
    if lf != lb {
        return Err(Error::VariantMismatch {
            forward: lf,
            backward: lb,
        });
    }
    if fwd.pars_hash() != bck.pars_hash() {
        return Err(Error::ParamsMismatch {
            table: fwd.pars_hash().to_string(),
            given: bck.pars_hash().to_string(),
        });
    }
    if fwd.n_haps() != bck.n_haps()
        || fwd.from_recipient() != bck.from_recipient()
        || fwd.to_recipient() != bck.to_recipient()
    {
        return Err(Error::ShapeMismatch(format!(
            "forward window {}..={} of {}, backward window {}..={} of {}",
            fwd.from_recipient(),
            fwd.to_recipient(),
            fwd.n_haps(),
            bck.from_recipient(),
            bck.to_recipient(),
            bck.n_haps()
        )));
    }

    let n = fwd.n_haps();
    let from = fwd.from_recipient();
    let mut p = Array2::zeros((n, fwd.width()));
    let mut degenerate = Vec::new();
    for (c, mut out) in p.columns_mut().into_iter().enumerate() {
        let i = from + c;
        let a = fwd.column(c);
        let b = bck.column(c);
        let mut sum = 0.0;
        for j in 0..n {
            if j != i {
                let v = a[j] * b[j];
                out[j] = v;
                sum += v;
            }
        }
        if sum == 0.0 || !sum.is_finite() {
            degenerate.push(i);
            out.fill(EPSILON);
        } else {
            out.mapv_inplace(|v| v / sum);
        }
        out[i] = 0.0;
    }
    Ok(PosteriorSlab {
        p,
        variant: lf,
        from,
        to: fwd.to_recipient(),
        degenerate_columns: degenerate,
    })
}

#[inline]
fn pair_distance(p_ji: f64, p_ij: f64) -> f64 {
    -(p_ji.max(EPSILON).ln() + p_ij.max(EPSILON).ln()) / 2.0
}

pub fn dist_mat(fwd: &ForwardTable, bck: &BackwardTable, standardize: bool) -> Result<DistanceMatrix> {
    if !fwd.is_full() || !bck.is_full() {
        let t = if fwd.is_full() {
            (bck.from_recipient(), bck.to_recipient())
        } else {
            (fwd.from_recipient(), fwd.to_recipient())
        };
        return Err(Error::PartialWindow {
            from: t.0,
            to: t.1,
            n_haps: fwd.n_haps(),
        });
    }
    let slab = post_probs(fwd, bck)?;
    Ok(distances_from_full(&slab, standardize))
}

/// Distance matrix from a full-window posterior slab.
pub fn distances_from_full(slab: &PosteriorSlab, standardize: bool) -> DistanceMatrix {
    let p = &slab.p;
    let n = p.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = pair_distance(p[[j, i]], p[[i, j]]);
            d[[j, i]] = v;
            d[[i, j]] = v;
        }
    }
    if standardize {
        d = standardized(d.view());
    }
    DistanceMatrix {
        d,
        variant: slab.variant,
        standardized: standardize,
        degenerate_columns: slab.degenerate_columns.clone(),
    }
}

/// Column-wise z-score over off-diagonal entries (sample standard deviation),
/// followed by averaging with the transpose. Columns with zero spread become
/// zero.
fn standardized(d: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = d.nrows();
    let mut z = Array2::zeros((n, n));
    for i in 0..n {
        let col = d.column(i);
        let vals = (0..n).filter(|&j| j != i).map(|j| col[j]);
        let m = vals.clone().count() as f64;
        let mean = vals.clone().sum::<f64>() / m;
        let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            for j in (0..n).filter(|&j| j != i) {
                z[[j, i]] = (col[j] - mean) / sd;
            }
        }
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = (z[[j, i]] + z[[i, j]]) / 2.0;
            out[[j, i]] = v;
            out[[i, j]] = v;
        }
    }
    out
}

/// Rows `from..=to` of the full posterior matrix (`W x N`), assembled from
/// slabs that together cover every recipient at the same variant.
pub fn transpose_block(slabs: &[&PosteriorSlab], from: usize, to: usize) -> Result<Array2<f64>> {
    let first = slabs
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no posterior slabs given".into()))?;
    let n = first.n_haps();
    if from > to || to >= n {
        return Err(Error::InvalidWindow { from, to, n_haps: n });
    }
    let mut covered = vec![false; n];
    let mut block = Array2::zeros((to - from + 1, n));
    for s in slabs {
        if s.variant != first.variant {
            return Err(Error::VariantMismatch {
                forward: first.variant,
                backward: s.variant,
            });
        }
        if s.n_haps() != n {
            return Err(Error::ShapeMismatch(format!(
                "slabs for {n} and {} haplotypes",
                s.n_haps()
            )));
        }
        for c in 0..s.width() {
            let r = s.from + c;
            if std::mem::replace(&mut covered[r], true) {
                return Err(Error::ShapeMismatch(format!("recipient {r} covered twice")));
            }
            for i in from..=to {
                block[[i - from, r]] = s.p[[i, c]];
            }
        }
    }
    if let Some(r) = covered.iter().position(|&c| !c) {
        return Err(Error::ShapeMismatch(format!("recipient {r} not covered by any slab")));
    }
    Ok(block)
}

/// Distances for one window from its own slab and the matching `W x N`
/// block of the transposed posterior matrix (see [`transpose_block`]).
pub fn combine_slabs(
    local: &PosteriorSlab,
    transpose: ArrayView2<'_, f64>,
    transpose_variant: usize,
) -> Result<DistanceBlock> {
    if transpose_variant != local.variant {
        return Err(Error::VariantMismatch {
            forward: local.variant,
            backward: transpose_variant,
        });
    }
    let (n, w) = local.p.dim();
    if transpose.dim() != (w, n) {
        return Err(Error::ShapeMismatch(format!(
            "transpose block is {}x{}, expected {w}x{n}",
            transpose.nrows(),
            transpose.ncols()
        )));
    }
    let d = Array2::from_shape_fn((n, w), |(j, c)| {
        if j == local.from + c {
            0.0
        } else {
            pair_distance(local.p[[j, c]], transpose[[c, j]])
        }
    });
    Ok(DistanceBlock {
        d,
        variant: local.variant,
        from: local.from,
        to: local.to,
    })
}
