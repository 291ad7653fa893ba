//! Li-Stephens model parameters: recombination (`rho`), mis-copy (`mu`) and
//! prior copying probabilities (`pi`), frozen and fingerprinted on creation.

use std::fmt;
use std::sync::Arc;

use ndarray::ArrayView2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hap_cache::HaplotypeCache;

pub const DEFAULT_MU: f64 = 1e-8;
const PI_COLUMN_TOL: f64 = 1e-12;

/// SHA-256 over the canonical parameter bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ParamsHash(pub [u8; 32]);

impl fmt::Display for ParamsHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ParamsHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParamsHash({self})")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mutation {
    Uniform(f64),
    PerVariant(Arc<[f64]>),
}

impl Mutation {
    #[inline]
    pub fn at(&self, l: usize) -> f64 {
        match self {
            Mutation::Uniform(m) => *m,
            Mutation::PerVariant(v) => v[l],
        }
    }
}

/// Column-stochastic `N x N` prior, stored column-major so that column `i`
/// (the donor weights for recipient `i`) is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct DensePi {
    n: usize,
    data: Arc<[f64]>,
}

impl DensePi {
    /// Validates `matrix[[j, i]]` = prior probability that `i` copies `j`.
    pub fn new(matrix: ArrayView2<'_, f64>) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch(format!(
                "Pi must be square, got {rows}x{cols}"
            )));
        }
        let n = rows;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            let col = matrix.column(i);
            for (j, &v) in col.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "Pi[{j},{i}] = {v} is not a finite non-negative probability"
                    )));
                }
            }
            if col[i] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "Pi diagonal must be zero, Pi[{i},{i}] = {}",
                    col[i]
                )));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > PI_COLUMN_TOL {
                return Err(Error::InvalidParameter(format!("Pi column {i} sums to {sum}, not 1")));
            }
            data.extend(col.iter().copied());
        }
        Ok(Self { n, data: data.into() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn is_uniform(&self) -> bool {
        let u = 1.0 / (self.n as f64 - 1.0);
        (0..self.n).all(|i| {
            self.column(i)
                .iter()
                .enumerate()
                .all(|(j, &v)| if j == i { true } else { v == u })
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CopyingPrior {
    /// Every off-diagonal entry equals the stored value, `1 / (N - 1)`.
    Uniform(f64),
    Dense(DensePi),
}

impl CopyingPrior {
    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        match self {
            CopyingPrior::Uniform(u) => {
                if j == i {
                    0.0
                } else {
                    *u
                }
            }
            CopyingPrior::Dense(d) => d.get(j, i),
        }
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> f64 {
        match self {
            CopyingPrior::Uniform(u) => *u,
            CopyingPrior::Dense(d) => (0..d.n)
                .flat_map(|i| {
                    d.column(i)
                        .iter()
                        .enumerate()
                        .filter(move |&(j, _)| j != i)
                        .map(|(_, &v)| v)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamWarning {
    /// A dense Pi was supplied whose entries are all `1 / (N - 1)`; the
    /// uniform default gives the same answer on a faster kernel.
    UniformDensePi,
}

/// Frozen parameter set for one cached haplotype data set.
#[derive(Clone, Debug)]
pub struct ModelParameters {
    n_haps: usize,
    rho: Arc<[f64]>,
    mu: Mutation,
    pi: CopyingPrior,
    check_rho: bool,
    hash: ParamsHash,
    warnings: Vec<ParamWarning>,
}

impl ModelParameters {
    pub fn n_haps(&self) -> usize {
        self.n_haps
    }

    pub fn n_variants(&self) -> usize {
        self.rho.len()
    }

    /// Length `L`; entry `l` is the recombination probability between
    /// variants `l` and `l + 1`, and the last entry is the sentinel `1`.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn mu(&self) -> &Mutation {
        &self.mu
    }

    pub fn pi(&self) -> &CopyingPrior {
        &self.pi
    }

    pub fn check_rho(&self) -> bool {
        self.check_rho
    }

    pub fn hash(&self) -> ParamsHash {
        self.hash
    }

    pub fn warnings(&self) -> &[ParamWarning] {
        &self.warnings
    }
}

/// Fifteen significant digits, scientific notation for very small or large
/// magnitudes (`1e-08`, `0.00334448160535117`).
pub fn format_sig15(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.14e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            fixed
        }
    } else {
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    }
}

fn abbreviate(v: &[f64]) -> String {
    let fmt = |x: &f64| format_sig15(*x);
    if v.len() <= 6 {
        v.iter().map(fmt).collect::<Vec<_>>().join(", ")
    } else {
        let head: Vec<_> = v[..3].iter().map(fmt).collect();
        let tail: Vec<_> = v[v.len() - 3..].iter().map(fmt).collect();
        format!("{}, ..., {}", head.join(", "), tail.join(", "))
    }
}

impl fmt::Display for ModelParameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Parameters object with:")?;
        writeln!(f, "  rho   = ({})", abbreviate(&self.rho))?;
        match &self.mu {
            Mutation::Uniform(m) => writeln!(f, "  mu    = {}", format_sig15(*m))?,
            Mutation::PerVariant(v) => writeln!(f, "  mu    = ({})", abbreviate(v))?,
        }
        match &self.pi {
            CopyingPrior::Uniform(u) => write!(f, "  Pi    = {}", format_sig15(*u)),
            CopyingPrior::Dense(d) => write!(f, "  Pi    = {0}x{0} matrix", d.n),
        }
    }
}

/// Recombination probabilities from centimorgan gaps between consecutive
/// variants: `rho = 1 - exp(-s * (cM / 100)^gamma)`, evaluated with `expm1`.
pub fn calc_rho(cm_gaps: &[f64], s: f64, gamma: f64) -> Result<Vec<f64>> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParameter(format!("Ne multiplier s = {s} must be > 0")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be > 0")));
    }
    cm_gaps
        .iter()
        .enumerate()
        .map(|(l, &cm)| {
            if !(cm.is_finite() && cm >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "map gap {l} = {cm} cM must be finite and non-negative"
                )));
            }
            let morgans = cm / 100.0;
            Ok(-(-s * morgans.powf(gamma)).exp_m1())
        })
        .collect()
}

/// Differences of a cumulative map (one position per variant).
pub fn map_gaps(positions: &[f64]) -> Vec<f64> {
    positions.windows(2).map(|w| w[1] - w[0]).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum MuSpec {
    Scalar(f64),
    PerVariant(Vec<f64>),
}

/// Inputs to [`make_parameters`]. `Default` gives rho = 0, mu = 1e-8 and a
/// uniform prior.
#[derive(Clone, Debug)]
pub struct ParameterSpec<'a> {
    /// Length `L - 1`; `None` means zero recombination everywhere.
    pub rho: Option<Vec<f64>>,
    pub mu: MuSpec,
    pub pi: Option<ArrayView2<'a, f64>>,
    pub check_rho: bool,
    pub use_speidel: bool,
}

impl Default for ParameterSpec<'_> {
    fn default() -> Self {
        Self {
            rho: None,
            mu: MuSpec::Scalar(DEFAULT_MU),
            pi: None,
            check_rho: true,
            use_speidel: false,
        }
    }
}

fn check_mu(m: f64, l: Option<usize>) -> Result<()> {
    if m > 0.0 && m < 0.5 {
        Ok(())
    } else {
        let at = l.map(|l| format!(" at variant {l}")).unwrap_or_default();
        Err(Error::InvalidParameter(format!("mu{at} = {m} must lie in (0, 0.5)")))
    }
}

/// Builds and validates a parameter set against the loaded cache.
pub fn make_parameters(cache: &HaplotypeCache, spec: ParameterSpec<'_>) -> Result<ModelParameters> {
    let n = cache.n_haps();
    let n_variants = cache.n_variants();
    if spec.use_speidel {
        return Err(Error::Unsupported(
            "the asymmetric (speidel) mutation model is not implemented".into(),
        ));
    }

    let mut rho = match spec.rho {
        Some(r) => {
            if r.len() != n_variants - 1 {
                return Err(Error::DimensionMismatch(format!(
                    "rho has length {}, expected L - 1 = {}",
                    r.len(),
                    n_variants - 1
                )));
            }
            r
        }
        None => vec![0.0; n_variants - 1],
    };
    if spec.check_rho {
        if let Some((l, &r)) = rho
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && (0.0..=1.0).contains(*r)))
        {
            return Err(Error::InvalidParameter(format!(
                "rho[{l}] = {r} is not a probability in [0, 1]"
            )));
        }
    }
    rho.push(1.0);

    let mu = match spec.mu {
        MuSpec::Scalar(m) => {
            check_mu(m, None)?;
            Mutation::Uniform(m)
        }
        MuSpec::PerVariant(v) => {
            if v.len() != n_variants {
                return Err(Error::DimensionMismatch(format!(
                    "mu has length {}, expected L = {n_variants}",
                    v.len()
                )));
            }
            for (l, &m) in v.iter().enumerate() {
                check_mu(m, Some(l))?;
            }
            Mutation::PerVariant(v.into())
        }
    };

    let mut warnings = Vec::new();
    let pi = match spec.pi {
        None => CopyingPrior::Uniform(1.0 / (n as f64 - 1.0)),
        Some(m) => {
            if m.dim() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "Pi is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let dense = DensePi::new(m)?;
            if dense.is_uniform() {
                log::warn!("a uniform Pi matrix was supplied; omit Pi to use the faster uniform kernel");
                warnings.push(ParamWarning::UniformDensePi);
            }
            CopyingPrior::Dense(dense)
        }
    };

    let hash = params_hash(&rho, &mu, &pi, spec.check_rho, spec.use_speidel);
    Ok(ModelParameters {
        n_haps: n,
        rho: rho.into(),
        mu,
        pi,
        check_rho: spec.check_rho,
        hash,
        warnings,
    })
}

fn params_hash(rho: &[f64], mu: &Mutation, pi: &CopyingPrior, check_rho: bool, use_speidel: bool) -> ParamsHash {
    let mut h = Sha256::new();
    h.update((rho.len() as u64).to_le_bytes());
    for r in rho {
        h.update(r.to_le_bytes());
    }
    match mu {
        Mutation::Uniform(m) => {
            h.update([0u8]);
            h.update(m.to_le_bytes());
        }
        Mutation::PerVariant(v) => {
            h.update([1u8]);
            for m in v.iter() {
                h.update(m.to_le_bytes());
            }
        }
    }
    match pi {
        CopyingPrior::Uniform(u) => {
            h.update([0u8]);
            h.update(u.to_le_bytes());
        }
        CopyingPrior::Dense(d) => {
            h.update([1u8]);
            h.update((d.n as u64).to_le_bytes());
            for v in d.data.iter() {
                h.update(v.to_le_bytes());
            }
        }
    }
    h.update([check_rho as u8, use_speidel as u8]);
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    ParamsHash(out)
}
