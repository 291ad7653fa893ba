//! Forward and backward propagation.
//!
//! Each recipient column is advanced independently from its current variant
//! to the target before the next column is touched, so the result of a column
//! never depends on how columns are spread over threads. Within a column the
//! sum order is fixed by the lane width alone (see [`sweep`]).

mod pool;
mod sweep;

use std::env;
use std::fmt;

use crate::error::{Error, Result};
use crate::hap_cache::HaplotypeCache;
use crate::model_params::{CopyingPrior, ModelParameters, Mutation};
use crate::tables::{BackwardTable, ColumnStatus, ForwardTable, SlabParts};

pub use pool::online_cores;
use pool::Chunk;
use sweep::{emission, sweep, BitRow, DenseCol, MuSource, PiSource, ScalarMu, UniformPi, VectorMu};

/// Environment variable consulted for the default worker count.
pub const THREADS_ENV: &str = "LS_ENGINE_THREADS";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Threads {
    Count(usize),
    /// One worker per listed core, each pinned to its core.
    Cores(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unroll {
    U1,
    U4,
    U8,
}

impl Unroll {
    pub fn depth(self) -> usize {
        match self {
            Unroll::U1 => 1,
            Unroll::U4 => 4,
            Unroll::U8 => 8,
        }
    }

    pub fn from_depth(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Unroll::U1),
            4 => Ok(Unroll::U4),
            8 => Ok(Unroll::U8),
            _ => Err(Error::Config(format!("unroll depth {d} is not one of 1, 4, 8"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneWidth {
    W1,
    W2,
    W4,
    W8,
}

impl LaneWidth {
    pub fn lanes(self) -> usize {
        match self {
            LaneWidth::W1 => 1,
            LaneWidth::W2 => 2,
            LaneWidth::W4 => 4,
            LaneWidth::W8 => 8,
        }
    }

    pub fn from_lanes(n: usize) -> Result<Self> {
        match n {
            1 => Ok(LaneWidth::W1),
            2 => Ok(LaneWidth::W2),
            4 => Ok(LaneWidth::W4),
            8 => Ok(LaneWidth::W8),
            _ => Err(Error::Config(format!("lane width {n} is not one of 1, 2, 4, 8"))),
        }
    }

    /// Widest lane count the running CPU handles natively.
    pub fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx512f") {
                return LaneWidth::W8;
            }
            if std::arch::is_x86_feature_detected!("avx2") {
                return LaneWidth::W4;
            }
            LaneWidth::W2
        }
        #[cfg(target_arch = "aarch64")]
        {
            LaneWidth::W2
        }
        #[cfg(not(any(target_arch = "x86_64", target_arch = "aarch64")))]
        {
            LaneWidth::W1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelConfig {
    pub threads: Threads,
    pub unroll: Unroll,
    pub lane_width: LaneWidth,
}

impl Default for KernelConfig {
    /// Threads from `LS_ENGINE_THREADS` (else all available), unroll 4 and
    /// the detected lane width.
    fn default() -> Self {
        let threads = env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Self {
            threads: Threads::Count(threads),
            unroll: Unroll::U4,
            lane_width: LaneWidth::detect(),
        }
    }
}

impl KernelConfig {
    /// Deterministic single-threaded configuration.
    pub fn serial() -> Self {
        Self {
            threads: Threads::Count(1),
            ..Self::default()
        }
    }

    pub fn with_threads(mut self, n: usize) -> Self {
        self.threads = Threads::Count(n);
        self
    }

    pub fn with_cores(mut self, cores: Vec<usize>) -> Self {
        self.threads = Threads::Cores(cores);
        self
    }

    pub fn with_unroll(mut self, u: Unroll) -> Self {
        self.unroll = u;
        self
    }

    pub fn with_lane_width(mut self, w: LaneWidth) -> Self {
        self.lane_width = w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.threads {
            Threads::Count(0) => Err(Error::Config("thread count must be at least 1".into())),
            Threads::Count(_) => Ok(()),
            Threads::Cores(c) => pool::validate_cores(c),
        }
    }

    pub fn worker_count(&self) -> usize {
        match &self.threads {
            Threads::Count(n) => *n,
            Threads::Cores(c) => c.len(),
        }
    }
}

/// Kernel specialisation chosen from the parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    ScalarMuUniformPi,
    ScalarMuDensePi,
    VectorMuUniformPi,
    VectorMuDensePi,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelKind::ScalarMuUniformPi => "scalar mu, uniform Pi",
            KernelKind::ScalarMuDensePi => "scalar mu, dense Pi",
            KernelKind::VectorMuUniformPi => "per-variant mu, uniform Pi",
            KernelKind::VectorMuDensePi => "per-variant mu, dense Pi",
        };
        f.write_str(s)
    }
}

pub fn select_kernel(pars: &ModelParameters) -> KernelKind {
    match (pars.mu(), pars.pi()) {
        (Mutation::Uniform(_), CopyingPrior::Uniform(_)) => KernelKind::ScalarMuUniformPi,
        (Mutation::Uniform(_), CopyingPrior::Dense(_)) => KernelKind::ScalarMuDensePi,
        (Mutation::PerVariant(_), CopyingPrior::Uniform(_)) => KernelKind::VectorMuUniformPi,
        (Mutation::PerVariant(_), CopyingPrior::Dense(_)) => KernelKind::VectorMuDensePi,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// Everything a worker needs besides its own columns.
#[derive(Clone, Copy)]
struct Job<'a> {
    cache: &'a HaplotypeCache,
    pars: &'a ModelParameters,
    direction: Direction,
    /// Global index of window-local column 0.
    from: usize,
    stride: usize,
    start: Option<usize>,
    target: usize,
}

/// Advances `fwd` to variant `target` (default: one past its current
/// variant; variant 0 when uninitialised).
pub fn forward(
    fwd: &mut ForwardTable,
    pars: &ModelParameters,
    cache: &HaplotypeCache,
    target: Option<usize>,
    cfg: &KernelConfig,
) -> Result<()> {
    check_common(fwd.pars_hash(), fwd.n_haps(), pars, cache, cfg)?;
    let l_max = cache.n_variants() - 1;
    let current = fwd.variant();
    let target = match (target, current) {
        (Some(t), _) if t > l_max => {
            return Err(Error::IndexOutOfRange {
                what: "variant",
                index: t,
                bound: l_max + 1,
            })
        }
        (Some(t), Some(c)) if t <= c => return Err(Error::WrongDirection { current: c, target: t }),
        (Some(t), _) => t,
        (None, None) => 0,
        (None, Some(c)) if c == l_max => {
            return Err(Error::IndexOutOfRange {
                what: "variant",
                index: c + 1,
                bound: l_max + 1,
            })
        }
        (None, Some(c)) => c + 1,
    };
    let from = fwd.from_recipient();
    run(
        fwd.parts(),
        Job {
            cache,
            pars,
            direction: Direction::Forward,
            from,
            stride: 0,
            start: current,
            target,
        },
        cfg,
    );
    fwd.set_variant(target);
    Ok(())
}

/// Moves `bck` back to variant `target` (default: one before its current
/// variant; the last variant when uninitialised).
pub fn backward(
    bck: &mut BackwardTable,
    pars: &ModelParameters,
    cache: &HaplotypeCache,
    target: Option<usize>,
    cfg: &KernelConfig,
) -> Result<()> {
    check_common(bck.pars_hash(), bck.n_haps(), pars, cache, cfg)?;
    let l_max = cache.n_variants() - 1;
    let current = bck.variant();
    let target = match (target, current) {
        (Some(t), _) if t > l_max => {
            return Err(Error::IndexOutOfRange {
                what: "variant",
                index: t,
                bound: l_max + 1,
            })
        }
        (Some(t), Some(c)) if t >= c => return Err(Error::WrongDirection { current: c, target: t }),
        (Some(t), _) => t,
        (None, None) => l_max,
        (None, Some(0)) => {
            return Err(Error::WrongDirection { current: 0, target: 0 });
        }
        (None, Some(c)) => c - 1,
    };
    let from = bck.from_recipient();
    run(
        bck.parts(),
        Job {
            cache,
            pars,
            direction: Direction::Backward,
            from,
            stride: 0,
            start: current,
            target,
        },
        cfg,
    );
    bck.set_variant(target);
    Ok(())
}

fn check_common(
    table_hash: crate::model_params::ParamsHash,
    table_n: usize,
    pars: &ModelParameters,
    cache: &HaplotypeCache,
    cfg: &KernelConfig,
) -> Result<()> {
    if table_hash != pars.hash() {
        return Err(Error::ParamsMismatch {
            table: table_hash.to_string(),
            given: pars.hash().to_string(),
        });
    }
    if cache.n_haps() != pars.n_haps() || cache.n_variants() != pars.n_variants() {
        return Err(Error::DimensionMismatch(format!(
            "parameters are for {} haplotypes x {} variants, cache holds {} x {}",
            pars.n_haps(),
            pars.n_variants(),
            cache.n_haps(),
            cache.n_variants()
        )));
    }
    if table_n != cache.n_haps() {
        return Err(Error::DimensionMismatch(format!(
            "table is for {table_n} haplotypes, cache holds {}",
            cache.n_haps()
        )));
    }
    cfg.validate()
}

fn run(parts: SlabParts<'_>, job: Job<'_>, cfg: &KernelConfig) {
    let job = Job {
        stride: parts.stride,
        ..job
    };
    let (threads, cores) = match &cfg.threads {
        Threads::Count(n) => (*n, None),
        Threads::Cores(c) => (c.len(), Some(c.as_slice())),
    };
    let lanes = cfg.lane_width;
    let unroll = cfg.unroll;
    pool::run_chunks(
        parts.stride,
        parts.values,
        parts.scaling,
        parts.status,
        threads,
        cores,
        |chunk| dispatch(job, chunk, lanes, unroll),
    );
}

macro_rules! dispatch_unroll {
    ($lanes:literal, $unroll:expr, $job:expr, $chunk:expr) => {
        match $unroll {
            Unroll::U1 => run_chunk::<$lanes, 1>($job, $chunk),
            Unroll::U4 => run_chunk::<$lanes, 4>($job, $chunk),
            Unroll::U8 => run_chunk::<$lanes, 8>($job, $chunk),
        }
    };
}

fn dispatch(job: Job<'_>, chunk: Chunk<'_>, lanes: LaneWidth, unroll: Unroll) {
    match lanes {
        LaneWidth::W1 => dispatch_unroll!(1, unroll, job, chunk),
        LaneWidth::W2 => dispatch_unroll!(2, unroll, job, chunk),
        LaneWidth::W4 => {
            #[cfg(target_arch = "x86_64")]
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: feature checked at runtime just above.
                return unsafe { isa::avx2(job, chunk, unroll) };
            }
            dispatch_unroll!(4, unroll, job, chunk)
        }
        LaneWidth::W8 => {
            #[cfg(target_arch = "x86_64")]
            if std::arch::is_x86_feature_detected!("avx512f") {
                // SAFETY: feature checked at runtime just above.
                return unsafe { isa::avx512(job, chunk, unroll) };
            }
            dispatch_unroll!(8, unroll, job, chunk)
        }
    }
}

/// Feature-enabled entry points. Rust never contracts `a * b + c` into a
/// fused multiply-add, so results match the baseline build bit for bit.
#[cfg(target_arch = "x86_64")]
mod isa {
    use super::*;

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn avx2(job: Job<'_>, chunk: Chunk<'_>, unroll: Unroll) {
        dispatch_unroll!(4, unroll, job, chunk)
    }

    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn avx512(job: Job<'_>, chunk: Chunk<'_>, unroll: Unroll) {
        dispatch_unroll!(8, unroll, job, chunk)
    }
}

#[inline(always)]
fn run_chunk<const LANES: usize, const UNROLL: usize>(job: Job<'_>, chunk: Chunk<'_>) {
    match (job.pars.mu(), job.pars.pi()) {
        (Mutation::Uniform(m), CopyingPrior::Uniform(u)) => {
            let u = *u;
            columns::<LANES, UNROLL, _, _>(job, chunk, ScalarMu(*m), |_| UniformPi(u))
        }
        (Mutation::Uniform(m), CopyingPrior::Dense(d)) => {
            columns::<LANES, UNROLL, _, _>(job, chunk, ScalarMu(*m), |i| DenseCol(d.column(i)))
        }
        (Mutation::PerVariant(v), CopyingPrior::Uniform(u)) => {
            let u = *u;
            columns::<LANES, UNROLL, _, _>(job, chunk, VectorMu(v), |_| UniformPi(u))
        }
        (Mutation::PerVariant(v), CopyingPrior::Dense(d)) => {
            columns::<LANES, UNROLL, _, _>(job, chunk, VectorMu(v), |i| DenseCol(d.column(i)))
        }
    }
}

#[inline(always)]
fn columns<'p, const LANES: usize, const UNROLL: usize, M, P>(
    job: Job<'p>,
    chunk: Chunk<'_>,
    mu: M,
    pi_for: impl Fn(usize) -> P,
) where
    M: MuSource,
    P: PiSource + 'p,
{
    let n = job.cache.n_haps();
    for (k, col) in chunk.values.chunks_exact_mut(job.stride).enumerate() {
        let i = job.from + chunk.first + k;
        let pi = pi_for(i);
        let sum = &mut chunk.scaling[k];
        let status = &mut chunk.status[k];
        match job.direction {
            Direction::Forward => forward_column::<LANES, UNROLL, _, _>(job, n, i, col, sum, status, mu, pi),
            Direction::Backward => backward_column::<LANES, UNROLL, _, _>(job, n, i, col, sum, status, mu, pi),
        }
    }
}

#[inline(always)]
fn bit_row(cache: &HaplotypeCache, l: usize, recipient: usize) -> BitRow<'_> {
    BitRow {
        words: cache.row(l),
        mask: 0u32.wrapping_sub(cache.allele(l, recipient) as u32),
    }
}

#[inline(always)]
fn note(status: &mut ColumnStatus, sum: f64) {
    if status.is_ok() {
        *status = ColumnStatus::classify(sum);
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn forward_column<const LANES: usize, const UNROLL: usize, M: MuSource, P: PiSource>(
    job: Job<'_>,
    n: usize,
    i: usize,
    col: &mut [f64],
    sum: &mut f64,
    status: &mut ColumnStatus,
    mu: M,
    pi: P,
) {
    let cache = job.cache;
    let rho = job.pars.rho();
    let mut l = match job.start {
        Some(l) => l,
        None => {
            *status = ColumnStatus::Ok;
            let row = bit_row(cache, 0, i);
            let th = emission(mu.at(0));
            *sum = sweep::<LANES, UNROLL, _, _>(col, n, i, row, row, pi, |mis, _, _, p| {
                let v = if mis { th[1] } else { th[0] } * p;
                (v, v)
            });
            note(status, *sum);
            0
        }
    };
    while l < job.target {
        let r = rho[l];
        let keep = (1.0 - r) / *sum;
        l += 1;
        let row = bit_row(cache, l, i);
        let th = emission(mu.at(l));
        *sum = sweep::<LANES, UNROLL, _, _>(col, n, i, row, row, pi, |mis, _, a, p| {
            let v = if mis { th[1] } else { th[0] } * (keep * a + r * p);
            (v, v)
        });
        note(status, *sum);
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn backward_column<const LANES: usize, const UNROLL: usize, M: MuSource, P: PiSource>(
    job: Job<'_>,
    n: usize,
    i: usize,
    col: &mut [f64],
    sum: &mut f64,
    status: &mut ColumnStatus,
    mu: M,
    pi: P,
) {
    let cache = job.cache;
    let rho = job.pars.rho();
    let mut l = match job.start {
        Some(l) => l,
        None => {
            *status = ColumnStatus::Ok;
            let last = cache.n_variants() - 1;
            let row = bit_row(cache, last, i);
            let th = emission(mu.at(last));
            *sum = sweep::<LANES, UNROLL, _, _>(col, n, i, row, row, pi, |_, mis, _, p| {
                (1.0, if mis { th[1] } else { th[0] } * p)
            });
            note(status, *sum);
            last
        }
    };
    while l > job.target {
        let prev = bit_row(cache, l, i);
        let th_prev = emission(mu.at(l));
        l -= 1;
        let r = rho[l];
        let keep = (1.0 - r) / *sum;
        let row = bit_row(cache, l, i);
        let th = emission(mu.at(l));
        *sum = sweep::<LANES, UNROLL, _, _>(col, n, i, prev, row, pi, |mis_prev, mis, b, p| {
            let v = keep * b * if mis_prev { th_prev[1] } else { th_prev[0] } + r;
            (v, v * if mis { th[1] } else { th[0] } * p)
        });
        note(status, *sum);
    }
}
