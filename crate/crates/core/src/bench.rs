//! Timing harness for full forward and backward sweeps.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hap_cache::HaplotypeCache;
use crate::kernels::{backward, forward, KernelConfig, LaneWidth, Threads, Unroll};
use crate::model_params::{make_parameters, MuSpec, ParameterSpec};
use crate::tables::{BackwardTable, ForwardTable};

pub const DEFAULT_SEED: u64 = 0x5eed_1234;

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub sizes: Vec<usize>,
    pub lengths: Vec<usize>,
    pub threads: Vec<usize>,
    pub lane_widths: Vec<LaneWidth>,
    pub unrolls: Vec<Unroll>,
    pub repeats: usize,
    pub seed: u64,
    pub mu: f64,
    pub rho: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            sizes: vec![500, 1000, 2000],
            lengths: vec![100],
            threads: vec![1],
            lane_widths: vec![LaneWidth::detect()],
            unrolls: vec![Unroll::U4],
            repeats: 3,
            seed: DEFAULT_SEED,
            mu: 1e-4,
            rho: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub l: usize,
    pub threads: usize,
    pub lane_width: usize,
    pub unroll: usize,
    /// Fastest repeat, divided by `l`. `None` when the cell failed.
    pub seconds_per_variant: Option<f64>,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "N,L,threads,lane_width,unroll,seconds_per_variant,error";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n,
            self.l,
            self.threads,
            self.lane_width,
            self.unroll,
            self.seconds_per_variant.map(|s| s.to_string()).unwrap_or_default(),
            self.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        )
    }
}

/// Uniform random `L x N` alleles from a fixed-seed generator.
pub fn random_haplotypes(n: usize, l: usize, seed: u64) -> Array2<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((l, n), || rng.random_range(0..2u8))
}

/// Fastest of `spec.repeats` timings of one forward sweep over all variants
/// followed by one backward sweep, divided by `L`. Tables are allocated and
/// touched once up front; each repeat starts from a reset table.
fn run_cell(cache: &HaplotypeCache, spec: &BenchSpec, cfg: &KernelConfig) -> Result<f64> {
    let l = cache.n_variants();
    let pars = make_parameters(
        cache,
        ParameterSpec {
            rho: Some(vec![spec.rho; l - 1]),
            mu: MuSpec::Scalar(spec.mu),
            ..Default::default()
        },
    )?;
    let mut fwd = ForwardTable::full(&pars)?;
    let mut bck = BackwardTable::full(&pars)?;
    forward(&mut fwd, &pars, cache, Some(0), cfg)?;
    backward(&mut bck, &pars, cache, Some(l - 1), cfg)?;
    let mut best = f64::INFINITY;
    for _ in 0..spec.repeats.max(1) {
        fwd.reset();
        bck.reset();
        let t0 = Instant::now();
        forward(&mut fwd, &pars, cache, Some(l - 1), cfg)?;
        backward(&mut bck, &pars, cache, Some(0), cfg)?;
        best = best.min(t0.elapsed().as_secs_f64());
    }
    Ok(best / l as f64)
}

/// Runs every (N, L, threads, lane width, unroll) cell. Failures are
/// recorded in the row and the remaining cells still run. `on_row` sees each
/// row as soon as it is measured.
pub fn run_bench(spec: &BenchSpec, mut on_row: impl FnMut(&BenchRow)) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &n in &spec.sizes {
        for &l in &spec.lengths {
            let cache = HaplotypeCache::from_matrix(random_haplotypes(n, l, spec.seed).view());
            for &t in &spec.threads {
                for &w in &spec.lane_widths {
                    for &u in &spec.unrolls {
                        let cfg = KernelConfig {
                            threads: Threads::Count(t),
                            unroll: u,
                            lane_width: w,
                        };
                        let result = cache
                            .as_ref()
                            .map_err(|e| e.to_string())
                            .and_then(|c| run_cell(c, spec, &cfg).map_err(|e| e.to_string()));
                        let row = BenchRow {
                            n,
                            l,
                            threads: t,
                            lane_width: w.lanes(),
                            unroll: u.depth(),
                            seconds_per_variant: result.as_ref().ok().copied(),
                            error: result.err(),
                        };
                        on_row(&row);
                        rows.push(row);
                    }
                }
            }
        }
    }
    rows
}

pub fn write_csv(mut w: impl Write, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
