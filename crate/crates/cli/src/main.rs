//! `lsengine`: command-line front end.
//!
//! Indices on the command line are 1-based and inclusive; they are converted
//! to the library's 0-based indices here and nowhere else. Every failure is
//! reported as a single `error[CODE]: message` line with a non-zero exit.

mod inputs;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsengine::bench::{self, BenchSpec};
use lsengine::hap_cache::{drop_singletons, NO_CACHE_MESSAGE};
use lsengine::io::{self as lsio, HapFormat, HapSource};
use lsengine::model_params::{calc_rho, map_gaps};
use lsengine::{
    backward, dist_mat, forward, make_parameters, post_probs, BackwardTable, CacheStore, Error, ForwardTable,
    HaplotypeCache, KernelConfig, LaneWidth, MuSpec, ParameterSpec, Unroll,
};
use ndarray::Array2;

#[derive(Debug)]
pub enum CliError {
    Engine(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Engine(e) => e.code(),
            CliError::Usage(_) => "E_USAGE",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Engine(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "lsengine",
    version,
    about = "Haplotype copying model: forward/backward decoding and local distances"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the memory and shape summary of a haplotype file.
    CacheInfo(InputArgs),
    /// Print selected alleles as a 0/1 text matrix (variants in rows).
    Query(QueryArgs),
    /// Propagate to one variant and write the distance matrix or posterior slab.
    Decode(DecodeArgs),
    /// Time full forward and backward sweeps on synthetic data; CSV output.
    Bench(BenchArgs),
    /// Transcode haplotype files between formats.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InFormat {
    Hapgz,
    Hdf5,
    Native,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Bin,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Haplotype file.
    #[arg(long)]
    input: PathBuf,
    /// Input format; inferred from the extension when omitted (.h5/.hdf5, .lshc, else hap.gz).
    #[arg(long, value_enum)]
    format: Option<InFormat>,
    /// Text: one haplotype per line. HDF5: variants in the slowest dimension.
    #[arg(long)]
    transpose: bool,
    /// Remove variants where exactly one haplotype differs from the rest.
    #[arg(long)]
    drop_singletons: bool,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Variants to print, e.g. "1,4-9" (default: all).
    #[arg(long)]
    variants: Option<String>,
    /// Variants to print by id (HDF5 loci.ids), comma-separated.
    #[arg(long, conflicts_with = "variants")]
    variant_ids: Option<String>,
    /// Haplotypes to print, e.g. "1-10" (default: all).
    #[arg(long)]
    haps: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Recombination map: one cumulative position in cM per variant.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Uniform recombination probability between adjacent variants.
    #[arg(long, conflicts_with = "map")]
    rho: Option<f64>,
    /// Effective population size multiplier applied to map distances.
    #[arg(long = "Ne", default_value_t = 1.0, requires = "map")]
    ne: f64,
    /// Exponent applied to map distances (in Morgans).
    #[arg(long, default_value_t = 1.0, requires = "map")]
    gamma: f64,
    /// Mis-copy probability: a number, or a file with one value per variant.
    #[arg(long, default_value = "1e-8")]
    mu: String,
    /// Copying prior: N x N text matrix, entry (j, i) = P(i copies j).
    #[arg(long)]
    pi: Option<PathBuf>,
    /// Variant to decode (1-based, indexed before singleton removal).
    #[arg(long)]
    variant: usize,
    /// First recipient of the window (1-based, inclusive).
    #[arg(long)]
    from: Option<usize>,
    /// Last recipient of the window (1-based, inclusive).
    #[arg(long)]
    to: Option<usize>,
    /// Worker threads.
    #[arg(long, env = lsengine::kernels::THREADS_ENV, conflicts_with = "cores")]
    threads: Option<usize>,
    /// Comma-separated core ids; one pinned worker per core.
    #[arg(long)]
    cores: Option<String>,
    /// Force a lane width (1, 2, 4 or 8); detected by default.
    #[arg(long)]
    lane_width: Option<usize>,
    /// Unroll depth (1, 4 or 8).
    #[arg(long, default_value_t = 4)]
    unroll: usize,
    /// Write the distance matrix (the default for a full window).
    #[arg(long, conflicts_with = "slab")]
    dist: bool,
    /// Write the posterior slab (the default for a partial window).
    #[arg(long)]
    slab: bool,
    /// Column-wise standardise the distance matrix.
    #[arg(long, conflicts_with = "slab")]
    standardize: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    out_format: OutFormat,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Haplotype counts, comma-separated.
    #[arg(long, default_value = "500,1000,2000")]
    sizes: String,
    /// Variant counts, comma-separated.
    #[arg(long, default_value = "100")]
    lengths: String,
    /// Thread counts, comma-separated.
    #[arg(long, default_value = "1")]
    threads: String,
    /// Lane widths, comma-separated (default: detected).
    #[arg(long)]
    lane_widths: Option<String>,
    /// Unroll depths, comma-separated.
    #[arg(long, default_value = "4")]
    unrolls: String,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = bench::DEFAULT_SEED)]
    seed: u64,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HapOutFormat {
    Hapgz,
    Hdf5,
    Native,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    to_format: HapOutFormat,
    /// Replace an existing HDF5 output file.
    #[arg(long)]
    overwrite: bool,
}

fn infer_format(path: &Path) -> HapFormat {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    if name.ends_with(".h5") || name.ends_with(".hdf5") {
        HapFormat::Hdf5
    } else if name.ends_with(".lshc") {
        HapFormat::Native
    } else {
        HapFormat::HapGz
    }
}

/// Loaded cache plus, for each cached variant, its index in the file.
struct Loaded {
    cache: Arc<HaplotypeCache>,
    original: Vec<usize>,
    file_variants: usize,
}

fn load(args: &InputArgs) -> CliResult<Loaded> {
    let kind = match args.format {
        Some(InFormat::Hapgz) => HapFormat::HapGz,
        Some(InFormat::Hdf5) => HapFormat::Hdf5,
        Some(InFormat::Native) => HapFormat::Native,
        None => infer_format(&args.input),
    };
    let source = HapSource::new(kind, &args.input).transposed(args.transpose);
    let store = CacheStore::global();
    let mut file_variants = 0;
    let mut original = Vec::new();
    let cache = store.load_with(|| {
        let full = source.load()?;
        file_variants = full.n_variants();
        if !args.drop_singletons {
            original = (0..file_variants).collect();
            return Ok(full);
        }
        let (kept, dropped) = drop_singletons(full.query(None, None)?.view());
        original = (0..file_variants)
            .filter(|l| dropped.binary_search(l).is_err())
            .collect();
        log::info!("dropped {} singleton variants", dropped.len());
        if kept.nrows() == 0 {
            return Err(Error::EmptyMatrix);
        }
        HaplotypeCache::from_matrix(kept.view())
    })?;
    Ok(Loaded {
        cache,
        original,
        file_variants,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    }
}

fn cmd_cache_info(args: InputArgs) -> CliResult {
    load(&args)?;
    match CacheStore::global().summary() {
        Some(s) => println!("{s}"),
        None => println!("{NO_CACHE_MESSAGE}"),
    }
    Ok(())
}

fn cmd_query(args: QueryArgs) -> CliResult {
    let loaded = load(&args.input)?;
    let cache = &loaded.cache;
    let variants = match (&args.variants, &args.variant_ids) {
        (Some(v), _) => Some(inputs::index_list(v, "variant", cache.n_variants())?),
        (None, Some(ids)) => Some(
            ids.split(',')
                .map(|id| cache.variant_by_id(id.trim()))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        (None, None) => None,
    };
    let haps = args
        .haps
        .as_deref()
        .map(|h| inputs::index_list(h, "haplotype", cache.n_haps()))
        .transpose()?;
    let m = CacheStore::global().query(variants.as_deref(), haps.as_deref())?;
    let mut text = String::with_capacity(m.len() * 2);
    for row in m.rows() {
        let line: Vec<&str> = row.iter().map(|&a| if a == 0 { "0" } else { "1" }).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    match &args.out {
        Some(p) => std::fs::write(p, text).map_err(io_err(p)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

fn kernel_config(args: &DecodeArgs) -> CliResult<KernelConfig> {
    let mut cfg = KernelConfig::default().with_unroll(Unroll::from_depth(args.unroll)?);
    if let Some(w) = args.lane_width {
        cfg = cfg.with_lane_width(LaneWidth::from_lanes(w)?);
    }
    if let Some(t) = args.threads {
        cfg = cfg.with_threads(t);
    }
    if let Some(c) = &args.cores {
        cfg = cfg.with_cores(inputs::number_list(c, "core")?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_decode(args: DecodeArgs) -> CliResult {
    let cfg = kernel_config(&args)?;
    let loaded = load(&args.input)?;
    let cache = &loaded.cache;
    let n = cache.n_haps();

    let from = args
        .from
        .map(|f| inputs::one_based(&f.to_string(), "recipient", n))
        .transpose()?
        .unwrap_or(0);
    let to = args
        .to
        .map(|t| inputs::one_based(&t.to_string(), "recipient", n))
        .transpose()?
        .unwrap_or(n - 1);
    if from > to {
        return Err(Error::InvalidWindow { from, to, n_haps: n }.into());
    }
    let full = from == 0 && to == n - 1;
    if args.dist && !full {
        // Reported in command-line (1-based) indices.
        return Err(Error::PartialWindow {
            from: from + 1,
            to: to + 1,
            n_haps: n,
        }
        .into());
    }
    if args.standardize && !full {
        return Err(CliError::Usage("--standardize needs the full recipient window".into()));
    }
    let write_slab = args.slab || !full;

    let file_variant = inputs::one_based(&args.variant.to_string(), "variant", loaded.file_variants)?;
    let variant = loaded
        .original
        .binary_search(&file_variant)
        .map_err(|_| CliError::Usage(format!("variant {} was removed as a singleton", args.variant)))?;

    let keep = |v: Vec<f64>, what: &str| -> CliResult<Vec<f64>> {
        if v.len() != loaded.file_variants {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {} values, expected one per variant ({})",
                v.len(),
                loaded.file_variants
            ))
            .into());
        }
        Ok(loaded.original.iter().map(|&l| v[l]).collect())
    };
    let rho = match &args.map {
        Some(p) => {
            let positions = keep(inputs::read_vector(p)?, "map")?;
            Some(calc_rho(&map_gaps(&positions), args.ne, args.gamma)?)
        }
        None => args.rho.map(|r| vec![r; cache.n_variants() - 1]),
    };
    let mu = match args.mu.parse::<f64>() {
        Ok(m) => MuSpec::Scalar(m),
        Err(_) => MuSpec::PerVariant(keep(inputs::read_vector(Path::new(&args.mu))?, "mu file")?),
    };
    let pi: Option<Array2<f64>> = args.pi.as_deref().map(inputs::read_matrix).transpose()?;
    let pars = make_parameters(
        cache,
        ParameterSpec {
            rho,
            mu,
            pi: pi.as_ref().map(|p| p.view()),
            ..Default::default()
        },
    )?;
    println!("{}", cache.summary());
    println!("{pars}");
    log::info!("kernel: {}, {:?}", lsengine::select_kernel(&pars), cfg);

    let mut fwd = ForwardTable::new(&pars, from, to)?;
    let mut bck = BackwardTable::new(&pars, from, to)?;
    forward(&mut fwd, &pars, cache, Some(variant), &cfg)?;
    backward(&mut bck, &pars, cache, Some(variant), &cfg)?;
    println!("{fwd}");
    println!("{bck}");

    let labels = |lo: usize, hi: usize| -> Vec<String> { (lo + 1..=hi + 1).map(|k| k.to_string()).collect() };
    let degenerate = if write_slab {
        let slab = post_probs(&fwd, &bck)?;
        match args.out_format {
            OutFormat::Csv => lsio::write_csv(&args.out, slab.p.view(), &labels(from, to))?,
            OutFormat::Bin => lsio::write_lsps(&args.out, &slab)?,
        }
        slab.degenerate_columns
    } else {
        let d = dist_mat(&fwd, &bck, args.standardize)?;
        match args.out_format {
            OutFormat::Csv => lsio::write_csv(&args.out, d.d.view(), &labels(0, n - 1))?,
            OutFormat::Bin => lsio::write_lsdm(&args.out, d.d.view(), file_variant)?,
        }
        d.degenerate_columns
    };
    if !degenerate.is_empty() {
        let shown: Vec<String> = degenerate.iter().map(|i| (i + 1).to_string()).collect();
        log::warn!(
            "{} recipient column(s) underflowed completely; posteriors clamped: {}",
            degenerate.len(),
            shown.join(",")
        );
        println!("Degenerate columns: {}", shown.join(","));
    }
    println!(
        "Wrote {} for variant {} to {}",
        if write_slab {
            "posterior slab"
        } else {
            "distance matrix"
        },
        args.variant,
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CliResult {
    let lane_widths = match &args.lane_widths {
        Some(s) => inputs::number_list::<usize>(s, "lane width")?
            .into_iter()
            .map(LaneWidth::from_lanes)
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![LaneWidth::detect()],
    };
    let unrolls = inputs::number_list::<usize>(&args.unrolls, "unroll")?
        .into_iter()
        .map(Unroll::from_depth)
        .collect::<Result<Vec<_>, _>>()?;
    let spec = BenchSpec {
        sizes: inputs::number_list(&args.sizes, "size")?,
        lengths: inputs::number_list(&args.lengths, "length")?,
        threads: inputs::number_list(&args.threads, "thread count")?,
        lane_widths,
        unrolls,
        repeats: args.repeats,
        seed: args.seed,
        ..Default::default()
    };
    if spec.lengths.contains(&0) {
        return Err(CliError::Usage("lengths must be positive".into()));
    }
    let (mut sink, name): (Box<dyn Write>, PathBuf) = match &args.out {
        Some(p) => (Box::new(create(p)?), p.clone()),
        None => (Box::new(io::stdout()), PathBuf::from("<stdout>")),
    };
    writeln!(sink, "{}", bench::CSV_HEADER).map_err(io_err(&name))?;
    let mut write_err = None;
    bench::run_bench(&spec, |row| {
        if write_err.is_none() {
            if let Err(e) = writeln!(sink, "{}", row.csv_line()).and_then(|_| sink.flush()) {
                write_err = Some(e);
            }
        }
        if let Some(err) = &row.error {
            log::warn!(
                "bench cell N={} L={} threads={} failed: {err}",
                row.n,
                row.l,
                row.threads
            );
        }
    });
    match write_err {
        Some(e) => Err(io_err(&name)(e)),
        None => Ok(()),
    }
}

fn cmd_convert(args: ConvertArgs) -> CliResult {
    let loaded = load(&args.input)?;
    let cache = &loaded.cache;
    match args.to_format {
        HapOutFormat::Native => lsio::write_native(&args.out, cache)?,
        HapOutFormat::Hapgz => lsio::write_hapgz(&args.out, cache.query(None, None)?.view())?,
        HapOutFormat::Hdf5 => write_hdf5(&args, cache)?,
    }
    println!(
        "Wrote {} haplotypes x {} variants to {}",
        cache.n_haps(),
        cache.n_variants(),
        args.out.display()
    );
    Ok(())
}

#[cfg(feature = "hdf5")]
fn write_hdf5(args: &ConvertArgs, cache: &HaplotypeCache) -> CliResult {
    let loci: Option<Vec<String>> = cache.loci_ids().map(|ids| ids.to_vec());
    lsio::write_hdf5(
        &args.out,
        cache.query(None, None)?.view(),
        cache.hap_ids(),
        loci.as_deref(),
        args.overwrite,
    )?;
    Ok(())
}

#[cfg(not(feature = "hdf5"))]
fn write_hdf5(_: &ConvertArgs, _: &HaplotypeCache) -> CliResult {
    Err(Error::Unsupported("built without HDF5 support".into()).into())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::CacheInfo(a) => cmd_cache_info(a),
        Command::Query(a) => cmd_query(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let body: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(|l| l.trim_start_matches("error:").trim())
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("error[E_USAGE]: {}", body.join(" "));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
