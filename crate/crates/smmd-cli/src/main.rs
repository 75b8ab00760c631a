//! `smmd` — estimator evaluation, normality tests, threshold generation,
//! experiment reproduction, and batch-stream monitoring from the command
//! line.
//!
//! Exit codes: 0 success (for `test`: fail to reject), 1 `test` rejected the
//! null, 2 usage or I/O error. Every stochastic subcommand takes an explicit
//! `--seed`; identical invocations produce byte-identical output.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use smmd::experiments::{
    benchmark_dims, g17, outlier_experiment, tau, tau_table_csv, tau_table_json, threshold_scale_grid,
    threshold_table, threshold_table_csv, threshold_table_json, validate_null,
    validate_table_csv, validate_table_json, AlternativeKind, AlternativeSpec, Method,
    ScaleChoice, TauResult, ThresholdRow, ValidateRow,
};
use smmd::monitoring::{BMonitor, ConvergenceFlag, EMonitor};
use smmd::rng::derive_seed;
use smmd::testing::{
    find_cached, load_or_simulate, test_normality, CompositeNull, NullSpec,
    MIN_REPLICATES_FOR_TEST,
};
use smmd::{
    code_normalize, code_normalize_random, mmd_b_closed, mmd_u_closed, mmd_u_random,
    null_variance, smmd as smmd_statistic, KernelSpec, RandomCodes, Sample,
};

const CACHE_DIR_ENV: &str = "SMMD_CACHE_DIR";
const DEFAULT_CACHE_DIR: &str = ".smmd-cache";

#[derive(Parser)]
#[command(
    name = "smmd",
    about = "Closed-form MMD/SMMD statistics against the standard normal",
    version
)]
struct Cli {
    /// Worker threads for Monte-Carlo loops (default: all cores). Results
    /// are bit-identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form estimators on a CSV of codes.
    Compute(ComputeArgs),
    /// Test a CSV sample for (composite) multivariate normality.
    Test(TestArgs),
    /// Generate the empirical threshold table.
    Thresholds(ThresholdsArgs),
    /// Discrimination-power experiment (effect size tau per method/scale).
    Discriminate(DiscriminateArgs),
    /// Verify SMMD has zero mean and unit variance under the null.
    Validate(ValidateArgs),
    /// Outlier-insensitivity experiment.
    Outliers(OutliersArgs),
    /// Stream per-batch SMMD values through a B- or E-statistic monitor.
    Monitor(MonitorArgs),
}

#[derive(Args)]
#[command(group = ArgGroup::new("width").required(true).args(["gamma", "scale"]))]
struct WidthArgs {
    /// Kernel width gamma (> 0).
    #[arg(long)]
    gamma: Option<f64>,

    /// Kernel scale s = gamma^2/d: a number, a fraction like 1/8, or "hz".
    #[arg(long)]
    scale: Option<String>,
}

impl WidthArgs {
    fn resolve(&self, d: usize, n: usize) -> Result<f64, CliError> {
        match (self.gamma, &self.scale) {
            (Some(g), None) => {
                if !(g.is_finite() && g > 0.0) {
                    return Err(CliError::new(format!(
                        "--gamma must be positive and finite, got {g}"
                    )));
                }
                Ok(g)
            }
            (None, Some(s)) => {
                let choice = ScaleChoice::from_str(s)
                    .map_err(|_| CliError::new(format!("--scale {s:?} is not a valid scale")))?;
                Ok(choice.gamma(d, n)?)
            }
            _ => unreachable!("clap enforces exactly one of --gamma/--scale"),
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    /// CSV of codes, one point per row (single header row auto-detected).
    #[arg(long)]
    input: PathBuf,

    /// Fail unless the CSV has exactly this many columns.
    #[arg(long)]
    d: Option<usize>,

    #[command(flatten)]
    width: WidthArgs,

    /// Apply code normalization before estimating.
    #[arg(long)]
    normalize: bool,

    /// Random-encoder mode: treat --input as per-point means and this CSV as
    /// the matching per-point standard deviations.
    #[arg(long, value_name = "SDS_CSV")]
    random_encoder: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompositeArg {
    /// H0: N(0, I), everything known.
    Simple,
    /// H0: N(mu, diagonal Sigma), both unknown.
    Diagonal,
    /// H0: N(mu, full Sigma), both unknown.
    Full,
}

impl CompositeArg {
    fn to_composite(self) -> CompositeNull {
        match self {
            CompositeArg::Simple => CompositeNull::SimpleStandard,
            CompositeArg::Diagonal => CompositeNull::DiagonalCov,
            CompositeArg::Full => CompositeNull::FullCov,
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,

    #[arg(long)]
    d: Option<usize>,

    #[command(flatten)]
    width: WidthArgs,

    #[arg(long, value_enum, default_value = "simple")]
    composite: CompositeArg,

    /// Test size.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Build the null distribution with this many replicates when it is not
    /// already cached (requires --seed).
    #[arg(long)]
    replicates: Option<usize>,

    /// Root seed for building the null distribution.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ThresholdsArgs {
    /// Dimensions, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = benchmark_dims())]
    dims: Vec<usize>,

    /// Kernel scales (numbers, fractions, or "hz"), comma-separated.
    #[arg(long, value_delimiter = ',')]
    scales: Vec<String>,

    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    #[arg(long, default_value_t = 100_000)]
    replicates: usize,

    #[arg(long)]
    seed: u64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DiscriminateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = benchmark_dims())]
    dims: Vec<usize>,

    /// Override the per-method scale grids.
    #[arg(long, value_delimiter = ',')]
    scales: Vec<String>,

    /// Methods to run (default: all three).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,

    /// Alternative distribution: "uniform" or "csv:<path>".
    #[arg(long, default_value = "uniform")]
    alternative: String,

    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 200)]
    replicates: usize,

    #[arg(long)]
    seed: u64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = benchmark_dims())]
    dims: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = ["2".to_string(), "1".into(), "1/2".into(), "1/4".into(), "1/8".into(), "1/16".into(), "1/32".into()])]
    scales: Vec<String>,

    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 10_000)]
    replicates: usize,

    #[arg(long)]
    seed: u64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutliersArgs {
    #[arg(long, default_value_t = 4)]
    d: usize,

    #[arg(long, default_value_t = 100.0)]
    magnitude: f64,

    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,

    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 200)]
    replicates: usize,

    #[arg(long)]
    seed: u64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MonitorKind {
    B,
    E,
}

#[derive(Args)]
struct MonitorArgs {
    /// CSV stream where every n consecutive rows form one batch ("-" reads
    /// standard input).
    #[arg(long)]
    input: PathBuf,

    /// Batch size.
    #[arg(long)]
    n: usize,

    #[arg(long)]
    d: Option<usize>,

    #[command(flatten)]
    width: WidthArgs,

    /// Which running statistic to track.
    #[arg(long, value_enum, default_value = "b")]
    monitor: MonitorKind,

    /// Momentum alpha for the E-statistic.
    #[arg(long, default_value_t = 0.99)]
    momentum: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

impl OutputArgs {
    fn emit(&self, content: &str) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, content)
                .map_err(|e| CliError::new(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{content}");
                Ok(())
            }
        }
    }
}

struct CliError(String);

impl CliError {
    fn new(message: impl Into<String>) -> Self {
        Self(message.into())
    }
}

impl From<smmd::Error> for CliError {
    fn from(e: smmd::Error) -> Self {
        Self(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_err()
        {
            eprintln!("error: could not configure {threads} worker threads");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Compute(args) => cmd_compute(args),
        Command::Test(args) => cmd_test(args),
        Command::Thresholds(args) => cmd_thresholds(args),
        Command::Discriminate(args) => cmd_discriminate(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Outliers(args) => cmd_outliers(args),
        Command::Monitor(args) => cmd_monitor(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion: plain decimal, comma separated, one point per row; a single
// non-numeric first row is treated as a header.
// ---------------------------------------------------------------------------

fn read_matrix_from(reader: impl Read, origin: &str) -> Result<Array2<f64>, CliError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (row_idx, record) in csv_reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::new(format!("{origin}: row {}: {e}", row_idx + 1)))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut parsed = Vec::with_capacity(record.len());
        let mut bad_col = None;
        for (col_idx, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(v),
                _ => {
                    bad_col = Some(col_idx);
                    break;
                }
            }
        }
        if let Some(col) = bad_col {
            // a non-numeric first row is an optional header
            if row_idx == 0 && rows.is_empty() {
                continue;
            }
            return Err(CliError::new(format!(
                "{origin}: row {}, column {}: not a finite number ({:?})",
                row_idx + 1,
                col + 1,
                record.get(col).unwrap_or_default()
            )));
        }
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return Err(CliError::new(format!(
                    "{origin}: row {} has {} columns, expected {w}",
                    row_idx + 1,
                    parsed.len()
                )));
            }
            _ => {}
        }
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(CliError::new(format!("{origin}: no data rows")));
    }
    let d = width.unwrap();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), d), flat).expect("width checked per row"))
}

fn read_matrix(path: &PathBuf) -> Result<Array2<f64>, CliError> {
    let origin = path.display().to_string();
    if path.as_os_str() == "-" {
        return read_matrix_from(std::io::stdin().lock(), "stdin");
    }
    let file = fs::File::open(path).map_err(|e| CliError::new(format!("{origin}: {e}")))?;
    read_matrix_from(file, &origin)
}

fn read_sample(path: &PathBuf, expect_d: Option<usize>) -> Result<Sample, CliError> {
    let data = read_matrix(path)?;
    if let Some(d) = expect_d {
        if data.ncols() != d {
            return Err(CliError::new(format!(
                "{}: has {} columns, --d demands {d}",
                path.display(),
                data.ncols()
            )));
        }
    }
    Ok(Sample::new(data)?)
}

fn parse_scales(raw: &[String]) -> Result<Vec<ScaleChoice>, CliError> {
    raw.iter()
        .map(|s| {
            ScaleChoice::from_str(s)
                .map_err(|_| CliError::new(format!("invalid scale {s:?} (number, fraction, or hz)")))
        })
        .collect()
}

fn parse_methods(raw: &[String]) -> Result<Vec<Method>, CliError> {
    if raw.is_empty() {
        return Ok(Method::all().to_vec());
    }
    raw.iter()
        .map(|s| Method::from_str(s).map_err(|e| CliError::new(e.to_string())))
        .collect()
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::new(format!(
            "--alpha must lie strictly inside (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

fn json_f64(v: Option<f64>) -> String {
    match v {
        Some(v) => g17(v),
        None => "null".to_string(),
    }
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

fn cmd_compute(args: ComputeArgs) -> Result<u8, CliError> {
    let means = read_sample(&args.input, args.d)?;
    let (n, d) = (means.n(), means.dim());
    let gamma = args.width.resolve(d, n)?;
    let s = gamma * gamma / d as f64;

    let (mmd_u, mmd_b, variance, smmd_value) = match &args.random_encoder {
        Some(sds_path) => {
            let sds = read_matrix(sds_path)?;
            let codes = RandomCodes::new(means.data().clone(), sds)?;
            let codes = if args.normalize {
                code_normalize_random(&codes)?
            } else {
                codes
            };
            // the variance formula and standardization apply to the
            // deterministic U-statistic only
            (Some(mmd_u_random(&codes, gamma)?), None, None, None)
        }
        None => {
            let sample = if args.normalize {
                code_normalize(&means)?
            } else {
                means
            };
            let variance = null_variance(gamma, d, n)?;
            (
                Some(mmd_u_closed(&sample, gamma)?),
                Some(mmd_b_closed(&sample, gamma)?),
                Some(variance),
                Some(smmd_statistic(&sample, gamma)?),
            )
        }
    };

    println!(
        "{{\"mmd_u\":{},\"mmd_b\":{},\"smmd\":{},\"variance\":{},\"gamma\":{},\"s\":{}}}",
        json_f64(mmd_u),
        json_f64(mmd_b),
        json_f64(smmd_value),
        json_f64(variance),
        g17(gamma),
        g17(s),
    );
    Ok(0)
}

fn cmd_test(args: TestArgs) -> Result<u8, CliError> {
    check_alpha(args.alpha)?;
    let sample = read_sample(&args.input, args.d)?;
    let (n, d) = (sample.n(), sample.dim());
    let gamma = args.width.resolve(d, n)?;
    let kernel = KernelSpec::rbf(gamma)?;
    let composite = args.composite.to_composite();
    let sample_type = composite.sample_type();
    let dir = cache_dir();

    let dist = match args.replicates {
        Some(replicates) => {
            let seed = args.seed.ok_or_else(|| {
                CliError::new("--seed is required when building a null distribution")
            })?;
            let spec = NullSpec::new(d, n, kernel, sample_type, replicates, seed)?;
            load_or_simulate(&spec, Some(&dir))?
        }
        None => find_cached(&dir, d, n, &kernel, sample_type, MIN_REPLICATES_FOR_TEST)?
            .ok_or_else(|| {
                CliError::new(format!(
                    "no cached null distribution for d={d} n={n} gamma={gamma} {} in {}; \
                     pass --replicates (and --seed) to build one",
                    sample_type.label(),
                    dir.display()
                ))
            })?,
    };

    let result = test_normality(&sample, &kernel, composite, args.alpha, &dist)?;
    println!(
        "{{\"statistic\":{},\"threshold\":{},\"reject\":{}}}",
        g17(result.statistic),
        g17(result.threshold),
        result.reject
    );
    Ok(u8::from(result.reject))
}

fn threshold_rows_to_string(rows: &[ThresholdRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => threshold_table_csv(rows),
        OutputFormat::Json => threshold_table_json(rows),
    }
}

fn cmd_thresholds(args: ThresholdsArgs) -> Result<u8, CliError> {
    check_alpha(args.alpha)?;
    let scales = if args.scales.is_empty() {
        threshold_scale_grid()
    } else {
        parse_scales(&args.scales)?
    };
    let rows = threshold_table(
        &args.dims,
        &scales,
        args.n,
        args.alpha,
        args.replicates,
        args.seed,
        Some(&cache_dir()),
    )?;
    args.output.emit(&threshold_rows_to_string(&rows, args.output.format))?;
    Ok(0)
}

fn tau_rows_to_string(rows: &[TauResult], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => tau_table_csv(rows),
        OutputFormat::Json => tau_table_json(rows),
    }
}

fn cmd_discriminate(args: DiscriminateArgs) -> Result<u8, CliError> {
    let methods = parse_methods(&args.methods)?;
    let override_scales = if args.scales.is_empty() {
        None
    } else {
        Some(parse_scales(&args.scales)?)
    };

    let external = match args.alternative.as_str() {
        "uniform" => None,
        other => match other.strip_prefix("csv:") {
            Some(path) => Some((read_matrix(&PathBuf::from(path))?, path.to_string())),
            None => {
                return Err(CliError::new(format!(
                    "--alternative must be \"uniform\" or \"csv:<path>\", got {other:?}"
                )))
            }
        },
    };

    let mut rows = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        let scales = override_scales.clone().unwrap_or_else(|| method.scale_grid());
        for (di, &d) in args.dims.iter().enumerate() {
            let kind = match &external {
                None => AlternativeKind::UniformCube,
                Some((data, label)) => AlternativeKind::External {
                    data: data.clone(),
                    label: label.clone(),
                },
            };
            let alt = AlternativeSpec::new(kind, d, args.n)?;
            for (si, &scale) in scales.iter().enumerate() {
                let cell_seed =
                    derive_seed(args.seed, ((mi * 64 + di) * 64 + si) as u64);
                rows.push(tau(method, &alt, scale, args.replicates, cell_seed)?);
            }
        }
    }
    args.output.emit(&tau_rows_to_string(&rows, args.output.format))?;
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, CliError> {
    let scales = parse_scales(&args.scales)?;
    let mut rows: Vec<ValidateRow> = Vec::new();
    for (di, &d) in args.dims.iter().enumerate() {
        rows.extend(validate_null(
            d,
            &scales,
            args.n,
            args.replicates,
            derive_seed(args.seed, di as u64),
        )?);
    }
    let content = match args.output.format {
        OutputFormat::Csv => validate_table_csv(&rows),
        OutputFormat::Json => validate_table_json(&rows),
    };
    args.output.emit(&content)?;
    Ok(0)
}

fn cmd_outliers(args: OutliersArgs) -> Result<u8, CliError> {
    let methods = parse_methods(&args.methods)?;
    let rows = outlier_experiment(
        &methods,
        args.d,
        args.n,
        args.magnitude,
        args.replicates,
        args.seed,
    )?;
    args.output.emit(&tau_rows_to_string(&rows, args.output.format))?;
    Ok(0)
}

fn cmd_monitor(args: MonitorArgs) -> Result<u8, CliError> {
    if args.n < 2 {
        return Err(CliError::new("--n must be at least 2"));
    }
    let data = read_matrix(&args.input)?;
    let rows = data.nrows();
    let d = data.ncols();
    if let Some(expect) = args.d {
        if d != expect {
            return Err(CliError::new(format!(
                "{}: has {d} columns, --d demands {expect}",
                args.input.display()
            )));
        }
    }
    if rows % args.n != 0 {
        return Err(CliError::new(format!(
            "final batch has {} rows, expected {} (input rows {} not a multiple of n)",
            rows % args.n,
            args.n,
            rows
        )));
    }
    let gamma = args.width.resolve(d, args.n)?;

    enum Tracker {
        B(BMonitor),
        E(EMonitor),
    }
    let mut tracker = match args.monitor {
        MonitorKind::B => Tracker::B(BMonitor::new()),
        MonitorKind::E => Tracker::E(EMonitor::new(args.momentum)?),
    };

    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut last: Option<(f64, f64, f64, ConvergenceFlag)> = None;
    for (batch_index, chunk) in (0..rows / args.n).enumerate() {
        let start = chunk * args.n;
        let batch = Sample::new(data.slice(ndarray::s![start..start + args.n, ..]).to_owned())?;
        let value = smmd_statistic(&batch, gamma)?;
        let (key, stat, lo, hi, flag) = match &mut tracker {
            Tracker::B(m) => {
                m.update(value);
                let (lo, hi) = m.interval()?;
                ("b_stat", m.statistic().expect("updated"), lo, hi, m.flag())
            }
            Tracker::E(m) => {
                m.update(value);
                let (lo, hi) = m.interval();
                ("e_stat", m.statistic(), lo, hi, m.flag())
            }
        };
        writeln!(
            out,
            "{{\"batch_index\":{batch_index},\"smmd\":{},\"{key}\":{},\"interval_lo\":{},\"interval_hi\":{},\"flag\":\"{}\"}}",
            g17(value),
            g17(stat),
            g17(lo),
            g17(hi),
            flag.label()
        )
        .map_err(|e| CliError::new(e.to_string()))?;
        last = Some((stat, lo, hi, flag));
    }
    let (stat, lo, hi, flag) = last.expect("at least one batch");
    let key = match args.monitor {
        MonitorKind::B => "final_b_stat",
        MonitorKind::E => "final_e_stat",
    };
    writeln!(
        out,
        "{{\"batches\":{},\"{key}\":{},\"interval_lo\":{},\"interval_hi\":{},\"verdict\":\"{}\"}}",
        rows / args.n,
        g17(stat),
        g17(lo),
        g17(hi),
        flag.label()
    )
    .map_err(|e| CliError::new(e.to_string()))?;
    Ok(0)
}
