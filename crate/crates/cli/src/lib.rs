//! Command-line front end: argument parsing, config files and exit codes.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error, 3 when a test rejects
//! and `--exit-on-reject` is set.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use xi_boost::io::{self, load_sample};
use xi_boost::simulation::{self, PowerStudyConfig, StudyReport};
use xi_boost::{
    inference, power, Method, NeighborCount, PermutationTestConfig, TestMethod, XiError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECT: i32 = 3;

pub const SEED_ENV: &str = "XI_BOOST_SEED";

#[derive(Parser, Debug)]
#[command(name = "xi-boost", version, about = "Revised Chatterjee rank correlations and independence tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one coefficient on a two-column data file.
    Coef(CoefArgs),
    /// Run an independence test on a two-column data file.
    Test(TestArgs),
    /// Rejection frequencies under Gaussian local alternatives.
    PowerStudy(PowerArgs),
    /// Monte Carlo null mean, variance and normal fit of xi_{n,M}.
    NullCalibration(NullArgs),
    /// Sampling distribution of xi_{n,M} against the population value.
    Consistency(ConsistencyArgs),
    /// Median evaluation time of xi-pm.
    Timing(TimingArgs),
    /// Detection boundary zeta(n, M) or the exponent curve beta(gamma), as CSV.
    Boundary(BoundaryArgs),
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Master seed; falls back to the XI_BOOST_SEED environment variable.
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
}

impl SeedArg {
    fn require(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("--seed (or {SEED_ENV}) is required")))
    }
}

#[derive(Args, Debug)]
struct OutputArg {
    /// Report path; the extension (.json or .csv) picks the format. JSON to stdout if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoefArgs {
    #[arg(long)]
    method: Method,
    /// Number of right nearest neighbors.
    #[arg(short = 'M', long = "m")]
    m: Option<usize>,
    /// Break ties with seeded noise instead of failing.
    #[arg(long)]
    jitter_seed: Option<u64>,
    /// Print a JSON object instead of a tab-separated line.
    #[arg(long)]
    json: bool,
    input: PathBuf,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long, default_value = "xi-pm")]
    method: TestMethod,
    #[arg(short = 'M', long = "m")]
    m: Option<usize>,
    #[arg(short = 'B', long = "b", default_value_t = 10_000)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Allow the asymptotic test when M^4 > n.
    #[arg(long)]
    allow_outside_regime: bool,
    #[arg(long)]
    jitter_seed: Option<u64>,
    /// Exit with code 3 when the test rejects.
    #[arg(long)]
    exit_on_reject: bool,
    input: PathBuf,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(short = 'M', long = "m", value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0, 5.0])]
    rho0: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "xi-pm")]
    methods: Vec<TestMethod>,
    /// Defaults to 500 (1,000 with --full-scale).
    #[arg(long)]
    replicates: Option<usize>,
    /// Defaults to 999 (10,000 with --full-scale).
    #[arg(short = 'B', long = "b")]
    b: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Use 1,000 replicates and B = 10,000.
    #[arg(long)]
    full_scale: bool,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args, Debug)]
struct NullArgs {
    #[arg(long = "n")]
    n: usize,
    #[arg(short = 'M', long = "m")]
    m: usize,
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args, Debug)]
struct ConsistencyArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    rho: Vec<f64>,
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(short = 'M', long = "m", value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    replicates: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args, Debug)]
struct TimingArgs {
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(short = 'M', long = "m", value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value_t = simulation::TIMING_MIN_REPETITIONS)]
    replicates: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    /// `start:stop:step` grid of gamma values in (0, 1).
    #[arg(long, conflicts_with_all = ["n", "m"])]
    gamma_grid: Option<String>,
    #[arg(long = "n", requires = "m")]
    n: Option<usize>,
    #[arg(short = 'M', long = "m", requires = "n")]
    m: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(XiError),
}

impl From<XiError> for CliError {
    fn from(e: XiError) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.into())
    }
}

/// Reads a `key = value` config file. Blank lines and lines starting with `#`
/// are ignored. Keys are long flag names without the leading dashes.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", k + 1))?;
        let key = match key.trim().trim_start_matches("--") {
            "M" => "m",
            "B" => "b",
            k => k,
        };
        if key.is_empty() {
            return Err(format!("config line {}: empty key", k + 1));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn short_alias(key: &str) -> Option<&'static str> {
    match key {
        "m" => Some("-M"),
        "b" => Some("-B"),
        "output" => Some("-o"),
        _ => None,
    }
}

fn given_on_command_line(key: &str, argv: &[OsString]) -> bool {
    let long = format!("--{key}");
    let short = short_alias(key);
    argv.iter().any(|a| {
        let a = a.to_string_lossy();
        a == long
            || a.starts_with(&format!("{long}="))
            || short.is_some_and(|s| a.starts_with(s))
    })
}

/// Turns config entries into flags. `true`/`false` values toggle switches.
fn config_flags(config: &BTreeMap<String, String>) -> Vec<OsString> {
    let mut flags = vec![];
    for (key, value) in config {
        match value.as_str() {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            _ => flags.push(format!("--{key}={value}").into()),
        }
    }
    flags
}

/// Removes `--config PATH` from `argv` and splices the file's flags in right
/// after the subcommand name. Keys also given on the command line are
/// dropped, so the command line wins.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = vec![];
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy().into_owned();
        if s == "--config" {
            let p = it
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = parse_config(&text).map_err(CliError::Usage)?;
    config.retain(|key, _| !given_on_command_line(key, &rest));
    // argv[0], then the subcommand
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .ok_or_else(|| CliError::Usage("--config needs a subcommand".into()))?;
    let tail = rest.split_off(at);
    rest.extend(config_flags(&config));
    rest.extend(tail);
    Ok(rest)
}

fn neighbor_count(m: Option<usize>, needed: bool, what: &str) -> Result<Option<NeighborCount>, CliError> {
    match (m, needed) {
        (Some(m), true) => Ok(Some(NeighborCount::new(m)?)),
        (None, true) => Err(CliError::Usage(format!("{what} needs -M/--m"))),
        (_, false) => Ok(None),
    }
}

fn load(input: &Path, jitter_seed: Option<u64>) -> Result<xi_boost::Sample, CliError> {
    let s = load_sample(input)?;
    Ok(match jitter_seed {
        Some(seed) => {
            let (x, y) = s.into_parts();
            xi_boost::Sample::with_jitter(x, y, seed)?
        }
        None => s,
    })
}

fn json_line(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string(value).map_err(|e| XiError::Io(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn emit_report(report: &StudyReport, output: &OutputArg, out: &mut dyn Write) -> Result<(), CliError> {
    match &output.output {
        Some(path) => io::write_report(report, path)?,
        None => io::write_report_json(report, out)?,
    }
    Ok(())
}

fn pool(workers: usize) -> Result<simulation::WorkerPool, CliError> {
    Ok(simulation::WorkerPool::new(workers)?)
}

fn coef(a: CoefArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = neighbor_count(a.m, a.method.uses_m(), a.method.name())?;
    let s = load(&a.input, a.jitter_seed)?;
    let v = xi_boost::coefficient(a.method, &s, m)?;
    if a.json {
        json_line(out, &v)?;
    } else {
        let m = v.m.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
        writeln!(out, "{}\t{}\tn={}\tM={}", v.method, io::format_f64(v.value), v.n, m)?;
    }
    Ok(EXIT_OK)
}

fn test(a: TestArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = neighbor_count(a.m, a.method.uses_m(), a.method.name())?;
    let s = load(&a.input, a.jitter_seed)?;
    let result = match a.method {
        TestMethod::Pearson => inference::pearson_test(&s, a.alpha)?,
        TestMethod::XiAsymptotic => {
            inference::asymptotic_test_with(&s, m.unwrap(), a.alpha, a.allow_outside_regime)?
        }
        method => {
            let cfg = PermutationTestConfig {
                b: a.b,
                alpha: a.alpha,
                // Hoeffding's D has no M; any valid count passes validation.
                m: m.unwrap_or(NeighborCount::new(1)?),
                seed: a.seed.require()?,
                method,
            };
            pool(a.workers)?.install(|| inference::permutation_test(&s, &cfg))?
        }
    };
    json_line(out, &result)?;
    Ok(if a.exit_on_reject && result.reject {
        EXIT_REJECT
    } else {
        EXIT_OK
    })
}

fn power_study(a: PowerArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut cfg = PowerStudyConfig::desk(a.n, a.m, a.rho0, a.methods, a.seed.require()?);
    if a.full_scale {
        cfg = cfg.full_scale();
    }
    cfg.replicates = a.replicates.unwrap_or(cfg.replicates);
    cfg.b = a.b.unwrap_or(cfg.b);
    cfg.alpha = a.alpha;
    cfg.workers = a.workers;
    if cfg.methods.iter().any(|m| m.uses_m()) && cfg.m_values.is_empty() {
        return Err(CliError::Usage("power-study needs -M/--m for M-based methods".into()));
    }
    let report = simulation::power_study(&cfg)?;
    emit_report(&report, &a.output, out)?;
    Ok(EXIT_OK)
}

fn null_calibration(a: NullArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = simulation::null_calibration_study(
        a.n,
        NeighborCount::new(a.m)?,
        a.replicates,
        a.seed.require()?,
        a.workers,
    )?;
    emit_report(&report, &a.output, out)?;
    Ok(EXIT_OK)
}

fn consistency(a: ConsistencyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let report =
        simulation::consistency_study(&a.rho, &a.n, &a.m, a.replicates, a.seed.require()?, a.workers)?;
    emit_report(&report, &a.output, out)?;
    Ok(EXIT_OK)
}

fn timing(a: TimingArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = simulation::timing_study(&a.n, &a.m, a.replicates, a.seed.require()?)?;
    emit_report(&report, &a.output, out)?;
    Ok(EXIT_OK)
}

/// Parses `start:stop:step` into the grid `start, start+step, ...` up to `stop`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, h] = parts.as_slice() else {
        return Err(format!("grid {text:?} is not start:stop:step"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?} in grid"));
    let (a, b, h) = (num(a)?, num(b)?, num(h)?);
    if h.is_nan() || h <= 0.0 || b.is_nan() || b < a || !a.is_finite() || !b.is_finite() {
        return Err(format!("grid {text:?} needs start <= stop and step > 0"));
    }
    // indexed rather than accumulated, so the last point is not lost to drift
    let count = ((b - a) / h + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| a + k as f64 * h).collect())
}

fn boundary(a: BoundaryArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    match (a.gamma_grid, a.n, a.m) {
        (Some(grid), _, _) => {
            let gammas = parse_grid(&grid).map_err(CliError::Usage)?;
            writeln!(out, "gamma,beta")?;
            for g in gammas {
                writeln!(out, "{},{}", io::format_f64(g), io::format_f64(power::beta_of_gamma(g)?))?;
            }
        }
        (None, Some(n), Some(m)) => {
            let z = power::zeta(n, NeighborCount::new(m)?)?;
            writeln!(out, "n,M,zeta")?;
            writeln!(out, "{n},{m},{}", io::format_f64(z))?;
        }
        _ => return Err(CliError::Usage("boundary needs --gamma-grid or both --n and --m".into())),
    }
    Ok(EXIT_OK)
}

/// Runs one command line and returns its exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let result = expand_config(argv).and_then(|argv| {
        let cli = match Cli::try_parse_from(argv) {
            Ok(cli) => cli,
            Err(e) => {
                let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
                let text = e.render().to_string();
                if e.use_stderr() {
                    let _ = write!(err, "{text}");
                } else {
                    let _ = write!(out, "{text}");
                }
                return Ok(code);
            }
        };
        match cli.command {
            Command::Coef(a) => coef(a, out),
            Command::Test(a) => test(a, out),
            Command::PowerStudy(a) => power_study(a, out),
            Command::NullCalibration(a) => null_calibration(a, out),
            Command::Consistency(a) => consistency(a, out),
            Command::Timing(a) => timing(a, out),
            Command::Boundary(a) => boundary(a, out),
        }
    });
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}
