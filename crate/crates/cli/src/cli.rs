use std::ffi::OsString;
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gnar::correlogram::{corbit_layout, grid, time_slices, wagner_layout, CorrelogramKind};
use gnar::fit::{fit_least_squares, forecast, rolling_comparison, CandidateModel};
use gnar::graph::NetworkStructure;
use gnar::influence::{influence_report, RelevanceVariant};
use gnar::io::{self, Dataset, FitRecord, Transform};
use gnar::model::{simulate, Alpha, AlphaMode, GnarCoefficients, GnarOrder, SimulationConfig};
use gnar::spectral::{omega_grid, verify_conditional_support, DEFAULT_OMEGA_POINTS, DEFAULT_TOL};
use gnar::GnarError;
use serde::Serialize;

use crate::svg;

#[derive(Debug, Parser)]
#[command(name = "gnar", version, about = "Generalised network autoregressive modelling")]
pub struct Cli {
    /// Seed for every random draw made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (or file prefix / directory for multi-file commands); stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a series from known coefficients.
    Simulate(SimulateArgs),
    /// Fit a GNAR model by least squares and emit fit JSON.
    Fit(FitArgs),
    /// Forecast from a fitted model.
    Forecast(ForecastArgs),
    /// NACF/PNACF grid as JSON plus a Corbit SVG.
    Corbit(CorbitArgs),
    /// NACF/PNACF grids over time slices as JSON plus a Wagner SVG.
    Wagner(WagnerArgs),
    /// Global relevance, local influence and conditional-correlation strength.
    Influence(InfluenceArgs),
    /// Check the distance-based zero pattern of the inverse spectral matrix.
    SpectralVerify(SpectralArgs),
    /// Rolling one-step prediction comparison.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Preprocess {
    /// Apply log(1 + y) to every observation.
    #[arg(long)]
    log1p: bool,
    /// Difference at this lag (after log1p).
    #[arg(long, value_name = "LAG")]
    diff: Option<usize>,
    /// Subtract each node's mean (last step).
    #[arg(long)]
    center: bool,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    preprocess: Preprocess,
}

#[derive(Debug, Args)]
struct CoefficientArgs {
    /// JSON file with `alpha`, `beta` and optionally `sigma2` (fit JSON works too).
    #[arg(long, conflicts_with_all = ["alpha", "beta"])]
    coeffs: Option<PathBuf>,
    /// Global alpha per lag, e.g. `0.4,0.15`.
    #[arg(long, requires = "beta")]
    alpha: Option<String>,
    /// Beta per lag, lags separated by `;`, e.g. `0.2,0.1;0.1`.
    #[arg(long, requires = "alpha")]
    beta: Option<String>,
    /// Noise variance; overrides the file value.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Expected order, e.g. `2,[2,1]`; checked against the coefficients.
    #[arg(long)]
    order: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    coefficients: CoefficientArgs,
    /// Number of time steps.
    #[arg(long = "length", short = 'T')]
    length: usize,
    #[arg(long, default_value_t = SimulationConfig::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long)]
    allow_nonstationary: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Global,
    Local,
}

impl From<ModeArg> for AlphaMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Global => AlphaMode::Global,
            ModeArg::Local => AlphaMode::Local,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model order, e.g. `2,[2,1]`.
    #[arg(long)]
    order: String,
    #[arg(long, value_enum, default_value = "global")]
    mode: ModeArg,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    /// Fit JSON produced by `gnar fit`.
    #[arg(long)]
    fit: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    steps: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Nacf,
    Pnacf,
}

impl From<KindArg> for CorrelogramKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Nacf => CorrelogramKind::Nacf,
            KindArg::Pnacf => CorrelogramKind::Pnacf,
        }
    }
}

#[derive(Debug, Args)]
struct CorbitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 20)]
    max_h: usize,
    #[arg(long, default_value_t = 3)]
    max_r: usize,
    #[arg(long, value_enum, default_value = "nacf")]
    kind: KindArg,
    /// SVG path; defaults to the output path with an `.svg` extension.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WagnerArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One-based inclusive time ranges, e.g. `1:100,101:200`.
    #[arg(long)]
    slices: String,
    /// Comma-separated slice names; defaults to the ranges themselves.
    #[arg(long)]
    slice_labels: Option<String>,
    #[arg(long, default_value_t = 10)]
    max_h: usize,
    #[arg(long, default_value_t = 3)]
    max_r: usize,
    #[arg(long, value_enum, default_value = "nacf")]
    kind: KindArg,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RelevanceArg {
    Cumulative,
    SingleStage,
}

#[derive(Debug, Args)]
struct InfluenceArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    network: PathBuf,
    /// Active stage depth; defaults to the largest stage in the fit.
    #[arg(long)]
    r_star: Option<usize>,
    #[arg(long, value_enum, default_value = "cumulative")]
    relevance: RelevanceArg,
    /// Per-node global relevance CSV; defaults to the output path with a `.csv` extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectralArgs {
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    coefficients: CoefficientArgs,
    #[arg(long, default_value_t = DEFAULT_OMEGA_POINTS)]
    omega_points: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Repeatable: `gnar:1,[1]`, `gnar-local:2,[1,1]`, `ar:1` or `zero`.
    #[arg(long = "model", required = true)]
    models: Vec<String>,
    /// One-based predicted time points `t0..t1` (inclusive).
    #[arg(long)]
    windows: String,
}

/// Failures split by who has to act on them.
enum Failure {
    /// Bad input, arguments or environment; exit code 1.
    User(anyhow::Error),
    /// A bug; exit code 2.
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::User(e)
    }
}

impl From<GnarError> for Failure {
    fn from(e: GnarError) -> Self {
        Failure::User(e.into())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| execute(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::User(e))) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Internal(e))) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}

fn execute(cli: &Cli) -> Outcome {
    let ctx = Session { output: cli.output.as_deref(), quiet: cli.quiet };
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(&ctx, cli.seed, args),
        Command::Fit(args) => cmd_fit(&ctx, args),
        Command::Forecast(args) => cmd_forecast(&ctx, args),
        Command::Corbit(args) => cmd_corbit(&ctx, args),
        Command::Wagner(args) => cmd_wagner(&ctx, args),
        Command::Influence(args) => cmd_influence(&ctx, args),
        Command::SpectralVerify(args) => cmd_spectral(&ctx, args),
        Command::Compare(args) => cmd_compare(&ctx, args),
    }
}

struct Session<'a> {
    output: Option<&'a Path>,
    quiet: bool,
}

impl Session<'_> {
    fn note(&self, message: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{message}");
        }
    }

    /// Writes the primary result to `--output`, or to stdout.
    fn emit(&self, bytes: &[u8]) -> Outcome {
        match self.output {
            Some(path) => self.write(path, bytes),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(bytes).and_then(|_| stdout.flush()).context("writing to stdout")?;
                Ok(())
            }
        }
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Outcome {
        io::write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.note(format_args!("wrote {}", path.display()));
        Ok(())
    }

    /// An explicit side-file path, or the output path with another extension.
    fn side_path(&self, explicit: Option<&Path>, extension: &str) -> Option<PathBuf> {
        explicit.map(Path::to_path_buf).or_else(|| self.output.map(|p| p.with_extension(extension)))
    }
}

fn to_json<T: Serialize>(value: &T) -> Outcome<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(internal)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses `p,[s1,...,sp]`, optionally wrapped as `GNAR(...)`.
pub fn parse_order(text: &str) -> anyhow::Result<GnarOrder> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let inner = compact
        .strip_prefix("GNAR(")
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(&compact);
    let (p, rest) = inner
        .split_once(',')
        .ok_or_else(|| anyhow!("order {text:?} should look like 2,[2,1]"))?;
    let p: usize = p.parse().with_context(|| format!("lag count in order {text:?}"))?;
    let list = rest
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| anyhow!("order {text:?} should look like 2,[2,1]"))?;
    let s: Vec<usize> = if list.is_empty() {
        Vec::new()
    } else {
        list.split(',')
            .map(|x| x.parse::<usize>().with_context(|| format!("stage depth {x:?} in order {text:?}")))
            .collect::<anyhow::Result<_>>()?
    };
    if s.len() != p {
        bail!("order {text:?} gives {p} lags but {} stage depths", s.len());
    }
    Ok(GnarOrder::new(s)?)
}

fn parse_numbers(text: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("{what}: {x:?} is not a number")))
        .collect()
}

fn load_coefficients(args: &CoefficientArgs) -> Outcome<GnarCoefficients> {
    let coeffs = match (&args.coeffs, &args.alpha, &args.beta) {
        (Some(path), _, _) => io::load_coefficients(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(alpha), Some(beta)) => {
            let alpha = parse_numbers(alpha, "alpha")?;
            let beta = beta
                .split(';')
                .map(|lag| parse_numbers(lag, "beta"))
                .collect::<anyhow::Result<Vec<_>>>()?;
            GnarCoefficients::new(Alpha::Global(alpha), beta, args.sigma2.unwrap_or(1.0))?
        }
        _ => return Err(anyhow!("give either --coeffs FILE or both --alpha and --beta").into()),
    };
    let coeffs = match args.sigma2 {
        Some(s) => coeffs.with_sigma2(s)?,
        None => coeffs,
    };
    if let Some(order) = &args.order {
        let expected = parse_order(order)?;
        if expected != coeffs.order() {
            return Err(anyhow!("coefficients have order {} but --order says {expected}", coeffs.order()).into());
        }
    }
    Ok(coeffs)
}

fn load_data(args: &DataArgs) -> Outcome<(Dataset, NetworkStructure)> {
    let mut dataset = Dataset::load(&args.network, &args.series).with_context(|| {
        format!("loading {} with network {}", args.series.display(), args.network.display())
    })?;
    let p = &args.preprocess;
    if p.log1p {
        dataset = dataset.apply(Transform::Log1p)?;
    }
    if let Some(lag) = p.diff {
        dataset = dataset.apply(Transform::Difference { lag })?;
    }
    if p.center {
        dataset = dataset.apply(Transform::Center)?;
    }
    let structure = NetworkStructure::new(dataset.network());
    Ok((dataset, structure))
}

fn cmd_simulate(ctx: &Session, seed: u64, args: &SimulateArgs) -> Outcome {
    let network = io::load_network(&args.network).with_context(|| format!("reading {}", args.network.display()))?;
    let structure = NetworkStructure::new(&network);
    let coeffs = load_coefficients(&args.coefficients)?;
    let config = SimulationConfig {
        t: args.length,
        burn_in: args.burn_in,
        seed,
        allow_nonstationary: args.allow_nonstationary,
    };
    let series = simulate(&coeffs, &structure, config)?;
    ctx.emit(io::format_series(&series)?.as_bytes())
}

fn cmd_fit(ctx: &Session, args: &FitArgs) -> Outcome {
    let (dataset, structure) = load_data(&args.data)?;
    let order = parse_order(&args.order)?;
    let fit = fit_least_squares(dataset.series(), &structure, &order, args.mode.into())?;
    ctx.emit(&to_json(&FitRecord::from_fit(&fit))?)
}

fn cmd_forecast(ctx: &Session, args: &ForecastArgs) -> Outcome {
    let (dataset, structure) = load_data(&args.data)?;
    let coeffs = io::load_coefficients(&args.fit).with_context(|| format!("reading {}", args.fit.display()))?;
    let predicted = forecast(&coeffs, dataset.series(), &structure, args.steps)?;
    ctx.emit(io::matrix_csv(dataset.series().labels(), &predicted)?.as_bytes())
}

#[derive(Serialize)]
struct CorbitOutput<'a> {
    provenance: &'a io::Provenance,
    grid: &'a gnar::NacfGrid,
    layout: &'a gnar::CorbitLayout,
}

fn cmd_corbit(ctx: &Session, args: &CorbitArgs) -> Outcome {
    let (dataset, structure) = load_data(&args.data)?;
    let g = grid(dataset.series(), &structure, args.max_h, args.max_r, args.kind.into())?;
    let layout = corbit_layout(&g);
    let json = to_json(&CorbitOutput { provenance: dataset.provenance(), grid: &g, layout: &layout })?;
    ctx.emit(&json)?;
    if let Some(path) = ctx.side_path(args.svg.as_deref(), "svg") {
        ctx.write(&path, svg::render_corbit(&layout).as_bytes())?;
    }
    Ok(())
}

/// Parses `a:b,c:d` (one-based, inclusive) into zero-based half-open ranges.
pub fn parse_slices(text: &str) -> anyhow::Result<Vec<std::ops::Range<usize>>> {
    text.split(',')
        .map(|part| {
            let (a, b) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| anyhow!("slice {part:?} should look like 1:100"))?;
            let a: usize = a.trim().parse().with_context(|| format!("slice start in {part:?}"))?;
            let b: usize = b.trim().parse().with_context(|| format!("slice end in {part:?}"))?;
            if a == 0 || b < a {
                bail!("slice {part:?} must satisfy 1 <= start <= end");
            }
            Ok(a - 1..b)
        })
        .collect()
}

#[derive(Serialize)]
struct WagnerOutput<'a> {
    provenance: &'a io::Provenance,
    grids: &'a [gnar::NacfGrid],
    layout: &'a gnar::WagnerLayout,
}

fn cmd_wagner(ctx: &Session, args: &WagnerArgs) -> Outcome {
    let (dataset, structure) = load_data(&args.data)?;
    let ranges = parse_slices(&args.slices)?;
    let labels: Vec<String> = match &args.slice_labels {
        Some(text) => text.split(',').map(|s| s.trim().to_string()).collect(),
        None => args.slices.split(',').map(|s| s.trim().to_string()).collect(),
    };
    if labels.len() != ranges.len() {
        return Err(anyhow!("{} slice labels for {} slices", labels.len(), ranges.len()).into());
    }
    let named: Vec<_> = labels.into_iter().zip(ranges).collect();
    let slices = time_slices(dataset.series(), &named)?;
    let layout = wagner_layout(&slices, &structure, args.max_h, args.max_r, args.kind.into())?;
    let json = to_json(&WagnerOutput { provenance: dataset.provenance(), grids: &layout.grids, layout: &layout })?;
    ctx.emit(&json)?;
    if let Some(path) = ctx.side_path(args.svg.as_deref(), "svg") {
        ctx.write(&path, svg::render_wagner(&layout).as_bytes())?;
    }
    Ok(())
}

fn csv_bytes<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> Outcome<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(internal)?;
    for row in rows {
        writer.write_record(&row).map_err(internal)?;
    }
    writer.into_inner().map_err(|e| internal(anyhow!("{e}")))
}

fn cmd_influence(ctx: &Session, args: &InfluenceArgs) -> Outcome {
    let network = io::load_network(&args.network).with_context(|| format!("reading {}", args.network.display()))?;
    let structure = NetworkStructure::new(&network);
    let coeffs = io::load_coefficients(&args.fit).with_context(|| format!("reading {}", args.fit.display()))?;
    let r_star = match args.r_star {
        Some(r) => r,
        None => coeffs.order().r_star().max(1),
    };
    let variant = match args.relevance {
        RelevanceArg::Cumulative => RelevanceVariant::Cumulative,
        RelevanceArg::SingleStage => RelevanceVariant::SingleStage,
    };
    let report = influence_report(&coeffs, &structure, r_star, variant)?;
    if !report.empty_boroughs.is_empty() {
        ctx.note(format_args!("nodes with no weighted borough: {}", report.empty_boroughs.join(", ")));
    }
    ctx.emit(&to_json(&report)?)?;
    if let Some(path) = ctx.side_path(args.csv.as_deref(), "csv") {
        let rows = report
            .labels
            .iter()
            .zip(&report.global_relevance)
            .map(|(label, g)| vec![label.clone(), g.to_string()]);
        ctx.write(&path, &csv_bytes(&["node", "global_relevance"], rows)?)?;
    }
    Ok(())
}

fn cmd_spectral(ctx: &Session, args: &SpectralArgs) -> Outcome {
    let network = io::load_network(&args.network).with_context(|| format!("reading {}", args.network.display()))?;
    let structure = NetworkStructure::new(&network);
    let coeffs = load_coefficients(&args.coefficients)?;
    if coeffs.sigma2() <= 0.0 {
        return Err(anyhow!("noise variance must be positive; pass --sigma2").into());
    }
    if args.omega_points == 0 {
        return Err(anyhow!("--omega-points must be at least 1").into());
    }
    let report = verify_conditional_support(&coeffs, &structure, &omega_grid(args.omega_points), args.tol)?;
    if !report.violations.is_empty() {
        ctx.note(format_args!("{} off-support entries exceed the tolerance", report.violations.len()));
    }
    ctx.emit(&to_json(&report)?)
}

/// Parses `gnar:1,[1]`, `gnar-local:2,[1,1]`, `ar:2` or `zero`.
pub fn parse_model(text: &str) -> anyhow::Result<CandidateModel> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("zero") {
        return Ok(CandidateModel::Zero);
    }
    let (kind, spec) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("model {text:?} should be gnar:ORDER, gnar-local:ORDER, ar:P or zero"))?;
    match kind.to_ascii_lowercase().as_str() {
        "gnar" => Ok(CandidateModel::Gnar { order: parse_order(spec)?, mode: AlphaMode::Global }),
        "gnar-local" => Ok(CandidateModel::Gnar { order: parse_order(spec)?, mode: AlphaMode::Local }),
        "ar" => {
            let p: usize = spec.trim().parse().with_context(|| format!("AR order in {text:?}"))?;
            if p == 0 {
                bail!("AR order must be at least 1");
            }
            Ok(CandidateModel::NodeAr { p })
        }
        other => bail!("unknown model family {other:?}"),
    }
}

/// Parses `t0..t1` (inclusive, one-based).
pub fn parse_windows(text: &str) -> anyhow::Result<Vec<usize>> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("windows {text:?} should look like 101..120"))?;
    let a: usize = a.trim().parse().context("window start")?;
    let b: usize = b.trim().parse().context("window end")?;
    if a < 2 || b < a {
        bail!("windows must satisfy 2 <= t0 <= t1");
    }
    Ok((a..=b).collect())
}

fn cmd_compare(ctx: &Session, args: &CompareArgs) -> Outcome {
    let (dataset, structure) = load_data(&args.data)?;
    let models = args.models.iter().map(|m| parse_model(m)).collect::<anyhow::Result<Vec<_>>>()?;
    let cut_points = parse_windows(&args.windows)?;
    let table = rolling_comparison(dataset.series(), &structure, &models, &cut_points)?;

    let summary = csv_bytes(
        &["model", "active_parameters", "mean_spe", "sd_spe"],
        table.rows.iter().map(|row| {
            vec![row.model.clone(), row.active_parameters.to_string(), row.mean.to_string(), row.sd.to_string()]
        }),
    )?;
    let Some(dir) = ctx.output else {
        return ctx.emit(&summary);
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (w, t) in table.cut_points.iter().enumerate() {
        let rows = table
            .rows
            .iter()
            .map(|row| vec![row.model.clone(), row.active_parameters.to_string(), row.spe[w].to_string()]);
        let bytes = csv_bytes(&["model", "active_parameters", "one_step_spe"], rows)?;
        ctx.write(&dir.join(format!("window_{t}.csv")), &bytes)?;
    }
    ctx.write(&dir.join("summary.csv"), &summary)
}
