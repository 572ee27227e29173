use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use fock_tomography::budget::{combine, format_factors, parse_factors, reference_factors, BudgetResult};
use fock_tomography::dataset::Dataset;
use fock_tomography::pipeline::{check_version, reconstruct, ReconstructionConfig, RunReport, REPORT_FORMAT_VERSION};
use fock_tomography::reconstruction::{EfficiencyMethod, StderrMethod};
use fock_tomography::simulator::{generate_run, DetectorModel, RunSpec};
use fock_tomography::Error;

const BUDGET_FORMAT_VERSION: u32 = 1;
const CONFIG_ENV: &str = "FOCK_TOMO_CONFIG";

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "fock-tomo",
    version,
    about = "Simulate and reconstruct phase-randomized homodyne data of a single-photon state",
    args_override_self = true,
    after_help = "Default values for any flag may be supplied by a key=value file (one `flag-name=value` per line) \
named by the FOCK_TOMO_CONFIG environment variable or --config. Flags given on the command line take precedence.\n\n\
Exit status: 0 success, 2 usage, 3 invalid input, 4 numerical failure, 5 I/O failure."
)]
struct Cli {
    /// key=value file of default flag values.
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset (vacuum calibration run followed by the signal run).
    Simulate(SimulateArgs),
    /// Calibrate, fit, sample diagonals and Abel-invert a dataset.
    Reconstruct(ReconstructArgs),
    /// Combine an efficiency budget.
    Budget(BudgetArgs),
    /// Merge a reconstruction report with a budget and check their agreement.
    Report(ReportArgs),
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    /// Efficiency of the simulated state.
    #[arg(long, default_value_t = 0.553)]
    eta: f64,
    #[arg(long, default_value_t = 200_000)]
    n_vacuum: usize,
    #[arg(long, default_value_t = 12_000)]
    n_fock: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Raw units per dimensionless quadrature unit.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Raw value of the quadrature origin.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    offset: f64,
    /// Fraction of signal-run samples replaced by vacuum (false triggers).
    #[arg(long, default_value_t = 0.0)]
    dark_fraction: f64,
    /// Dataset file; standard output if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FitMethod {
    Mle,
    Hist,
}

#[derive(clap::Args, Debug)]
struct ReconstructArgs {
    /// Dataset written by `simulate`.
    input: PathBuf,
    /// Multiplier on the Silverman kernel bandwidth.
    #[arg(long, default_value_t = 1.0)]
    bandwidth_scale: f64,
    #[arg(long, value_enum, default_value_t = FitMethod::Mle)]
    fit_method: FitMethod,
    /// Half-width of the smoothed marginal grid.
    #[arg(long, default_value_t = 6.0)]
    grid_max: f64,
    #[arg(long, default_value_t = 2001)]
    grid_points: usize,
    /// Bootstrap resamples for W(R) and efficiency errors; 0 disables.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    bootstrap_seed: u64,
    /// Output directory for report.txt, report.json, wigner.tsv and histogram.tsv.
    #[arg(short, long, default_value = "reconstruction")]
    output: PathBuf,
}

#[derive(clap::Args, Debug)]
struct BudgetArgs {
    /// Factor file (`name value uncertainty kind` per line); the reference budget if omitted.
    #[arg(long)]
    factors: Option<PathBuf>,
    /// JSON output file; key=value goes to standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    /// report.json written by `reconstruct`.
    #[arg(long)]
    reconstruction: PathBuf,
    /// JSON written by `budget -o`; the budget section is marked absent if omitted.
    #[arg(long)]
    budget: Option<PathBuf>,
    /// Output directory for the merged report.txt and report.json.
    #[arg(short, long, default_value = "report")]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match parse_with_config(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::NonConvergence { .. } | Error::Degenerate(_) => EXIT_NUMERICAL,
                Error::Io(_) => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

/// Parses the command line, then re-parses with defaults from the config
/// file inserted ahead of the user's own flags.
fn parse_with_config(args: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let first = Cli::try_parse_from(&args)?;
    let Some(path) = first.config.as_deref() else {
        return Ok(first);
    };
    let sub = match &first.command {
        Command::Simulate(_) => "simulate",
        Command::Reconstruct(_) => "reconstruct",
        Command::Budget(_) => "budget",
        Command::Report(_) => "report",
    };
    let injected = config_args(path, sub).map_err(|e| Cli::command().error(clap::error::ErrorKind::InvalidValue, e))?;
    let position = args
        .iter()
        .position(|a| a == sub)
        .expect("subcommand present after a successful parse");
    let mut merged = args[..=position].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&args[position + 1..]);
    Cli::try_parse_from(merged)
}

fn config_args(path: &Path, sub: &str) -> std::result::Result<Vec<OsString>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let command = Cli::command();
    let known: Vec<String> = command
        .get_subcommands()
        .flat_map(|s| s.get_arguments().filter_map(|a| a.get_long()).map(str::to_string))
        .collect();
    let accepted: Vec<String> = command
        .find_subcommand(sub)
        .expect("subcommand exists")
        .get_arguments()
        .filter_map(|a| a.get_long())
        .map(str::to_string)
        .collect();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        let key = key.trim().replace('_', "-");
        if !known.contains(&key) {
            return Err(format!("config line {}: unknown key `{key}`", i + 1));
        }
        if accepted.contains(&key) {
            out.push(OsString::from(format!("--{key}={}", value.trim())));
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Reconstruct(args) => reconstruct_cmd(args),
        Command::Budget(args) => budget(args),
        Command::Report(args) => report(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = RunSpec {
        eta_true: args.eta,
        n_vacuum: args.n_vacuum,
        n_fock: args.n_fock,
        detector: DetectorModel::new(args.scale, args.offset, args.dark_fraction)?,
        seed: args.seed,
    };
    let dataset = generate_run(&spec)?;
    let mut buf = Vec::new();
    dataset.write_to(&mut buf)?;
    match &args.output {
        Some(path) => fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn reconstruct_cmd(args: ReconstructArgs) -> Result<()> {
    let file = fs::File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let dataset =
        Dataset::read_from(BufReader::new(file)).with_context(|| format!("reading {}", args.input.display()))?;

    let mut config = ReconstructionConfig::default();
    config.smoothing.bandwidth_scale = args.bandwidth_scale;
    config.smoothing.grid_max = args.grid_max;
    config.smoothing.grid_points = args.grid_points;
    config.efficiency.method = match args.fit_method {
        FitMethod::Mle => EfficiencyMethod::MaximumLikelihood,
        FitMethod::Hist => EfficiencyMethod::HistogramLeastSquares,
    };
    if args.bootstrap > 0 {
        config.bootstrap_resamples = args.bootstrap;
        config.bootstrap_seed = args.bootstrap_seed;
        config.efficiency.stderr = StderrMethod::Bootstrap {
            resamples: args.bootstrap,
            seed: args.bootstrap_seed,
        };
    }

    let result = reconstruct(&dataset, &config)?;
    let report = &result.report;
    let metadata = [
        ("tool_version", report.provenance.tool_version.clone()),
        ("dataset_seed", report.provenance.dataset_seed.to_string()),
        ("eta_hat", report.efficiency_fit.eta_hat.to_string()),
        ("bandwidth", report.abel_origin.bandwidth.to_string()),
        ("grid_max", config.smoothing.grid_max.to_string()),
        ("grid_points", config.smoothing.grid_points.to_string()),
        ("config_digest", report.provenance.config_digest.clone()),
    ];
    let mut wigner = Vec::new();
    result.profile.write_table(&mut wigner, &metadata)?;
    let mut histogram = Vec::new();
    result.histogram.write_table(&mut histogram, &metadata)?;

    write_outputs(
        &args.output,
        &[
            ("report.txt", with_timestamp(report.to_key_values()).into_bytes()),
            ("report.json", report.to_json().into_bytes()),
            ("wigner.tsv", wigner),
            ("histogram.tsv", histogram),
        ],
    )?;
    print!("{}", report.to_key_values());
    Ok(())
}

fn budget(args: BudgetArgs) -> Result<()> {
    let factors = match &args.factors {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_factors(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => reference_factors(),
    };
    let result = combine(&factors)?;
    if let Some(path) = &args.output {
        let doc = serde_json::json!({
            "format_version": BUDGET_FORMAT_VERSION,
            "budget": result,
        });
        let text = serde_json::to_string_pretty(&doc)? + "\n";
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", format_factors(&result.factors));
    println!("eta_predicted={}", result.eta_predicted);
    println!("eta_uncertainty={}", result.eta_uncertainty);
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.reconstruction)
        .with_context(|| format!("reading {}", args.reconstruction.display()))?;
    let mut report =
        RunReport::from_json(&text).with_context(|| format!("loading {}", args.reconstruction.display()))?;
    if let Some(path) = &args.budget {
        let budget = read_budget(path).with_context(|| format!("loading {}", path.display()))?;
        report.attach_budget(budget);
    }
    debug_assert_eq!(report.format_version, REPORT_FORMAT_VERSION);
    write_outputs(
        &args.output,
        &[
            ("report.txt", with_timestamp(report.to_key_values()).into_bytes()),
            ("report.json", report.to_json().into_bytes()),
        ],
    )?;
    print!("{}", report.to_key_values());
    Ok(())
}

fn read_budget(path: &Path) -> Result<BudgetResult> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("budget is not valid JSON: {e}")))?;
    check_version(&value, BUDGET_FORMAT_VERSION)?;
    let budget = value
        .get("budget")
        .cloned()
        .ok_or_else(|| anyhow!(Error::InvalidInput("budget document has no `budget` field".into())))?;
    Ok(serde_json::from_value(budget).map_err(|e| Error::InvalidInput(format!("malformed budget: {e}")))?)
}

/// Prepends the wall-clock provenance line, kept apart from the
/// deterministic body.
fn with_timestamp(body: String) -> String {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("# generated_at_unix={now}\n{body}")
}

/// Writes every file or none: all contents are rendered before this is
/// called, and files land under temporary names that are renamed at the end.
fn write_outputs(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!(Error::InvalidInput(format!(
            "{} exists and is not a directory",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let staged: Vec<(PathBuf, PathBuf)> = files
        .iter()
        .map(|(name, _)| (dir.join(format!(".{name}.partial")), dir.join(name)))
        .collect();
    for ((tmp, _), (_, bytes)) in staged.iter().zip(files) {
        if let Err(e) = fs::write(tmp, bytes) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
    }
    for (tmp, target) in &staged {
        fs::rename(tmp, target).with_context(|| format!("writing {}", target.display()))?;
    }
    Ok(())
}
