//! Command-line surface: compute factors over a panel, backtest them,
//! validate against reference output, and generate synthetic datasets.
//!
//! Exit codes: 0 success (possibly with skip warnings), 1 usage error,
//! 2 I/O or parse error, 3 contract violation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use panelfactor::backtest::{run_backtest, StrategyConfig};
use panelfactor::frame::Aggregation;
use panelfactor::ingest;
use panelfactor::mispricing::{self, CoefficientsConfig};
use panelfactor::registry::{ComputeOptions, Extras, FactorResult};
use panelfactor::report::{validate, FactorFile, ValidationReport};
use panelfactor::synth::{generate_index, generate_panel, SynthConfig};
use panelfactor::{ColumnSchema, DateTable, Error, PanelFrame};

#[derive(Parser)]
#[command(name = "panelfactor", version, about = "Cross-sectional factor computation over point-in-time panel data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute factors over a panel and write a factor file.
    Compute(ComputeArgs),
    /// Backtest factors from a factor file against a returns panel.
    Backtest(BacktestArgs),
    /// Compare two factor files by per-factor Pearson correlation.
    Validate(ValidateArgs),
    /// Generate a seeded synthetic panel (plus index / schema / coefficient
    /// files) for experiments and tests.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ComputeArgs {
    /// Input panel: .csv (requires --schema) or the binary panel format.
    #[arg(long)]
    input: PathBuf,
    /// Column schema (TOML/JSON) mapping source names to canonical names.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Output factor file (CSV). A `<output>.warnings.json` sidecar lists
    /// skipped factors.
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated factor names; all registered factors when omitted.
    #[arg(long, value_delimiter = ',')]
    factors: Option<Vec<String>>,
    /// Auxiliary table as NAME=PATH (repeatable); the distress factor needs
    /// `index=<csv with date,ret,total_mv>`.
    #[arg(long, value_name = "NAME=PATH")]
    aux: Vec<String>,
    /// Coefficient configuration (TOML/JSON with [oscore] / [distress]).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resample the input to this frequency (last observation per period)
    /// before computing.
    #[arg(long, value_enum)]
    resample: Option<FrequencyArg>,
    /// Global accounting-availability lag in months: accounting columns are
    /// shifted to the value known this many months earlier.
    #[arg(long, default_value_t = 0)]
    accounting_lag: u32,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FrequencyArg {
    Daily,
    Monthly,
    Quarterly,
    Annual,
}

impl From<FrequencyArg> for panelfactor::date::Frequency {
    fn from(f: FrequencyArg) -> Self {
        match f {
            FrequencyArg::Daily => Self::Daily,
            FrequencyArg::Monthly => Self::Monthly,
            FrequencyArg::Quarterly => Self::Quarterly,
            FrequencyArg::Annual => Self::Annual,
        }
    }
}

#[derive(Args)]
struct BacktestArgs {
    /// Factor file produced by `compute`.
    #[arg(long)]
    factor_file: PathBuf,
    /// Returns panel (same formats as `compute --input`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Output directory for per-factor metrics/equity files and the
    /// leaderboard.
    #[arg(long)]
    output: PathBuf,
    /// Strategy configuration (TOML/JSON); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Subset of factors to backtest (default: every factor in the file).
    #[arg(long, value_delimiter = ',')]
    factors: Option<Vec<String>>,
    /// Leaderboard size.
    #[arg(long, default_value_t = 5)]
    top: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Factor file under test.
    #[arg(long)]
    ours: PathBuf,
    /// Reference factor file.
    #[arg(long)]
    reference: PathBuf,
    /// Optional JSON report path.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output panel: .csv or the binary panel format (by extension).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 100)]
    assets: usize,
    #[arg(long, default_value_t = 120)]
    months: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write the matching market-index table (CSV).
    #[arg(long)]
    index: Option<PathBuf>,
    /// Also write an identity column schema for the generated panel.
    #[arg(long)]
    schema_out: Option<PathBuf>,
    /// Also write the default factor coefficients.
    #[arg(long)]
    coeffs_out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownFactor(_) | Error::Param(_) | Error::DuplicateFactor(_) => 1,
        Error::Io { .. } | Error::Parse { .. } | Error::Schema(_) => 2,
        Error::Integrity(_) | Error::Contract(_) | Error::Definition { .. }
        | Error::EmptyUniverse => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Compute(args) => compute(args),
        Command::Backtest(args) => backtest(args),
        Command::Validate(args) => validate_cmd(args),
        Command::Synth(args) => synth(args),
    }
}

fn load_panel(input: &Path, schema: Option<&PathBuf>) -> Result<PanelFrame, Error> {
    let schema = match schema {
        Some(path) => Some(ColumnSchema::from_path(path)?),
        None => None,
    };
    ingest::load_panel(input, schema.as_ref())
}

fn parse_aux(specs: &[String]) -> Result<Extras, Error> {
    let mut extras = Extras::new();
    for spec in specs {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Param(format!("--aux expects NAME=PATH, got `{spec}`")))?;
        extras.insert(name.to_string(), DateTable::from_csv(path)?);
    }
    Ok(extras)
}

fn compute(args: ComputeArgs) -> Result<(), Error> {
    let mut frame = load_panel(&args.input, args.schema.as_ref())?;
    if let Some(freq) = args.resample {
        frame = frame.resample(freq.into(), Aggregation::Last)?;
    }
    if args.accounting_lag > 0 {
        frame = mispricing::apply_accounting_lag(&frame, args.accounting_lag)?;
    }

    let coeffs = match &args.config {
        Some(path) => CoefficientsConfig::from_path(path)?,
        None => CoefficientsConfig::default(),
    };
    let registry = mispricing::registry(&coeffs)?;
    let opts = ComputeOptions { params: BTreeMap::new(), extras: parse_aux(&args.aux)? };
    let output = registry.compute(&frame, args.factors.as_deref(), &opts)?;

    for warning in &output.warnings {
        eprintln!(
            "warning: skipped factor `{}` (missing: {})",
            warning.factor,
            warning
                .missing_columns
                .iter()
                .chain(warning.missing_inputs.iter())
                .cloned()
                .collect::<Vec<_>>()
                .join(", ")
        );
    }

    let file = FactorFile::from_frame(&output.frame, &output.computed)?;
    file.write(&args.output)?;
    let sidecar = args.output.with_extension(format!(
        "{}warnings.json",
        args.output
            .extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    write_json(&sidecar, &output.warnings)?;
    println!(
        "computed {} factor(s) over {} rows ({} skipped) -> {}",
        output.computed.len(),
        output.frame.n_rows(),
        output.warnings.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct LeaderboardRow {
    factor: String,
    sharpe: Option<f64>,
    total_return: Option<f64>,
    annualized_return: Option<f64>,
    annualized_volatility: Option<f64>,
    max_drawdown: Option<f64>,
    final_capital: f64,
}

fn backtest(args: BacktestArgs) -> Result<(), Error> {
    let frame = load_panel(&args.input, args.schema.as_ref())?;
    let file = FactorFile::read(&args.factor_file)?;
    let base = match &args.config {
        Some(path) => StrategyConfig::from_path(path)?,
        None => StrategyConfig::new(""),
    };

    let available: Vec<String> = file.factors().iter().map(|f| f.to_string()).collect();
    let selected: Vec<String> = match &args.factors {
        Some(names) => {
            for name in names {
                if !available.contains(name) {
                    return Err(Error::UnknownFactor(name.clone()));
                }
            }
            names.clone()
        }
        None => available,
    };
    if selected.is_empty() {
        return Err(Error::EmptyUniverse);
    }

    std::fs::create_dir_all(&args.output).map_err(|e| Error::io(&args.output, e))?;
    let mut rows: Vec<LeaderboardRow> = Vec::new();
    for factor in &selected {
        let entries: Vec<_> = file
            .entries()
            .iter()
            .filter(|e| &e.factor == factor)
            .map(|e| (e.id.clone(), e.date, e.value))
            .collect();
        let result = FactorResult::from_rows(factor.clone(), entries)?;
        let joined = panelfactor::registry::join_factor(&frame, &result)?;

        let mut config = base.clone();
        config.factor = factor.clone();
        let (curve, report) = run_backtest(&joined, &config)?;

        std::fs::write(
            args.output.join(format!("{factor}_equity.csv")),
            curve.to_csv(),
        )
        .map_err(|e| Error::io(&args.output, e))?;
        write_json(&args.output.join(format!("{factor}_metrics.json")), &report)?;
        rows.push(LeaderboardRow {
            factor: factor.clone(),
            sharpe: report.sharpe,
            total_return: report.total_return,
            annualized_return: report.annualized_return,
            annualized_volatility: report.annualized_volatility,
            max_drawdown: report.max_drawdown,
            final_capital: report.final_capital,
        });
    }

    // Sharpe leaderboard, best first; factors without a Sharpe rank last.
    rows.sort_by(|a, b| {
        match (b.sharpe, a.sharpe) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Greater,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.factor.cmp(&b.factor))
    });
    rows.truncate(args.top);
    write_json(&args.output.join("leaderboard.json"), &rows)?;

    println!("{:<28} {:>10}", "Factor", "Sharpe");
    for row in &rows {
        match row.sharpe {
            Some(s) => println!("{:<28} {:>10.4}", row.factor, s),
            None => println!("{:<28} {:>10}", row.factor, "n/a"),
        }
    }
    Ok(())
}

fn validate_cmd(args: ValidateArgs) -> Result<(), Error> {
    let ours = FactorFile::read(&args.ours)?;
    let reference = FactorFile::read(&args.reference)?;
    let report: ValidationReport = validate(&ours, &reference);
    print!("{}", report.table());
    if let Some(path) = &args.output {
        write_json(path, &report)?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Error> {
    let cfg = SynthConfig {
        assets: args.assets,
        months: args.months,
        seed: args.seed,
        ..Default::default()
    };
    let panel = generate_panel(&cfg);
    if args.output.extension().and_then(|e| e.to_str()) == Some("csv") {
        ingest::write_csv_panel(&panel, &args.output)?;
    } else {
        ingest::write_binary_panel(&panel, &args.output)?;
    }
    if let Some(path) = &args.index {
        generate_index(&cfg).write_csv(path)?;
    }
    if let Some(path) = &args.schema_out {
        let schema = ColumnSchema::identity(panelfactor::synth::SYNTH_COLUMNS);
        std::fs::write(path, schema.to_toml()).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &args.coeffs_out {
        std::fs::write(path, CoefficientsConfig::default_full().to_toml())
            .map_err(|e| Error::io(path, e))?;
    }
    println!(
        "generated {} assets x {} months ({} rows) -> {}",
        cfg.assets,
        cfg.months,
        panel.n_rows(),
        args.output.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse { location: path.display().to_string(), message: e.to_string() })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
