use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use policyscope::interpret::{InterpretConfig, PolicyInterpretation, DEFAULT_BINS};
use policyscope::metrics::{self, Binning, Discretizer, SweepGrid};
use policyscope::synth::{self, Controller, NeuronSpec, PendulumParams};
use policyscope::{load_dataset, DataFormat, Notation, TrajectoryDataset, TreeConfig};

const THREADS_VAR: &str = "POLICYSCOPE_THREADS";

/// Interpret neuron activations of a control policy as logic programs over
/// the state, and score how well the interpretation holds up.
#[derive(Parser, Debug)]
#[command(name = "policyscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate pendulum trajectories with synthetic neuron responses
    Synth(SynthArgs),
    /// Fit per-neuron interpreters and write the program table
    Interpret(InterpretArgs),
    /// Compute interpretability metrics, optionally over a hyperparameter grid
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neuron specs: theta, theta_dot, sum, diff, quadrant, sign:<dim>:<c>,
    /// affine:<w0>:<w1>:<b>, const:<v>, noisy:<sigma>:<spec>
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "quadrant,theta,theta_dot"
    )]
    neurons: Vec<NeuronSpec>,
    /// energy_pd, random or zero
    #[arg(long, default_value = "energy_pd")]
    controller: Controller,
    /// Dataset path: a JSON file, or a directory with --format csv-dir
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value = "json")]
    format: DataFormat,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Dataset path: a JSON file or a CSV directory
    #[arg(long, short)]
    input: PathBuf,
    /// json or csv-dir
    #[arg(long, default_value = "json")]
    format: DataFormat,
    /// Neurons to interpret, by index or label (default: all)
    #[arg(long, value_delimiter = ',')]
    neurons: Option<Vec<String>>,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<(TrajectoryDataset, Vec<usize>)> {
        let ds = load_dataset(&self.input, self.format)?;
        let neurons = match &self.neurons {
            Some(tokens) => tokens
                .iter()
                .map(|t| ds.resolve_neuron(t.trim()))
                .collect::<policyscope::Result<_>>()?,
            None => (0..ds.n_neurons()).collect(),
        };
        Ok((ds, neurons))
    }
}

#[derive(Args, Debug)]
struct TreeArgs {
    /// Response tree depth
    #[arg(long, default_value_t = TreeConfig::surrogate().max_depth)]
    max_depth: usize,
    /// Response tree minimum leaf size, as a fraction of rows
    #[arg(long, default_value_t = TreeConfig::surrogate().min_leaf_fraction)]
    min_leaf: f64,
    /// Response tree cost-complexity pruning strength
    #[arg(long, default_value_t = TreeConfig::surrogate().ccp_alpha)]
    ccp: f64,
    /// Path classifier depth
    #[arg(long, default_value_t = TreeConfig::path_classifier().max_depth)]
    classifier_max_depth: usize,
    /// Path classifier minimum leaf size, as a fraction of rows
    #[arg(long, default_value_t = TreeConfig::path_classifier().min_leaf_fraction)]
    classifier_min_leaf: f64,
    /// Path classifier cost-complexity pruning strength
    #[arg(long, default_value_t = TreeConfig::path_classifier().ccp_alpha)]
    classifier_ccp: f64,
}

impl TreeArgs {
    fn config(&self, n_bins: usize) -> InterpretConfig {
        InterpretConfig {
            surrogate: TreeConfig {
                max_depth: self.max_depth,
                min_leaf_fraction: self.min_leaf,
                ccp_alpha: self.ccp,
                ..TreeConfig::surrogate()
            },
            classifier: TreeConfig {
                max_depth: self.classifier_max_depth,
                min_leaf_fraction: self.classifier_min_leaf,
                ccp_alpha: self.classifier_ccp,
                ..TreeConfig::path_classifier()
            },
            n_bins,
        }
    }
}

#[derive(Args, Debug)]
struct InterpretArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    trees: TreeArgs,
    /// Directory receiving interpretation.json and programs.md
    #[arg(long)]
    out_dir: PathBuf,
    /// Program notation in programs.md: table, unicode or ascii
    #[arg(long, default_value = "table")]
    notation: Notation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportFormat {
    Json,
    Markdown,
    Csv,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    trees: TreeArgs,
    /// Reuse a saved interpretation instead of fitting one
    #[arg(long, conflicts_with = "sweep")]
    interpretation: Option<PathBuf>,
    /// Response bins for the information metrics
    #[arg(long, default_value_t = DEFAULT_BINS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    bins: u64,
    /// equal_width or quantile
    #[arg(long, default_value = "equal_width")]
    binning: Binning,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,
    /// Grid over the response tree, e.g. `ccp=0.001,0.003,0.01 leaf=0.01,0.1,0.2`
    #[arg(long, num_args = 1..=2, value_name = "KEY=VALUES")]
    sweep: Option<Vec<String>>,
    /// Report path (default: stdout)
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// A problem with the invocation itself rather than with the data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_grid(tokens: &[String]) -> anyhow::Result<SweepGrid> {
    let mut grid = SweepGrid::default();
    for token in tokens {
        let (key, values) = token
            .split_once('=')
            .ok_or_else(|| usage(format!("sweep axis `{token}` is not KEY=VALUES")))?;
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(format!("sweep axis `{key}`: {e}")))?;
        match key {
            "ccp" | "ccp_alpha" => grid.ccp_alpha = values,
            "leaf" | "min_leaf" | "min_leaf_fraction" => grid.min_leaf_fraction = values,
            other => {
                return Err(usage(format!(
                    "unknown sweep axis `{other}` (expected ccp or leaf)"
                )))
            }
        }
    }
    Ok(grid)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(output: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => write_file(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let states = synth::generate_pendulum(
        &PendulumParams::default(),
        args.controller,
        args.episodes as usize,
        args.horizon as usize,
        args.seed,
    )?;
    let ds = synth::attach_neurons(&states, &args.neurons, args.seed)?;
    match args.format {
        DataFormat::Json => write_file(&args.output, &ds.to_json_string())?,
        DataFormat::CsvDir => ds.save_csv_dir(&args.output)?,
    }
    log::info!(
        "wrote {} rows, {} neurons to {}",
        ds.n_rows(),
        ds.n_neurons(),
        args.output.display()
    );
    Ok(())
}

fn cmd_interpret(args: &InterpretArgs) -> anyhow::Result<()> {
    let (ds, neurons) = args.input.load()?;
    let cfg = args.trees.config(DEFAULT_BINS);
    let pi = PolicyInterpretation::build(&ds, &neurons, &cfg)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    write_file(
        &args.out_dir.join("interpretation.json"),
        &pi.to_json_string(),
    )?;
    write_file(
        &args.out_dir.join("programs.md"),
        &pi.program_table(args.notation),
    )?;
    log::info!(
        "interpreted {} neurons into {}",
        neurons.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> anyhow::Result<()> {
    let (ds, neurons) = args.input.load()?;
    let cfg = args.trees.config(args.bins as usize);

    if let Some(tokens) = &args.sweep {
        let grid = parse_grid(tokens)?;
        let rows = metrics::hyperparameter_sweep(&ds, &neurons, &cfg, &grid, args.binning)?;
        let text = match args.report {
            ReportFormat::Csv => metrics::sweep_csv(&rows),
            ReportFormat::Markdown => metrics::sweep_markdown(&rows),
            ReportFormat::Json => serde_json::to_string_pretty(&rows)? + "\n",
        };
        return emit(args.output.as_deref(), &text);
    }

    let pi = match &args.interpretation {
        Some(path) => {
            if args.input.neurons.is_some() {
                bail!(usage("--neurons cannot be combined with --interpretation"));
            }
            PolicyInterpretation::load(path)?
        }
        None => PolicyInterpretation::build(&ds, &neurons, &cfg)?,
    };
    let view = ds.flatten();
    let disc = Discretizer::fit(&view.responses, args.bins as usize, args.binning)?;
    let report = metrics::evaluate_view(&view, &pi, &disc)?;
    let text = match args.report {
        ReportFormat::Json => report.to_json_string() + "\n",
        ReportFormat::Markdown => report.to_markdown(),
        ReportFormat::Csv => report.to_csv(),
    };
    emit(args.output.as_deref(), &text)
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            usage(format!(
                "{THREADS_VAR} must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Interpret(args) => cmd_interpret(args),
        Command::Metrics(args) => cmd_metrics(args),
    }
}

/// 1 for usage errors, 2 for data, schema and I/O errors, 3 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    if let Some(e) = err.downcast_ref::<policyscope::Error>() {
        return match e {
            policyscope::Error::Config(_) => 1,
            e if e.is_data_error() => 2,
            _ => 3,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some()
        || err.downcast_ref::<serde_json::Error>().is_some()
    {
        return 2;
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
