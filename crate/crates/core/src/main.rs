use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uplink_train::experiment::{
    emit_plot, run_optimum, run_sweep, ExperimentError, ExperimentSpec, PlotKind, RunOutcome,
};

/// Training-length experiments for the multi-cell uplink with compressed backhaul.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Net rate at a fixed training length over an SNR, τ or backhaul sweep.
    Sweep(RunArgs),
    /// Optimal training length over an SNR or backhaul sweep.
    Optimize(RunArgs),
    /// Draw result CSV files as an SVG line plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment description.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: fig3, fig4, fig5, fig6 or topt-snr.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo samples per point.
    #[arg(long)]
    samples: Option<usize>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// CSV files, one curve each.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "rate")]
    kind: Kind,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rate,
    Tau,
}

fn load_spec(args: &RunArgs) -> Result<ExperimentSpec, ExperimentError> {
    let mut spec = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentSpec::from_toml(&text, &path.display().to_string())?
        }
        (None, Some(name)) => ExperimentSpec::preset(name)?,
        (None, None) => unreachable!("clap requires one of --config, --preset"),
    };
    if let Some(seed) = args.seed {
        spec.mc.seed = seed;
    }
    if let Some(n) = args.samples {
        spec.mc.samples = n;
    }
    if let Some(out) = &args.out {
        spec.output.prefix = out.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn run(
    args: &RunArgs,
    runner: fn(&ExperimentSpec) -> Result<RunOutcome, ExperimentError>,
) -> Result<i32, ExperimentError> {
    let spec = load_spec(args)?;
    let outcome = match args.workers {
        Some(0) => {
            return Err(ExperimentError::Invalid {
                field: "--workers".into(),
                reason: "must be at least 1".into(),
            })
        }
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ExperimentError::Invalid {
                field: "--workers".into(),
                reason: e.to_string(),
            })?
            .install(|| runner(&spec))?,
        None => runner(&spec)?,
    };
    print!("{}", outcome.summary);
    if outcome.failed_rows > 0 {
        eprintln!(
            "error: {} of {} rows failed",
            outcome.failed_rows, outcome.rows
        );
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Sweep(args) => run(args, run_sweep),
        Command::Optimize(args) => run(args, run_optimum),
        Command::Plot(args) => {
            let inputs: Vec<&Path> = args.inputs.iter().map(PathBuf::as_path).collect();
            let kind = match args.kind {
                Kind::Rate => PlotKind::Rate,
                Kind::Tau => PlotKind::Tau,
            };
            emit_plot(&inputs, kind, &args.out).map(|()| {
                println!("wrote {}", args.out.display());
                0
            })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
