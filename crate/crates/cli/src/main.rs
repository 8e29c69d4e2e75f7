use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use enose_core::pipeline::{self, PipelineConfig, PipelineError};
use enose_core::synthgen::{scenarios, ScenarioSpec};
use enose_core::{NormalizationMethod, ReduceMethod, SamplingSpec};

/// Electronic-nose quality classification pipeline.
#[derive(Parser, Debug)]
#[command(name = "enose", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline on a capture CSV and write every report and plot.
    Run(RunArgs),
    /// Generate a synthetic capture CSV from a scenario.
    Simulate(SimulateArgs),
    /// Re-render pareto.svg and scatter.svg from a previous run's output.
    Render(RenderArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Normalize {
    PowerAverage,
    Fft,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Reduce {
    BlockMean,
    TakeEveryKth,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Default,
    Drift,
    Separated,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Capture CSV (label,trial,sample_index,s1..s6)
    #[arg(short, long)]
    input: PathBuf,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "fft")]
    normalize: Normalize,
    /// Principal components used for clustering
    #[arg(short = 'k', long, default_value_t = 2)]
    components: usize,
    /// Skip mean-centering before the covariance
    #[arg(long)]
    no_center: bool,
    #[arg(long, default_value_t = 2.0)]
    outlier_multiplier: f64,
    #[arg(long, default_value_t = 2.0)]
    prune_ratio: f64,
    #[arg(long, value_enum, default_value = "block-mean")]
    reduce: Reduce,
    /// 1-based sensor numbers to drop, comma separated (e.g. 6 or 1,6)
    #[arg(long, value_delimiter = ',')]
    drop_sensors: Vec<usize>,
    #[arg(long, default_value_t = 3.0)]
    sample_rate: f64,
    #[arg(long, default_value_t = 60)]
    raw_samples: usize,
    #[arg(long, default_value_t = 20)]
    reduced_samples: usize,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    /// Scenario JSON; a bundled preset is used when omitted
    #[arg(short, long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default", conflicts_with = "scenario")]
    preset: Preset,
    /// Output CSV path
    #[arg(short, long)]
    out: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override trials per class
    #[arg(long)]
    trials: Option<u32>,
}

#[derive(clap::Args, Debug)]
struct RenderArgs {
    /// Directory holding eigen.json and scores.csv
    #[arg(long)]
    from: PathBuf,
    /// Where to write the SVGs (defaults to --from)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn run(args: RunArgs) -> Result<(), PipelineError> {
    let config = PipelineConfig {
        normalization: match args.normalize {
            Normalize::PowerAverage => NormalizationMethod::PowerAverage,
            Normalize::Fft => NormalizationMethod::Fft,
        },
        components_k: args.components,
        center: !args.no_center,
        outlier_multiplier: args.outlier_multiplier,
        prune_ratio: args.prune_ratio,
        reduce: match args.reduce {
            Reduce::BlockMean => ReduceMethod::BlockMean,
            Reduce::TakeEveryKth => ReduceMethod::TakeEveryKth,
        },
        drop_sensors: args.drop_sensors,
        sampling: SamplingSpec {
            sample_rate_hz: args.sample_rate,
            raw_samples_per_trial: args.raw_samples,
            reduced_samples_per_trial: args.reduced_samples,
        },
    };
    for s in pipeline::run(&config, &args.input, &args.out)? {
        let pcs: Vec<String> = s.variance_explained.iter().map(|v| format!("{:.1}%", 100.0 * v)).collect();
        println!(
            "{}: misassigned {:.2}%, variance explained [{}], prune candidates {:?}",
            s.dir.display(),
            s.total_misassigned_percent,
            pcs.join(", "),
            s.removed_sensors
        );
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), PipelineError> {
    let mut scenario = match &args.scenario {
        Some(path) => pipeline::load_scenario(path)?,
        None => ScenarioSpec::from_json(match args.preset {
            Preset::Default => scenarios::DEFAULT,
            Preset::Drift => scenarios::DRIFT,
            Preset::Separated => scenarios::SEPARATED,
        })?,
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(trials) = args.trials {
        scenario.trials_per_class = trials;
    }
    let (trials, clamped) = pipeline::simulate(&scenario, &args.out)?;
    println!("wrote {trials} trials to {}", args.out.display());
    if clamped > 0 {
        eprintln!("warning: {clamped} negative samples clamped to 0");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Simulate(args) => simulate(args),
        Command::Render(args) => {
            let out = args.out.clone().unwrap_or_else(|| args.from.clone());
            pipeline::render_from_artifacts(&args.from, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
