//! Batch CLI for the two-stage trip purpose and socio-economic inference
//! pipeline.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use transit_inference::pipeline::{self, RunConfig};
use transit_inference::synth::{self, SynthConfig};
use transit_inference::Error as CoreError;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

/// Config file layout: the pipeline configuration plus a [synth] section
/// used by the `synth` subcommand.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ConfigFile {
    #[serde(flatten)]
    run: RunConfig,
    synth: SynthConfig,
}

#[derive(Parser)]
#[command(
    name = "transit-inference",
    about = "Infer trip purposes and socio-economic attributes of transit riders",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    /// TOML configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores). Results are thread-count
    /// invariant.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    /// Print the full default configuration as TOML and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset (rides, survey, POI, rasters,
    /// hidden truth).
    Synth(SynthArgs),
    /// Parse and validate rides, merge transfers into trips.
    Ingest,
    /// Detect home/work anchor stops per card user.
    Anchors,
    /// Train the initial purpose models on the survey data.
    TrainPurpose,
    /// Self-train the purpose models onto the card data.
    SelftrainPurpose,
    /// Label every card trip with a purpose.
    InferPurpose,
    /// Train the age/job/income models on survey day chains.
    TrainSocio,
    /// Self-train the socio models onto the card day chains.
    SelftrainSocio,
    /// Per-day attribute inference over card chains.
    InferSocio,
    /// Majority-vote per-user profiles from per-day predictions.
    Vote,
    /// Score purposes and profiles against hidden truth.
    Evaluate,
    /// Shapley attribution table for a serialized model.
    Explain(ExplainArgs),
    /// Run every stage end to end and write the manifest.
    RunAll,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for the generated input files.
    #[arg(long, default_value = "data")]
    dir: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    /// Serialized model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Feature matrix (.bin or .csv).
    #[arg(long)]
    features: PathBuf,
    /// Comma-separated class names (defaults to class_0..).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "attribution.csv")]
    out_name: String,
}

fn load_config(cli: &Cli) -> Result<ConfigFile, (u8, String)> {
    let mut file: ConfigFile = match &cli.config {
        None => ConfigFile::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                (
                    EXIT_USAGE,
                    format!("cannot read config {}: {e}", path.display()),
                )
            })?;
            toml::from_str(&text)
                .map_err(|e| (EXIT_USAGE, format!("invalid config {}: {e}", path.display())))?
        }
    };
    if let Some(seed) = cli.seed {
        file.run.seed = seed;
        file.synth.seed = seed;
    }
    if let Some(out) = &cli.out {
        file.run.paths.out_dir = out.clone();
    }
    file.run
        .validate()
        .map_err(|e| (EXIT_USAGE, format!("invalid configuration: {e}")))?;
    Ok(file)
}

/// Classify a core error into an exit code: configuration problems are
/// usage errors; bad or missing data is a data error.
fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::InvalidConfig(_) => EXIT_USAGE,
        CoreError::Stage { source, .. } => exit_code_for(source),
        CoreError::Io(_)
        | CoreError::Csv(_)
        | CoreError::Json(_)
        | CoreError::MissingColumn(_)
        | CoreError::UnsortedInput(_)
        | CoreError::InvalidData(_)
        | CoreError::GridCoverage(..)
        | CoreError::OutsideGrid(..)
        | CoreError::ArityMismatch { .. }
        | CoreError::ClassMissing(_)
        | CoreError::Degenerate(_) => EXIT_DATA,
        CoreError::Model(_) => EXIT_DATA,
    }
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    if cli.print_defaults {
        let text = toml::to_string_pretty(&ConfigFile::default())
            .map_err(|e| (EXIT_INTERNAL, format!("cannot render defaults: {e}")))?;
        print!("{text}");
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err((EXIT_USAGE, "missing subcommand; see --help".into()));
    };

    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| (EXIT_USAGE, format!("cannot configure {threads} threads: {e}")))?;
    }

    let config = load_config(&cli)?;
    let map_core = |e: CoreError| (exit_code_for(&e), e.to_string());

    match command {
        Command::Synth(args) => {
            let data = synth::generate(&config.synth).map_err(map_core)?;
            data.write_to_dir(&args.dir).map_err(map_core)?;
            println!(
                "wrote {} rides, {} survey respondents, {} stations to {}",
                data.rides.len(),
                data.survey.len(),
                data.poi.len(),
                args.dir.display()
            );
        }
        Command::Ingest => pipeline::cmd_ingest(&config.run).map_err(map_core)?,
        Command::Anchors => pipeline::cmd_anchors(&config.run).map_err(map_core)?,
        Command::TrainPurpose => pipeline::cmd_train_purpose(&config.run).map_err(map_core)?,
        Command::SelftrainPurpose => {
            pipeline::cmd_selftrain_purpose(&config.run).map_err(map_core)?
        }
        Command::InferPurpose => pipeline::cmd_infer_purpose(&config.run).map_err(map_core)?,
        Command::TrainSocio => pipeline::cmd_train_socio(&config.run).map_err(map_core)?,
        Command::SelftrainSocio => pipeline::cmd_selftrain_socio(&config.run).map_err(map_core)?,
        Command::InferSocio => pipeline::cmd_infer_socio(&config.run).map_err(map_core)?,
        Command::Vote => pipeline::cmd_vote(&config.run).map_err(map_core)?,
        Command::Evaluate => pipeline::cmd_evaluate(&config.run).map_err(map_core)?,
        Command::Explain(args) => pipeline::cmd_explain(
            &config.run,
            &args.model,
            &args.features,
            args.classes.clone(),
            &args.out_name,
        )
        .map_err(map_core)?,
        Command::RunAll => {
            let manifest = pipeline::run_all(&config.run).map_err(map_core)?;
            println!(
                "run complete: {} artifacts in {}",
                manifest.output_hashes.len(),
                config.run.paths.out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(
        if cli.verbose { "info" } else { "warn" },
    ))
    .init();

    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli)));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err((code, message))) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            eprintln!("internal error: {message}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
