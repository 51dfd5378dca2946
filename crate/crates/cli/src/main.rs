use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use forage_core::bundle::{run_command, BundleError, RunOptions};
use forage_core::config::{load_config, preset, LoadError, SET1_TOML, SET2_TOML};
use forage_core::experiment::ExperimentError;
use forage_core::Mode;

/// Exit codes by error category.
mod exit {
    pub const CONFIG: u8 = 3;
    pub const SIMULATION: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Parser)]
#[command(
    name = "forage",
    version,
    about = "Self-organized task allocation in a simulated foraging swarm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of replications and write the output bundle.
    Run(RunArgs),
    /// Print a shipped preset as TOML.
    Preset {
        #[arg(value_enum)]
        name: PresetName,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Shipped preset to run.
    #[arg(long, value_enum, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<PresetName>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured number of replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Override the allocation mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Write per-run event logs.
    #[arg(long)]
    events: bool,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    Set1,
    Set2,
}

impl PresetName {
    fn key(self) -> &'static str {
        match self {
            PresetName::Set1 => "set1",
            PresetName::Set2 => "set2",
        }
    }

    fn toml(self) -> &'static str {
        match self {
            PresetName::Set1 => SET1_TOML,
            PresetName::Set2 => SET2_TOML,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Original,
    Modified,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Original => Mode::Original,
            ModeArg::Modified => Mode::Modified,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Preset { name } => {
            print!("{}", name.toml());
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err((code, message)) => {
                eprintln!("error: {message}");
                ExitCode::from(code)
            }
        },
    }
}

fn run(args: RunArgs) -> Result<(), (u8, String)> {
    let config = match (&args.preset, &args.config) {
        (Some(name), _) => preset(name.key()),
        (None, Some(path)) => load_config(path),
        (None, None) => unreachable!("clap requires one of --preset and --config"),
    }
    .map_err(|e| match e {
        LoadError::Io { .. } => (exit::IO, e.to_string()),
        _ => (exit::CONFIG, e.to_string()),
    })?;
    let options = RunOptions {
        seed: args.seed,
        replications: args.replications,
        mode: args.mode.map(Mode::from),
        events: args.events,
    };
    let bundle = run_command(&config, options, &args.out).map_err(|e| {
        let code = match &e {
            BundleError::Io { .. } => exit::IO,
            BundleError::Experiment(ExperimentError::Config(_)) => exit::CONFIG,
            BundleError::Experiment(_) | BundleError::Analysis(_) => exit::SIMULATION,
        };
        (code, e.to_string())
    })?;
    let r = &bundle.report;
    println!(
        "{} replications, {} robots each -> {}",
        r.results.len(),
        r.config.robot_count,
        bundle.dir.display()
    );
    for h in r.histograms.iter().filter(|h| h.stage == "final") {
        println!("bimodality {:<6} {:.3}", h.quantity, h.bimodality());
    }
    println!(
        "binomial p_hat {:.3}, TV distance {:.3}",
        r.binomial.p_hat, r.binomial.tv_distance
    );
    if let Some(p) = r.preferences {
        println!(
            "preference match {:.3}, loafer region yellow {:.3}",
            p.match_rate(),
            p.loafer_yellow_rate()
        );
    }
    Ok(())
}
