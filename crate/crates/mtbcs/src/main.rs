use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mtbcs::commands::{self, Options};
use mtbcs::manifest::RunManifest;

#[derive(Parser)]
#[command(name = "mtbcs", version, about = "Multi-frequency MT-BCS subsurface imaging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "mtbcs.toml")]
    config: PathBuf,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for concurrent runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use this single seed instead of `run.seeds`.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize scattered-field data for the configured scene.
    Synth,
    /// Invert a dataset with the configured strategies.
    Invert {
        /// Dataset CSV written by `synth` or `ingest`.
        dataset: PathBuf,
    },
    /// Reconstruction error versus SNR for every strategy and seed.
    Sweep,
    /// Build a dataset from per-view radargram CSV files.
    Ingest {
        /// Directory holding viewNN_total.csv and viewNN_incident.csv.
        radargrams: PathBuf,
    },
    /// List the built-in phantoms.
    Phantoms,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options { config: cli.config, out: cli.out, workers: cli.workers, seed_override: cli.seed_override };
    let name = match &cli.command {
        Command::Synth => "synth",
        Command::Invert { .. } => "invert",
        Command::Sweep => "sweep",
        Command::Ingest { .. } => "ingest",
        Command::Phantoms => {
            print!("{}", commands::cmd_phantoms());
            return ExitCode::SUCCESS;
        }
    };
    let workers = opts.workers.unwrap_or_else(rayon::current_num_threads);
    let mut manifest = RunManifest::new(name, workers, opts.seed_override);
    let result = match &cli.command {
        Command::Synth => commands::cmd_synth(&opts, &mut manifest),
        Command::Invert { dataset } => commands::cmd_invert(&opts, dataset, &mut manifest),
        Command::Sweep => commands::cmd_sweep(&opts, &mut manifest),
        Command::Ingest { radargrams } => commands::cmd_ingest(&opts, radargrams, &mut manifest),
        Command::Phantoms => unreachable!(),
    };
    manifest.finish(&result);
    let out = commands::output_dir(&opts);
    if let Err(e) = manifest.write(&out) {
        eprintln!("mtbcs: cannot write manifest: {e}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mtbcs {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
