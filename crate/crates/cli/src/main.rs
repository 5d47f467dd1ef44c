use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use magwell_cli::{presets, run, CliError, Command, Flags, RunConfig};

#[derive(Parser)]
#[command(name = "magwell", version, about = "Normal forms and eigenvalue expansions for magnetic wells")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bundled configuration (quadratic-well-2d, landau, quadratic-well-4d).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write intermediate jets as JSON documents.
    #[arg(long, global = true)]
    dump_jets: bool,
    /// Write oracle matrices as coordinate triplets.
    #[arg(long, global = true)]
    dump_matrix: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Locate the well and check the hypotheses.
    Analyze,
    /// Classical reduction and its invariant residuals.
    Reduce,
    /// Birkhoff normal form and the f* table.
    NormalForm,
    /// Eigenvalue expansions.
    Predict,
    /// Finite-difference spectra over the hbar sweep.
    Oracle,
    /// Oracle spectra joined with predictions.
    Compare,
    /// Predicted and computed eigenvalue counts.
    Weyl,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => return Err(CliError::Config(vec!["--config and --preset are mutually exclusive".into()])),
        (None, None) => return Err(CliError::Config(vec!["one of --config or --preset is required".into()])),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
            RunConfig::from_json(&text).map_err(CliError::Config)?
        }
        (None, Some(name)) => presets::preset(name).ok_or_else(|| {
            CliError::Config(vec![format!("preset: unknown name {name:?}, expected one of {:?}", presets::names())])
        })?,
    };
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", CliError::Config(vec![format!("threads: {e}")]).to_json());
            return ExitCode::from(2);
        }
    }
    let cmd = match cli.command {
        Cmd::Analyze => Command::Analyze,
        Cmd::Reduce => Command::Reduce,
        Cmd::NormalForm => Command::NormalForm,
        Cmd::Predict => Command::Predict,
        Cmd::Oracle => Command::Oracle,
        Cmd::Compare => Command::Compare,
        Cmd::Weyl => Command::Weyl,
    };
    let flags = Flags { dump_jets: cli.dump_jets, dump_matrix: cli.dump_matrix };
    match load(&cli).and_then(|cfg| run(cmd, &cfg, flags)) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
