use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cv_teleport::cli::{run, CliError, Command, Exit};
use cv_teleport::config::RunConfig;

/// Continuous-variable teleportation experiments on a position lattice.
#[derive(Parser)]
#[command(name = "cvtele", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Orthogonality and completeness of the Bell, triple and pi123 bases.
    BasesCheck(Common),
    /// Teleport one particle through an EPR pair.
    TeleportSingle(Common),
    /// Teleport an entangled pair to two receivers through a GHZ triplet.
    TeleportEntangled(Common),
    /// Fidelity and output variances against squeezing or grid size.
    Sweep(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    Pi123,
    Triple,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set grid.n_points=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    runs: Option<usize>,
    /// Three-particle measurement basis for the entangled protocol.
    #[arg(long, value_enum)]
    basis: Option<Basis>,
}

fn build_config(c: &Common) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.apply_text(&text).map_err(|e| e.to_string())?;
    }
    for pair in &c.overrides {
        cfg.apply_override(pair).map_err(|e| e.to_string())?;
    }
    let mut set = |k: &str, v: String| cfg.set(k, &v).map_err(|e| e.to_string());
    if let Some(f) = c.format {
        set("output.format", match f { Format::Csv => "csv", Format::Json => "json" }.into())?;
    }
    if let Some(s) = c.seed {
        set("seeds.base", s.to_string())?;
    }
    if let Some(n) = c.runs {
        set("seeds.count", n.to_string())?;
    }
    if let Some(b) = c.basis {
        set("protocol.basis", match b { Basis::Pi123 => "pi123", Basis::Triple => "triple" }.into())?;
    }
    if let Some(out) = &c.out {
        set("output.path", out.display().to_string())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Sub::BasesCheck(c) => (Command::BasesCheck, c),
        Sub::TeleportSingle(c) => (Command::TeleportSingle, c),
        Sub::TeleportEntangled(c) => (Command::TeleportEntangled, c),
        Sub::Sweep(c) => (Command::Sweep, c),
    };
    let cfg = match build_config(common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Exit::ValidationError as u8);
        }
    };
    let report = match run(command, &cfg) {
        Ok(r) => r,
        Err(e) => {
            let kind = match e {
                CliError::Config(_) => "configuration",
                CliError::Run(_) => "validation",
            };
            eprintln!("{kind} error: {e}");
            return ExitCode::from(Exit::ValidationError as u8);
        }
    };
    let written = match &cfg.path {
        Some(path) => std::fs::write(path, &report.document).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{}", report.document);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(Exit::ValidationError as u8);
    }
    if !report.failures.is_empty() {
        eprintln!("{}", serde_json::json!({ "failures": report.failures }));
    }
    ExitCode::from(report.exit as u8)
}
