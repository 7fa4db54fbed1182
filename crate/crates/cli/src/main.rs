use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nodal_cli::{run, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "nodal", version, about = "Certified sub/super-solution pipeline for Neumann p-Laplacian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Torsion functions, their constants and the first comparison lemma.
    Torsion(Flags),
    /// Parameter selection and barrier certificates, without the system solve.
    Barriers(Flags),
    /// Full sign-changing pipeline including the system solve.
    Solve(Flags),
    /// Positive-barrier pipeline.
    Positive(Flags),
    /// Invariant suites of every module.
    VerifyAll(Flags),
    /// Feasibility table over parameter ranges.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, solve, flags) = match cli.command {
        Command::Torsion(f) => (Mode::Torsion, true, f),
        Command::Barriers(f) => (Mode::Nodal, false, f),
        Command::Solve(f) => (Mode::Nodal, true, f),
        Command::Positive(f) => (Mode::Positive, true, f),
        Command::VerifyAll(f) => (Mode::VerifyAll, true, f),
        Command::Sweep(f) => (Mode::Sweep, true, f),
    };
    let mut cfg = match &flags.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    cfg.solve = cfg.solve && solve;
    if let Some(out) = &flags.out {
        cfg.out = out.display().to_string();
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    cfg.verbose |= flags.verbose;

    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(e) = report.write(std::path::Path::new(&cfg.out)) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    print!("{}", report.to_text());
    ExitCode::from(report.exit_code() as u8)
}
