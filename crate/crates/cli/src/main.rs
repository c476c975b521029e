//! `picard-lod`: solve, certify and inspect Cauchy problems from JSON files.
//!
//! Exit codes: 0 converged, 2 diverging, 3 inconclusive, 1 error.

mod commands;
mod problem;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use picard_lod::picard_pde::LambdaMode;

use commands::Outcome;
use problem::ProblemFile;
use report::Sink;

#[derive(Parser)]
#[command(name = "picard-lod", version, about = "Picard iteration with loss of derivatives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Conservative,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum Against {
    Generic,
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate to a fixed point and validate the result.
    Solve {
        file: PathBuf,
        /// Stop with exit code 2 when the certificate diverges.
        #[arg(long)]
        certify_first: bool,
        /// Use the closed-form contraction constants.
        #[arg(long)]
        paper_mode: bool,
        /// Output directory (defaults to the file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the Weissinger certificate only.
    Certify {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "conservative")]
        mode: Mode,
        #[arg(long, default_value_t = 30)]
        nmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sum the series solution of a linear problem.
    Series {
        file: PathBuf,
        #[arg(long, default_value_t = 20)]
        terms: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the closed-form iterates with the generic operator or an oracle.
    Compare {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "generic")]
        against: Against,
        /// Iterations (generic) or series terms (oracle).
        #[arg(long, default_value_t = 6)]
        terms: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a catalog example against its exact solution.
    Demo {
        case: String,
        #[arg(long, default_value_t = 0.1)]
        tbar: f64,
        #[arg(long, default_value_t = 20)]
        terms: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn sink_for(file: &Path, out: Option<PathBuf>, command: &'static str) -> Sink {
    let dir = out.unwrap_or_else(|| {
        file.parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    let stem = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into());
    Sink { dir, stem, command }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PICARD_LOD_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("PICARD_LOD_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    configure_threads()?;
    match cli.command {
        Command::Solve {
            file,
            certify_first,
            paper_mode,
            out,
        } => {
            let pf = ProblemFile::load(&file)?;
            commands::cmd_solve(&pf, &sink_for(&file, out, "solve"), certify_first, paper_mode)
        }
        Command::Certify { file, mode, nmax, out } => {
            let pf = ProblemFile::load(&file)?;
            let mode = match mode {
                Mode::Conservative => LambdaMode::Conservative,
                Mode::Paper => LambdaMode::Paper,
            };
            commands::cmd_certify(&pf, &sink_for(&file, out, "certify"), mode, nmax)
        }
        Command::Series { file, terms, out } => {
            let pf = ProblemFile::load(&file)?;
            commands::cmd_series(&pf, &sink_for(&file, out, "series"), terms)
        }
        Command::Compare {
            file,
            against,
            terms,
            out,
        } => {
            let pf = ProblemFile::load(&file)?;
            let against = match against {
                Against::Generic => "generic",
                Against::Oracle => "oracle",
            };
            commands::cmd_compare(&pf, &sink_for(&file, out, "compare"), against, terms)
        }
        Command::Demo { case, tbar, terms, out } => {
            let sink = Sink {
                dir: out,
                stem: format!("demo-{case}"),
                command: "demo",
            };
            commands::cmd_demo(&case, &sink, tbar, terms)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) => ExitCode::from(o.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
