//! `condop`: classify weighted conditional type operators from instance files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use condop::gen::InstanceRecipe;
use condop::report::{self, exit, Command, Report, Settings};
use condop::{InstanceFile, DEFAULT_DEPTH, DEFAULT_TOL};

#[derive(Parser, Debug)]
#[command(
    name = "condop",
    version,
    about = "Closed forms and matrix oracles for M_w E M_u on finite measure spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// Closed form versus oracle tolerance.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Relative support tolerance (default: the instance's, else 1e-10).
    #[arg(long = "supp-tol", global = true)]
    supp_tol: Option<f64>,
    /// Depth of the commuting-family check.
    #[arg(long, global = true, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    /// Master seed for generated instances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of search trials.
    #[arg(long, global = true, default_value_t = 1000)]
    trials: usize,
    /// Write the structured report here (`gen`: the generated instance).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of the report on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Structured,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    VerticalStrip,
    SymmetricPair,
    Random,
    EqualityCase,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Centered and normal verdicts, closed form against oracle.
    Check { instance: PathBuf },
    /// Polar decomposition against the SVD.
    Polar { instance: PathBuf },
    /// Aluthge transform against its spectral construction.
    Aluthge { instance: PathBuf },
    /// Point spectrum and joint point spectrum.
    Spectrum { instance: PathBuf },
    /// Kernel operator checks through the product-space lift.
    Kernel { instance: PathBuf },
    /// Generate an explicit instance from a recipe.
    Gen {
        #[arg(value_enum)]
        kind: Kind,
        /// Grid resolution for vertical-strip.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Comma-separated positive grid for symmetric-pair.
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
        grid: Vec<f64>,
        /// Number of points for random and equality-case.
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Number of atoms for random and equality-case.
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        /// Weight scale for random.
        #[arg(long, default_value_t = 1.0)]
        magnitude: f64,
    },
    /// Full regression suite on an instance, or on seeded instances.
    Verify { instance: Option<PathBuf> },
    /// Randomized counterexample search for the centeredness criterion.
    Search,
}

fn settings(f: &Flags) -> Settings {
    Settings {
        tol: f.tol,
        supp_tol: f.supp_tol,
        depth: f.depth,
        seed: f.seed,
        trials: f.trials,
    }
}

fn load(path: &Path) -> Result<InstanceFile, condop::Error> {
    InstanceFile::from_path(path)
}

/// Prints the failure and returns `false` when the file cannot be written.
fn write_file(path: &Path, text: &str) -> bool {
    std::fs::write(path, text)
        .map_err(|e| eprintln!("error: cannot write {}: {e}", path.display()))
        .is_ok()
}

fn emit(report: &Report, flags: &Flags, to_stderr: bool) {
    let text = match flags.format {
        Format::Text => report.to_text(),
        Format::Structured => report.to_structured_json(),
    };
    if to_stderr {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
}

fn run(cli: Cli) -> Result<i32, condop::Error> {
    let flags = cli.flags;
    let s = settings(&flags);
    let (command, path) = match cli.command {
        Cmd::Gen {
            kind,
            resolution,
            grid,
            points,
            blocks,
            magnitude,
        } => {
            let recipe = match kind {
                Kind::VerticalStrip => InstanceRecipe::VerticalStrip { resolution },
                Kind::SymmetricPair => InstanceRecipe::SymmetricPair { grid },
                Kind::Random => InstanceRecipe::Random {
                    seed: s.seed,
                    n_points: points,
                    n_blocks: blocks,
                    magnitude,
                },
                Kind::EqualityCase => InstanceRecipe::EqualityCase {
                    seed: s.seed,
                    n_points: points,
                    n_blocks: blocks,
                },
            };
            let (inst, report) = report::generate(&recipe, s)?;
            let text = inst.to_pretty_json() + "\n";
            let code = match &flags.out {
                Some(p) => {
                    if !write_file(p, &text) {
                        return Ok(exit::INPUT);
                    }
                    emit(&report, &flags, false);
                    report.exit_code
                }
                None => {
                    print!("{text}");
                    emit(&report, &flags, true);
                    report.exit_code
                }
            };
            return Ok(code);
        }
        Cmd::Check { instance } => (Command::Check, Some(instance)),
        Cmd::Polar { instance } => (Command::Polar, Some(instance)),
        Cmd::Aluthge { instance } => (Command::Aluthge, Some(instance)),
        Cmd::Spectrum { instance } => (Command::Spectrum, Some(instance)),
        Cmd::Kernel { instance } => (Command::Kernel, Some(instance)),
        Cmd::Verify { instance } => (Command::Verify, instance),
        Cmd::Search => (Command::Search, None),
    };
    let inst = path.as_deref().map(load).transpose()?;
    let report = report::run(command, inst.as_ref(), s)?;
    if let Some(p) = &flags.out {
        if !write_file(p, &report.to_structured_json()) {
            return Ok(exit::INPUT);
        }
    }
    emit(&report, &flags, false);
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(report::exit_code_for(&e) as u8)
        }
    }
}
