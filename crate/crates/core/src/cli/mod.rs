//! Command-line front end.

pub mod commands;
pub mod io;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
pub use commands::{bound, export_slice, oracle_suite, run, verify, Fixed};
pub use io::RunManifest;
pub use scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "mtve",
    version,
    about = "Two-particle multi-time integral equation solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a scenario and write fields and a manifest.
    Run {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Export a slice of a stored solution as delimited text.
    ExportSlice(ExportArgs),
    /// Check file checksums and recompute the residual of a stored run.
    Verify { manifest: PathBuf },
    /// Print the closed-universe contraction bound of a scenario.
    Bound { scenario: PathBuf },
    /// Run the built-in oracle comparisons on tiny grids.
    Oracle,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Manifest file or run directory.
    manifest: PathBuf,
    #[arg(long, requires = "eta2", conflicts_with_all = ["x1", "x2"])]
    eta1: Option<f64>,
    #[arg(long, requires = "eta1")]
    eta2: Option<f64>,
    /// Comma-separated coordinates of particle 1.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "x2"
    )]
    x1: Option<Vec<f64>>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "x1"
    )]
    x2: Option<Vec<f64>>,
    #[arg(short, long)]
    out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } => EXIT_NOT_CONVERGED,
        Error::Verification { .. } | Error::SingularMatrix { .. } => EXIT_VERIFY,
        _ => EXIT_INPUT,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("MTVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MTVE_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn fail(err: Error) -> i32 {
    eprintln!("error: {err}");
    exit_code(&err)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_INPUT;
    }
    match cli.command {
        Command::Run { scenario, out } => match run(&scenario, &out) {
            Ok(o) => {
                let m = &o.manifest;
                println!(
                    "{} after {} iterations, residual {:.3e}",
                    if m.converged {
                        "converged"
                    } else {
                        "not converged"
                    },
                    m.iterations,
                    m.residual
                );
                for w in &m.warnings {
                    println!("warning: {w}");
                }
                println!("wrote {}", o.out_dir.display());
                if m.converged {
                    EXIT_OK
                } else {
                    EXIT_NOT_CONVERGED
                }
            }
            Err(e) => fail(e),
        },
        Command::ExportSlice(a) => {
            let fixed = match (a.eta1, a.eta2, a.x1, a.x2) {
                (Some(e1), Some(e2), None, None) => Fixed::Times(e1, e2),
                (None, None, Some(x1), Some(x2)) => Fixed::Points(x1, x2),
                _ => {
                    eprintln!("error: give either --eta1/--eta2 or --x1/--x2");
                    return EXIT_INPUT;
                }
            };
            match export_slice(&a.manifest, &fixed, &a.out) {
                Ok(text) => {
                    for l in text.lines().take_while(|l| l.starts_with('#')) {
                        println!("{}", &l[2..]);
                    }
                    EXIT_OK
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { manifest } => match verify(&manifest) {
            Ok(r) => {
                println!(
                    "ok: {} files, residual recorded {:.6e} recomputed {:.6e}",
                    r.files_checked, r.recorded, r.recomputed
                );
                EXIT_OK
            }
            Err(e) => {
                eprintln!("verification failed: {e}");
                match e {
                    Error::Verification { .. } => EXIT_VERIFY,
                    other => exit_code(&other),
                }
            }
        },
        Command::Bound { scenario } => match bound(&scenario) {
            Ok(b) => {
                println!("{b:.17e}");
                EXIT_OK
            }
            Err(e) => fail(e),
        },
        Command::Oracle => match oracle_suite() {
            Ok(lines) => {
                let mut ok = true;
                for l in &lines {
                    println!(
                        "{} {}: {}",
                        if l.passed { "PASS" } else { "FAIL" },
                        l.name,
                        l.detail
                    );
                    ok &= l.passed;
                }
                if ok {
                    EXIT_OK
                } else {
                    EXIT_VERIFY
                }
            }
            Err(e) => fail(e),
        },
    }
}
